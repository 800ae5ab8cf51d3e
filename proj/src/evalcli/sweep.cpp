// SPDX-License-Identifier: Apache-2.0
//
// csiforge: variable-rate CSI feedback codec and MIMO-OFDM simulation harness
// Copyright (C) 2026 The csiforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "csiforge/evalcli/sweep.hpp"
#include "csiforge/common/seed.hpp"
#include "csiforge/diffcore/ops.hpp"
#include "csiforge/trainer/loss.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

namespace csiforge::eval
{

std::string to_string(Mode m) { return m == Mode::csi_only ? "csi_only" : "fused"; }

Mode parse_mode(const std::string &s)
{
    if (s == "csi_only")
        return Mode::csi_only;
    if (s == "fused")
        return Mode::fused;
    throw EvalError("unknown mode '" + s + "' (expected csi_only or fused)");
}

const ReportRow *EvalReport::find(int rate, double snr_db, Mode mode) const
{
    for (const auto &r : rows)
        if (r.rate == rate && r.mode == mode && (r.snr_db == snr_db || (std::isinf(r.snr_db) && std::isinf(snr_db))))
            return &r;
    return nullptr;
}

namespace
{

std::string snr_text(double s) { return std::isinf(s) ? "inf" : (std::ostringstream() << s).str(); }

} // namespace

void EvalReport::write_csv(std::ostream &out) const
{
    out << "rate,snr_db,mode,trained,mean_loss,loss_db,cosine_mean,normalized_gain,throughput\n";
    out.precision(9);
    for (const auto &r : rows)
        out << r.rate << ',' << snr_text(r.snr_db) << ',' << to_string(r.mode) << ',' << (r.trained ? 1 : 0) << ','
            << r.mean_loss << ',' << r.loss_db << ',' << r.cosine_mean << ',' << r.normalized_gain << ','
            << r.throughput << '\n';
}

void EvalReport::write_baselines_csv(std::ostream &out) const
{
    out << "beams,link_snr_db,normalized_gain,throughput\n";
    out.precision(9);
    out << "ideal," << baseline.link_snr_db << ',' << baseline.ideal_gain << ',' << baseline.ideal_throughput << '\n';
    out << "random," << baseline.link_snr_db << ',' << baseline.random_gain << ',' << baseline.random_throughput
        << '\n';
}

std::vector<int> parse_rates(const std::string &spec)
{
    std::vector<int> out;
    auto num = [&](const std::string &t) {
        std::size_t used = 0;
        int v = 0;
        try
        {
            v = std::stoi(t, &used);
        }
        catch (const std::exception &)
        {
            used = 0;
        }
        if (used != t.size() || t.empty())
            throw EvalError("bad rate '" + t + "' in '" + spec + "'");
        return v;
    };
    if (spec.find(':') != std::string::npos)
    {
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        for (std::string t; std::getline(ss, t, ':');)
            parts.push_back(t);
        if (parts.size() != 3)
            throw EvalError("rate range must be start:stop:step, got '" + spec + "'");
        const int a = num(parts[0]), b = num(parts[1]), s = num(parts[2]);
        if (s <= 0 || b < a)
            throw EvalError("empty or ill-formed rate range '" + spec + "'");
        for (int r = a; r <= b; r += s)
            out.push_back(r);
        return out;
    }
    std::stringstream ss(spec);
    for (std::string t; std::getline(ss, t, ',');)
        out.push_back(num(t));
    if (out.empty())
        throw EvalError("no rates given");
    return out;
}

std::vector<double> parse_snrs(const std::string &spec)
{
    std::vector<double> out;
    std::stringstream ss(spec);
    for (std::string t; std::getline(ss, t, ',');)
    {
        if (t == "inf" || t == "perfect")
        {
            out.push_back(sim::kPerfectCsi);
            continue;
        }
        std::size_t used = 0;
        double v = 0.0;
        try
        {
            v = std::stod(t, &used);
        }
        catch (const std::exception &)
        {
            used = 0;
        }
        if (t.empty() || used != t.size() || !std::isfinite(v))
            throw EvalError("bad SNR '" + t + "' in '" + spec + "'");
        out.push_back(v);
    }
    if (out.empty())
        throw EvalError("no SNRs given");
    return out;
}

namespace
{

struct Accum
{
    double loss = 0.0, cosine = 0.0, gain = 0.0, rate = 0.0;
    std::size_t samples = 0, subcarriers = 0;
    std::vector<double> gains;
};

} // namespace

EvalReport rate_sweep(const train::Checkpoint &ckpt, const sim::Dataset &data, const SweepOptions &opt)
{
    if (data.samples.empty())
        throw EvalError("rate_sweep: empty dataset");
    if (opt.rates.empty() || opt.snrs.empty() || opt.modes.empty() || opt.batch == 0)
        throw EvalError("rate_sweep: rates, SNRs and modes must be non-empty");
    auto model = train::load_model(ckpt);
    if (!(data.config == model->config().sim))
        throw EvalError("rate_sweep: dataset channel configuration does not match the checkpoint");
    const bool want_fused = std::find(opt.modes.begin(), opt.modes.end(), Mode::fused) != opt.modes.end();
    if (want_fused && !model->fused())
        throw EvalError("mode fused requires a fused (stage-2) checkpoint");
    for (int r : opt.rates)
        model->config().check_rate(r);

    std::vector<int> trained;
    if (ckpt.config.contains("training") && ckpt.config["training"].contains("rates"))
        trained = ckpt.config["training"]["rates"].get<std::vector<int>>();

    EvalReport rep;
    const std::size_t S = data.samples.size();

    // Baselines on the true channels.
    {
        auto &b = rep.baseline;
        b.link_snr_db = opt.link_snr_db;
        std::vector<double> ig, rg;
        for (std::size_t i = 0; i < S; ++i)
        {
            const auto &h = data.samples[i].downlink;
            const auto pi = beamformer_from_channel(h);
            const auto pr = random_beams(static_cast<std::size_t>(h.rows()), static_cast<std::size_t>(h.cols()),
                                         derive_seed(opt.seed, 0xbea0000 + i));
            for (double g : normalized_gains(h, pi))
                b.ideal_gain += g;
            for (double g : normalized_gains(h, pr))
                b.random_gain += g;
            b.ideal_throughput += throughput(h, pi, opt.link_snr_db) / static_cast<double>(S);
            b.random_throughput += throughput(h, pr, opt.link_snr_db) / static_cast<double>(S);
            const auto a = precoded_gains(h, pi), c = precoded_gains(h, pr);
            ig.insert(ig.end(), a.begin(), a.end());
            rg.insert(rg.end(), c.begin(), c.end());
        }
        b.ideal_gain /= static_cast<double>(ig.size());
        b.random_gain /= static_cast<double>(rg.size());
        b.ideal = Cdf(std::move(ig));
        b.random = Cdf(std::move(rg));
    }

    std::vector<sim::SensorGrid> grids;
    if (want_fused)
        for (const auto &s : data.samples)
            grids.push_back(model->sensor_of(s));

    for (double snr : opt.snrs)
    {
        std::map<std::pair<int, int>, Accum> acc;
        for (std::size_t s0 = 0; s0 < S; s0 += opt.batch)
        {
            const std::size_t s1 = std::min(S, s0 + opt.batch);
            std::vector<sim::ChannelMatrix> inputs;
            for (std::size_t i = s0; i < s1; ++i)
                inputs.push_back(std::isinf(snr) ? data.samples[i].downlink
                                                 : sim::corrupt_estimate(data.samples[i].downlink, snr,
                                                                         derive_seed(opt.seed, i)));
            std::vector<const sim::ChannelMatrix *> ptrs;
            for (const auto &h : inputs)
                ptrs.push_back(&h);
            diff::Graph g(false);
            auto z = model->encode(g, g.constant(net::channels_to_tensor(ptrs, true)));
            auto bounds = model->boundaries(g);
            diff::Var zd;
            if (want_fused)
            {
                std::vector<const sim::SensorGrid *> gp;
                for (std::size_t i = s0; i < s1; ++i)
                    gp.push_back(&grids[i]);
                zd = model->sensor_tokens(g, g.constant(fusion::sensor_batch_tensor(gp)));
            }
            for (int rate : opt.rates)
            {
                auto zq = model->quantize(g, z, bounds, rate);
                for (Mode mode : opt.modes)
                {
                    auto out = mode == Mode::fused ? model->decode(g, zq, &zd) : model->decode(g, zq);
                    auto &a = acc[{rate, static_cast<int>(mode)}];
                    for (std::size_t i = s0; i < s1; ++i)
                    {
                        const auto &h = data.samples[i].downlink;
                        const auto hhat = net::tensor_to_channel(out.value(), i - s0);
                        a.loss += train::reconstruction_loss(h, hhat);
                        const auto p = beamformer_from_channel(hhat);
                        const auto ng = normalized_gains(h, p);
                        for (double v : ng)
                        {
                            a.gain += v;
                            a.cosine += std::sqrt(v);
                        }
                        a.subcarriers += ng.size();
                        a.rate += throughput(h, p, opt.link_snr_db);
                        const auto raw = precoded_gains(h, p);
                        a.gains.insert(a.gains.end(), raw.begin(), raw.end());
                        ++a.samples;
                    }
                }
            }
        }
        for (Mode mode : opt.modes)
            for (int rate : opt.rates)
            {
                auto &a = acc[{rate, static_cast<int>(mode)}];
                ReportRow r;
                r.rate = rate;
                r.snr_db = snr;
                r.mode = mode;
                r.trained = std::find(trained.begin(), trained.end(), rate) != trained.end();
                r.mean_loss = a.loss / static_cast<double>(a.samples);
                r.loss_db = 10.0 * std::log10(r.mean_loss);
                r.cosine_mean = a.cosine / static_cast<double>(a.subcarriers);
                r.normalized_gain = a.gain / static_cast<double>(a.subcarriers);
                r.throughput = a.rate / static_cast<double>(a.samples);
                r.gains = Cdf(std::move(a.gains));
                rep.rows.push_back(std::move(r));
            }
    }
    return rep;
}

} // namespace csiforge::eval
