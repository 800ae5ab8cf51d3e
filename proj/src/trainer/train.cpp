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

#include "csiforge/trainer/train.hpp"
#include "csiforge/common/seed.hpp"
#include "csiforge/diffcore/ops.hpp"
#include "csiforge/trainer/loss.hpp"
#include "csiforge/trainer/optim.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace csiforge::train
{

using diff::Tensor;
using diff::Var;

void TrainConfig::validate(const ModelConfig &model) const
{
    if (!(gamma > 1.0) || !std::isfinite(gamma))
        throw TrainError("gamma must be finite and > 1");
    if (rates.empty())
        throw TrainError("no target rates");
    for (int r : rates)
        model.check_rate(r);
    if (batch_size == 0)
        throw TrainError("batch size must be positive");
    if (!(lr > 0.0) || !(clip_norm > 0.0))
        throw TrainError("learning rate and clip norm must be positive");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw TrainError("validation fraction must lie in (0, 1)");
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double val_fraction,
                                                                            std::uint64_t seed)
{
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, 0x5b17));
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n > 1 ? n - 1 : 1);
    std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> tr(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
    std::sort(val.begin(), val.end());
    return {tr, val};
}

namespace
{

struct Batch
{
    Tensor input, target;
    std::optional<Tensor> sensor;
};

Batch make_batch(const CsiModel &model, const std::vector<const sim::Sample *> &samples, bool fused, double snr_db,
                 std::uint64_t seed, std::size_t offset)
{
    std::vector<const sim::ChannelMatrix *> clean;
    std::vector<sim::ChannelMatrix> noisy;
    std::vector<sim::SensorGrid> grids;
    noisy.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        clean.push_back(&samples[i]->downlink);
        if (std::isfinite(snr_db))
            noisy.push_back(sim::corrupt_estimate(samples[i]->downlink, snr_db, derive_seed(seed, offset + i)));
        if (fused)
            grids.push_back(model.sensor_of(*samples[i]));
    }
    Batch b;
    b.target = net::channels_to_tensor(clean, true);
    if (noisy.empty())
        b.input = b.target;
    else
    {
        std::vector<const sim::ChannelMatrix *> p;
        for (const auto &h : noisy)
            p.push_back(&h);
        b.input = net::channels_to_tensor(p, true);
    }
    if (fused)
    {
        std::vector<const sim::SensorGrid *> p;
        for (const auto &g : grids)
            p.push_back(&g);
        b.sensor = fusion::sensor_batch_tensor(p);
    }
    return b;
}

/// Forward pass over all rates; returns per-sample losses [K*B] (rate-major).
Var forward_losses(diff::Graph &g, CsiModel &model, const Batch &b, const std::vector<int> &rates, bool fused)
{
    auto z = model.encode(g, g.constant(b.input));
    auto bounds = model.boundaries(g);
    std::vector<Var> zq;
    for (int r : rates)
        zq.push_back(model.quantize(g, z, bounds, r));
    auto zall = diff::concat(zq, 0);
    Var hhat;
    if (fused)
    {
        auto zd = model.sensor_tokens(g, g.constant(*b.sensor));
        auto zd_all = diff::concat(std::vector<Var>(rates.size(), zd), 0);
        hhat = model.decode(g, zall, &zd_all);
    }
    else
        hhat = model.decode(g, zall);
    auto target = g.constant(b.target);
    return reconstruction_loss(diff::concat(std::vector<Var>(rates.size(), target), 0), hhat);
}

std::vector<double> per_rate_means(const Tensor &losses, std::size_t rates, std::size_t batch)
{
    std::vector<double> m(rates, 0.0);
    for (std::size_t k = 0; k < rates; ++k)
        for (std::size_t i = 0; i < batch; ++i)
            m[k] += losses[k * batch + i] / static_cast<double>(batch);
    return m;
}

std::vector<const sim::Sample *> pick(const sim::Dataset &d, const std::vector<std::size_t> &idx)
{
    std::vector<const sim::Sample *> out;
    for (auto i : idx)
        out.push_back(&d.samples[i]);
    return out;
}

void append_log(const std::string &path, const EpochRecord &rec, const std::vector<int> &rates)
{
    if (path.empty())
        return;
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out)
        throw FormatError(FormatError::Kind::io, "cannot open log '" + path + "'");
    if (fresh)
        out << "epoch,rate,train_loss,val_loss\n";
    out.precision(9);
    for (std::size_t k = 0; k < rates.size(); ++k)
    {
        out << rec.epoch << ',' << rates[k] << ',';
        if (rec.train_loss.empty())
            out << "nan";
        else
            out << rec.train_loss[k];
        out << ',' << rec.val_loss[k] << '\n';
    }
}

nlohmann::json history_json(const TrainConfig &cfg, const TrainResult &res)
{
    std::vector<double> val;
    for (const auto &e : res.history)
        val.push_back(e.val_weighted);
    return {{"stage", cfg.stage}, {"rates", cfg.rates},         {"gamma", cfg.gamma},
            {"lr", cfg.lr},       {"batch_size", cfg.batch_size}, {"epochs", cfg.epochs},
            {"seed", cfg.seed},   {"best_epoch", res.best_epoch}, {"val_weighted", val},
            {"extractor_warm_start", res.extractor_warm_start}};
}

void check_dataset(const sim::Dataset &data, const ModelConfig &m)
{
    if (!(data.config == m.sim))
        throw TrainError("dataset channel configuration does not match the model profile");
    if (data.samples.size() < 2)
        throw TrainError("need at least two samples to train");
}

TrainResult run(CsiModel &model, const sim::Dataset &data, const TrainConfig &cfg, bool fused,
                const std::set<std::string> &frozen, bool warm = false)
{
    TrainResult res;
    res.extractor_warm_start = warm;
    std::tie(res.train_indices, res.val_indices) = split_indices(data.samples.size(), cfg.val_fraction, cfg.seed);
    const auto val = pick(data, res.val_indices);
    const auto weights = rate_weights(cfg.rates, cfg.gamma);

    Adam opt(model.parameters(), {cfg.lr});
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 0; epoch <= cfg.epochs; ++epoch)
    {
        const auto t0 = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        if (epoch > 0)
        {
            auto order = res.train_indices;
            std::mt19937_64 rng(derive_seed(cfg.seed, 1000 + epoch));
            std::shuffle(order.begin(), order.end(), rng);
            rec.train_loss.assign(cfg.rates.size(), 0.0);
            for (std::size_t s = 0; s < order.size(); s += cfg.batch_size)
            {
                const std::size_t e = std::min(order.size(), s + cfg.batch_size);
                std::vector<const sim::Sample *> batch;
                for (std::size_t i = s; i < e; ++i)
                    batch.push_back(&data.samples[order[i]]);
                const auto b = make_batch(model, batch, fused, cfg.input_snr_db,
                                          derive_seed(cfg.seed, 2000 + epoch), s);
                const std::size_t B = batch.size();
                Tensor w({cfg.rates.size() * B});
                for (std::size_t k = 0; k < cfg.rates.size(); ++k)
                    for (std::size_t i = 0; i < B; ++i)
                        w[k * B + i] = weights[k] / static_cast<double>(B);
                for (auto *p : model.parameters())
                    p->zero_grad();
                diff::Graph g;
                auto losses = forward_losses(g, model, b, cfg.rates, fused);
                auto loss = diff::sum(diff::mul(losses, g.constant(std::move(w))));
                g.backward(loss);
                clip_grad_norm(model.parameters(), cfg.clip_norm);
                opt.step();
                const auto m = per_rate_means(losses.value(), cfg.rates.size(), B);
                for (std::size_t k = 0; k < m.size(); ++k)
                    rec.train_loss[k] += m[k] * static_cast<double>(B) / static_cast<double>(order.size());
            }
        }
        rec.val_loss = evaluate_rates(model, val, cfg.rates, fused, sim::kPerfectCsi, 0, cfg.batch_size);
        rec.val_weighted = weighted_rate_loss(rec.val_loss, cfg.rates, cfg.gamma);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.history.push_back(rec);
        append_log(cfg.log_path, rec, cfg.rates);
        if (cfg.on_epoch)
            cfg.on_epoch(rec);
        if (rec.val_weighted < best)
        {
            best = rec.val_weighted;
            res.best_epoch = epoch;
            res.checkpoint = capture(model, frozen);
        }
    }
    res.checkpoint.config["training"] = history_json(cfg, res);
    return res;
}

} // namespace

std::vector<double> evaluate_rates(CsiModel &model, const std::vector<const sim::Sample *> &samples,
                                   const std::vector<int> &rates, bool fused, double snr_db, std::uint64_t seed,
                                   std::size_t batch)
{
    if (samples.empty() || rates.empty())
        throw TrainError("evaluate_rates: empty sample or rate set");
    std::vector<double> acc(rates.size(), 0.0);
    for (std::size_t s = 0; s < samples.size(); s += batch)
    {
        const std::size_t e = std::min(samples.size(), s + batch);
        std::vector<const sim::Sample *> part(samples.begin() + static_cast<std::ptrdiff_t>(s),
                                              samples.begin() + static_cast<std::ptrdiff_t>(e));
        const auto b = make_batch(model, part, fused, snr_db, seed, s);
        diff::Graph g(false);
        const auto m = per_rate_means(forward_losses(g, model, b, rates, fused).value(), rates.size(), part.size());
        for (std::size_t k = 0; k < m.size(); ++k)
            acc[k] += m[k] * static_cast<double>(part.size()) / static_cast<double>(samples.size());
    }
    return acc;
}

double batch_loss(CsiModel &model, const std::vector<const sim::Sample *> &batch, const std::vector<int> &rates,
                  double gamma, bool fused)
{
    const auto b = make_batch(model, batch, fused, sim::kPerfectCsi, 0, 0);
    diff::Graph g(false);
    const auto m = per_rate_means(forward_losses(g, model, b, rates, fused).value(), rates.size(), batch.size());
    return weighted_rate_loss(m, rates, gamma);
}

TrainResult train_stage1(const sim::Dataset &data, const ModelConfig &mcfg, const TrainConfig &cfg)
{
    if (mcfg.fusion)
        throw TrainError("stage 1 trains the wireless-only codec; drop the fusion config");
    cfg.validate(mcfg);
    check_dataset(data, mcfg);
    CsiModel model(mcfg, derive_seed(cfg.seed, 1));

    // Boundaries start spread over the initial feature distribution.
    auto [tr, va] = split_indices(data.samples.size(), cfg.val_fraction, cfg.seed);
    std::vector<const sim::ChannelMatrix *> probe;
    for (std::size_t i = 0; i < std::min<std::size_t>(tr.size(), 256); ++i)
        probe.push_back(&data.samples[tr[i]].downlink);
    model.init_quantizer(encode_features(model, probe));

    return run(model, data, cfg, false, {});
}

namespace
{

/// Copies encoder weights into a same-layout extractor ("extractor.proj"
/// mirrors "encoder.bottleneck"). Leaves the extractor untouched and returns
/// false unless every tensor has a same-shaped counterpart.
bool copy_encoder_into_extractor(CsiModel &model)
{
    std::map<std::string, diff::Parameter *> enc;
    for (auto *p : model.group("encoder"))
        enc[p->name] = p;
    std::vector<std::pair<diff::Parameter *, const diff::Parameter *>> pairs;
    for (auto *p : model.group("extractor"))
    {
        std::string rest = p->name.substr(std::string("extractor").size());
        if (rest.rfind(".proj.", 0) == 0)
            rest = ".bottleneck." + rest.substr(6);
        const auto it = enc.find("encoder" + rest);
        if (it == enc.end() || it->second->value.shape() != p->value.shape())
            return false;
        pairs.emplace_back(p, it->second);
    }
    if (pairs.size() != enc.size())
        return false;
    for (auto [dst, src] : pairs)
        dst->value = src->value;
    return true;
}

} // namespace

TrainResult train_stage2(const sim::Dataset &data, const Checkpoint &stage1, const TrainConfig &cfg,
                         std::optional<FusionConfig> fusion)
{
    auto mcfg = stage1.model_config();
    if (mcfg.fusion)
        throw TrainError("stage 2 expects a wireless-only (stage-1) checkpoint");
    mcfg.fusion = fusion ? *fusion : mcfg.uplink_fusion();
    cfg.validate(mcfg);
    check_dataset(data, mcfg);
    for (std::size_t i = 0; i < data.samples.size(); ++i)
        if (!data.samples[i].sensor && !data.samples[i].uplink)
            throw TrainError("missing sensor modality: sample " + std::to_string(i) +
                             " has neither a sensor grid nor uplink CSI");

    CsiModel model(mcfg, derive_seed(cfg.seed, 2));
    restore(model, stage1, true);
    const bool warm = cfg.warm_start_extractor && copy_encoder_into_extractor(model);
    std::set<std::string> frozen;
    for (const auto &g : stage1.groups)
    {
        model.set_group_trainable(g.name, false);
        frozen.insert(g.name);
    }
    return run(model, data, cfg, true, frozen, warm);
}

} // namespace csiforge::train
