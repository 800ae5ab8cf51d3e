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

#include "csiforge/trainer/model.hpp"
#include "csiforge/diffcore/ops.hpp"
#include "csiforge/trainer/loss.hpp"
#include "csiforge/trainer/optim.hpp"

#include <cmath>

namespace csiforge::train
{

using diff::Tensor;
using diff::Var;
using nlohmann::json;

ModelConfig ModelConfig::for_profile(const std::string &name)
{
    ModelConfig c;
    c.profile = name;
    c.sim = sim::SimConfig::profile(name);
    c.net = net::NetConfig::profile(name);
    return c;
}

FusionConfig ModelConfig::uplink_fusion(FusionPoint point) const
{
    FusionConfig f;
    f.point = point;
    const std::size_t ne = point == FusionPoint::features ? net.n_p : net.stage_dims.back();
    f.extractor = profile == "full" ? fusion::ExtractorConfig::uplink_full(ne) : fusion::ExtractorConfig::uplink_desk(ne);
    f.refiner.embed = ne;
    f.refiner.heads = ne % 4 == 0 && ne > 4 ? 4 : (ne % 2 == 0 ? 2 : 1);
    f.sensor_channels = 2;
    f.sensor_rows = sim.n_tx;
    f.sensor_cols = sim.n_sc;
    return f;
}

void ModelConfig::check_rate(int rate) const
{
    const auto n = static_cast<int>(features());
    if (rate < n || rate > n * b_max)
        throw TrainError("rate " + std::to_string(rate) + " outside [" + std::to_string(n) + ", " +
                         std::to_string(n * b_max) + "]");
}

namespace
{

json sizes(const std::vector<std::size_t> &v) { return json(v); }

json extractor_json(const fusion::ExtractorConfig &e)
{
    return {{"patch_h", e.patch_h}, {"patch_w", e.patch_w}, {"dims", sizes(e.dims)}, {"heads", sizes(e.heads)},
            {"n_e", e.n_e},         {"window", e.window},   {"depth", e.depth},      {"mlp_ratio", e.mlp_ratio}};
}

fusion::ExtractorConfig extractor_from(const json &j)
{
    fusion::ExtractorConfig e;
    j.at("patch_h").get_to(e.patch_h);
    j.at("patch_w").get_to(e.patch_w);
    j.at("dims").get_to(e.dims);
    j.at("heads").get_to(e.heads);
    j.at("n_e").get_to(e.n_e);
    j.at("window").get_to(e.window);
    j.at("depth").get_to(e.depth);
    j.at("mlp_ratio").get_to(e.mlp_ratio);
    return e;
}

} // namespace

json ModelConfig::to_json() const
{
    json j;
    j["profile"] = profile;
    j["sim"] = {{"n_tx", sim.n_tx},
                {"n_rb", sim.n_rb},
                {"n_sc", sim.n_sc},
                {"scs_hz", sim.scs_hz},
                {"f_dl_hz", sim.f_dl_hz},
                {"f_ul_hz", sim.f_ul_hz},
                {"fft_size", sim.fft_size},
                {"sample_rate_hz", sim.sample_rate_hz},
                {"array_rows", sim.array_rows},
                {"array_cols", sim.array_cols},
                {"dual_polarized", sim.dual_polarized}};
    j["net"] = {{"stage_dims", sizes(net.stage_dims)},
                {"heads", sizes(net.heads)},
                {"n_p", net.n_p},
                {"window", net.window},
                {"patch_antennas", net.patch_antennas},
                {"patch_subcarriers", net.patch_subcarriers},
                {"depth", net.depth},
                {"mlp_ratio", net.mlp_ratio}};
    j["b_max"] = b_max;
    if (fusion)
        j["fusion"] = {{"extractor", extractor_json(fusion->extractor)},
                       {"refiner",
                        {{"embed", fusion->refiner.embed},
                         {"heads", fusion->refiner.heads},
                         {"mlp_ratio", fusion->refiner.mlp_ratio},
                         {"depth", fusion->refiner.depth}}},
                       {"point", fusion->point == FusionPoint::features ? "features" : "expanded"},
                       {"sensor_channels", fusion->sensor_channels},
                       {"sensor_rows", fusion->sensor_rows},
                       {"sensor_cols", fusion->sensor_cols}};
    else
        j["fusion"] = nullptr;
    return j;
}

ModelConfig ModelConfig::from_json(const json &j)
{
    try
    {
        ModelConfig c;
        j.at("profile").get_to(c.profile);
        const auto &s = j.at("sim");
        s.at("n_tx").get_to(c.sim.n_tx);
        s.at("n_rb").get_to(c.sim.n_rb);
        s.at("n_sc").get_to(c.sim.n_sc);
        s.at("scs_hz").get_to(c.sim.scs_hz);
        s.at("f_dl_hz").get_to(c.sim.f_dl_hz);
        s.at("f_ul_hz").get_to(c.sim.f_ul_hz);
        s.at("fft_size").get_to(c.sim.fft_size);
        s.at("sample_rate_hz").get_to(c.sim.sample_rate_hz);
        s.at("array_rows").get_to(c.sim.array_rows);
        s.at("array_cols").get_to(c.sim.array_cols);
        s.at("dual_polarized").get_to(c.sim.dual_polarized);
        const auto &n = j.at("net");
        n.at("stage_dims").get_to(c.net.stage_dims);
        n.at("heads").get_to(c.net.heads);
        n.at("n_p").get_to(c.net.n_p);
        n.at("window").get_to(c.net.window);
        n.at("patch_antennas").get_to(c.net.patch_antennas);
        n.at("patch_subcarriers").get_to(c.net.patch_subcarriers);
        n.at("depth").get_to(c.net.depth);
        n.at("mlp_ratio").get_to(c.net.mlp_ratio);
        j.at("b_max").get_to(c.b_max);
        const auto &f = j.at("fusion");
        if (!f.is_null())
        {
            FusionConfig fc;
            fc.extractor = extractor_from(f.at("extractor"));
            const auto &r = f.at("refiner");
            r.at("embed").get_to(fc.refiner.embed);
            r.at("heads").get_to(fc.refiner.heads);
            r.at("mlp_ratio").get_to(fc.refiner.mlp_ratio);
            r.at("depth").get_to(fc.refiner.depth);
            const auto point = f.at("point").get<std::string>();
            if (point != "features" && point != "expanded")
                throw TrainError("unknown fusion point '" + point + "'");
            fc.point = point == "features" ? FusionPoint::features : FusionPoint::expanded;
            f.at("sensor_channels").get_to(fc.sensor_channels);
            f.at("sensor_rows").get_to(fc.sensor_rows);
            f.at("sensor_cols").get_to(fc.sensor_cols);
            c.fusion = fc;
        }
        c.sim.validate();
        return c;
    }
    catch (const json::exception &e)
    {
        throw TrainError(std::string("model config: ") + e.what());
    }
}

const std::vector<std::string> &CsiModel::group_names()
{
    static const std::vector<std::string> names{"encoder", "quantizer", "decoder", "extractor", "fusion"};
    return names;
}

CsiModel::CsiModel(const ModelConfig &cfg, std::uint64_t seed)
    : cfg_(cfg), ps_(std::make_unique<net::ParameterSet>())
{
    cfg_.sim.validate();
    net::Initializer init(seed);
    encoder_ = std::make_unique<net::Encoder>(*ps_, init, cfg_.net, cfg_.sim);
    decoder_ = std::make_unique<net::Decoder>(*ps_, init, cfg_.net, cfg_.sim);
    quant_ = quant::QuantizerParams(encoder_->features(), cfg_.b_max);
    if (cfg_.fusion)
    {
        const auto &f = *cfg_.fusion;
        const std::size_t want = f.point == FusionPoint::features ? cfg_.net.n_p : cfg_.net.stage_dims.back();
        if (f.extractor.n_e != want || f.refiner.embed != want)
            throw TrainError("fusion: sensor embedding must equal the fused token width " + std::to_string(want));
        extractor_ = std::make_unique<fusion::SensorExtractor>(*ps_, init, f.extractor, f.sensor_channels,
                                                               f.sensor_rows, f.sensor_cols);
        refiner_ = std::make_unique<fusion::Refiner>(*ps_, init, f.refiner, decoder_->token_count(),
                                                     extractor_->token_count());
    }
}

std::vector<diff::Parameter *> CsiModel::parameters() const
{
    auto all = ps_->list();
    all.push_back(const_cast<diff::Parameter *>(&quant_.raw));
    return all;
}

std::vector<diff::Parameter *> CsiModel::group(const std::string &name) const
{
    std::vector<diff::Parameter *> out;
    for (auto *p : parameters())
        if (group_of(p->name) == name)
            out.push_back(p);
    return out;
}

void CsiModel::set_group_trainable(const std::string &name, bool on)
{
    for (auto *p : group(name))
    {
        p->requires_grad = on;
        p->zero_grad();
    }
}

quant::BitAllocation CsiModel::allocation(int rate) const
{
    cfg_.check_rate(rate);
    return quant::allocate_bits(rate, features(), cfg_.b_max);
}

Var CsiModel::encode(diff::Graph &g, const Var &h) const { return (*encoder_)(g, h); }

Var CsiModel::boundaries(diff::Graph &g) { return quant::boundaries(g, quant_); }

Var CsiModel::quantize(diff::Graph &, const Var &z, const Var &bounds, int rate) const
{
    return quant::quantize_level_sums(z, bounds, allocation(rate));
}

Var CsiModel::sensor_tokens(diff::Graph &g, const Var &grid) const
{
    if (!extractor_)
        throw TrainError("model has no sensor extractor (stage-1 checkpoint?)");
    return extractor_->tokens(g, grid);
}

Var CsiModel::decode(diff::Graph &g, const Var &zq, const Var *sensor) const
{
    if (!sensor)
        return (*decoder_)(g, zq);
    if (!refiner_)
        throw TrainError("model has no fusion refiner (stage-1 checkpoint?)");
    if (cfg_.fusion->point == FusionPoint::features)
    {
        const std::size_t B = zq.shape().at(0), E = refiner_->embed();
        auto zr = (*refiner_)(g, diff::reshape(zq, {B, features() / E, E}), *sensor);
        return (*decoder_)(g, diff::reshape(zr, {B, features()}));
    }
    return decoder_->from_tokens(g, (*refiner_)(g, decoder_->expand(g, zq), *sensor));
}

void CsiModel::init_quantizer(const Tensor &z)
{
    if (z.rank() != 2 || z.dim(1) != features() || z.dim(0) == 0)
        throw TrainError("init_quantizer: expected [S, " + std::to_string(features()) + "] features");
    const std::size_t S = z.dim(0), N = z.dim(1);
    std::vector<double> mean(N, 0.0), sd(N, 0.0);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t i = 0; i < N; ++i)
            mean[i] += z[s * N + i] / static_cast<double>(S);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t i = 0; i < N; ++i)
            sd[i] += (z[s * N + i] - mean[i]) * (z[s * N + i] - mean[i]) / static_cast<double>(S);
    for (auto &v : sd)
        v = std::sqrt(v);
    quant_.initialize(mean, sd);
}

sim::SensorGrid CsiModel::sensor_of(const sim::Sample &s) const
{
    if (!cfg_.fusion)
        throw TrainError("model has no sensor extractor");
    if (s.sensor)
        return *s.sensor;
    if (s.uplink)
        return sim::uplink_sensor_grid(*s.uplink, cfg_.fusion->extractor.patch_h, cfg_.fusion->extractor.patch_w);
    throw TrainError("missing sensor modality: sample has neither a sensor grid nor uplink CSI");
}

Tensor encode_features(CsiModel &model, const std::vector<const sim::ChannelMatrix *> &batch)
{
    diff::Graph g(false);
    return model.encode(g, g.constant(net::channels_to_tensor(batch, true))).value();
}

quant::CsiBitstream encode_channel(CsiModel &model, const sim::ChannelMatrix &h, int rate)
{
    const auto z = encode_features(model, {&h});
    return quant::encode_bitstream(z.data(), quant::materialize_boundaries(model.quantizer()), model.allocation(rate));
}

sim::ChannelMatrix decode_channel(CsiModel &model, const quant::CsiBitstream &stream, const sim::SensorGrid *sensor)
{
    if (stream.allocation.features() != model.features() || stream.allocation.b_max != model.config().b_max)
        throw TrainError("bitstream does not match the model's feature count or b_max");
    const auto zq = quant::decode_level_sums(stream);
    diff::Graph g(false);
    auto z = g.constant(Tensor({1, zq.size()}, zq));
    if (!sensor)
        return net::tensor_to_channel(model.decode(g, z).value(), 0);
    auto zd = model.sensor_tokens(g, g.constant(fusion::sensor_batch_tensor({sensor})));
    return net::tensor_to_channel(model.decode(g, z, &zd).value(), 0);
}

std::vector<sim::ChannelMatrix> reconstruct(CsiModel &model, const std::vector<const sim::ChannelMatrix *> &inputs,
                                            int rate, const std::vector<const sim::SensorGrid *> *sensors)
{
    diff::Graph g(false);
    auto z = model.encode(g, g.constant(net::channels_to_tensor(inputs, true)));
    auto zq = model.quantize(g, z, model.boundaries(g), rate);
    Var out;
    if (sensors)
    {
        if (sensors->size() != inputs.size())
            throw TrainError("reconstruct: one sensor grid per channel required");
        auto zd = model.sensor_tokens(g, g.constant(fusion::sensor_batch_tensor(*sensors)));
        out = model.decode(g, zq, &zd);
    }
    else
        out = model.decode(g, zq);
    std::vector<sim::ChannelMatrix> res;
    for (std::size_t b = 0; b < inputs.size(); ++b)
        res.push_back(net::tensor_to_channel(out.value(), b));
    return res;
}

} // namespace csiforge::train
