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

#include <catch2/catch_amalgamated.hpp>

#include "csiforge/diffcore/ops.hpp"
#include "csiforge/trainer/loss.hpp"
#include "csiforge/trainer/optim.hpp"
#include "csiforge/trainer/train.hpp"
#include "gradcheck.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

using namespace csiforge;
using namespace csiforge::train;
using diff::Tensor;
using sim::ChannelMatrix;

namespace
{

ChannelMatrix random_channel(std::size_t r, std::size_t c, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    ChannelMatrix h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < h.size(); ++i)
        h.data()[i] = {nd(rng), nd(rng)};
    return h;
}

// 2 - 2 Re<h, g> / (|h| |g|), summed entrywise without Eigen reductions.
double loss_oracle(const ChannelMatrix &h, const ChannelMatrix &g)
{
    double re = 0.0, nh = 0.0, ng = 0.0;
    for (Eigen::Index i = 0; i < h.size(); ++i)
    {
        const auto a = h.data()[i], b = g.data()[i];
        re += a.real() * b.real() + a.imag() * b.imag();
        nh += std::norm(a);
        ng += std::norm(b);
    }
    return 2.0 - 2.0 * re / std::sqrt(nh * ng);
}

std::filesystem::path temp_path(const std::string &name)
{
    return std::filesystem::temp_directory_path() / ("csiforge_test_trainer_" + name);
}

std::vector<std::uint8_t> file_bytes(const std::filesystem::path &p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path &p, const std::vector<std::uint8_t> &b)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char *>(b.data()), static_cast<std::streamsize>(b.size()));
}

const sim::Dataset &small_dataset()
{
    static const sim::Dataset d = [] {
        sim::GenOptions o;
        o.count = 64;
        o.seed = 5;
        o.with_uplink = true;
        return sim::generate_dataset(sim::SimConfig::desk(), o);
    }();
    return d;
}

TrainConfig quick_config(std::size_t epochs)
{
    TrainConfig c;
    c.epochs = epochs;
    c.seed = 9;
    c.val_fraction = 0.25;
    return c;
}

std::vector<const sim::Sample *> first_samples(const sim::Dataset &d, std::size_t n)
{
    std::vector<const sim::Sample *> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(&d.samples[i]);
    return out;
}

} // namespace

TEST_CASE("reconstruction loss values and properties", "[trainer]")
{
    const auto h = random_channel(8, 24, 1);
    CHECK(reconstruction_loss(h, h) == Catch::Approx(0.0).margin(1e-12));
    CHECK(reconstruction_loss(h, 3.7 * h) == Catch::Approx(0.0).margin(1e-12));
    // Antipodal: each unit vector contributes 2 - 2 * (-1) = 4.
    CHECK(reconstruction_loss(h, -h) == Catch::Approx(4.0).epsilon(1e-12));
    CHECK(loss_oracle(h, -h) == Catch::Approx(4.0).epsilon(1e-12));

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.01, 100.0);
    for (std::uint64_t s = 0; s < 200; ++s)
    {
        const auto a = random_channel(4, 6, 10 + s), b = random_channel(4, 6, 1000 + s);
        const double l = reconstruction_loss(a, b);
        CHECK(l == Catch::Approx(loss_oracle(a, b)).epsilon(1e-12));
        CHECK(l >= 0.0);
        CHECK(l <= 4.0);
        CHECK(std::abs(reconstruction_loss(u(rng) * a, b) - l) < 1e-9);
        CHECK(std::abs(reconstruction_loss(a, u(rng) * b) - l) < 1e-9);
    }

    CHECK_THROWS_AS(reconstruction_loss(h, ChannelMatrix::Zero(8, 24)), TrainError);
    CHECK_THROWS_AS(reconstruction_loss(ChannelMatrix::Zero(8, 24), h), TrainError);
    CHECK_THROWS_AS(reconstruction_loss(h, random_channel(8, 12, 3)), TrainError);
}

TEST_CASE("graph reconstruction loss matches the matrix form and its gradient", "[trainer]")
{
    const auto a = random_channel(2, 6, 4), b = random_channel(2, 6, 5), c = random_channel(2, 6, 6);
    const auto ta = net::channels_to_tensor({&a, &c}, false);
    diff::Parameter hat("hat", net::channels_to_tensor({&b, &a}, false));
    diff::Graph g;
    auto l = reconstruction_loss(g.constant(ta), g.param(hat));
    REQUIRE(l.shape() == diff::Shape{2});
    CHECK(l.value()[0] == Catch::Approx(loss_oracle(a, b)).epsilon(1e-12));
    CHECK(l.value()[1] == Catch::Approx(loss_oracle(c, a)).epsilon(1e-12));

    auto fn = [&](diff::Graph &gg) { return diff::sum(reconstruction_loss(gg.constant(ta), gg.param(hat))); };
    const auto res = testing::gradcheck(fn, {&hat}, 48, 3);
    CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("weighted rate loss", "[trainer]")
{
    const double gamma = std::exp2(1.0 / 96.0);
    const std::vector<int> two{48, 144};
    const std::vector<double> l10{1.0, 0.0};
    // gamma^48 = 2^0.5, gamma^144 = 2^1.5.
    const double expect = std::sqrt(2.0) / (std::sqrt(2.0) + std::pow(2.0, 1.5));
    CHECK(expect == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(weighted_rate_loss(l10, two, gamma) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));

    const std::vector<int> one{96};
    const std::vector<double> l1{0.7};
    CHECK(weighted_rate_loss(l1, one, gamma) == 0.7);

    const std::vector<int> five{48, 72, 96, 120, 144};
    const std::vector<double> l5{0.9, 0.5, 0.4, 0.2, 0.1};
    CHECK(std::abs(weighted_rate_loss(l5, five, 1.0 + 1e-12) - 0.42) < 1e-9);

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 4.0);
    std::uniform_int_distribution<int> rate(48, 144);
    for (int t = 0; t < 500; ++t)
    {
        std::vector<int> r(1 + t % 6);
        std::vector<double> l(r.size());
        for (std::size_t i = 0; i < r.size(); ++i)
        {
            r[i] = rate(rng);
            l[i] = u(rng);
        }
        const double w = weighted_rate_loss(l, r, 1.0 + u(rng));
        CHECK(w >= *std::min_element(l.begin(), l.end()) - 1e-12);
        CHECK(w <= *std::max_element(l.begin(), l.end()) + 1e-12);
    }

    const auto h = random_channel(4, 8, 20);
    std::vector<ChannelMatrix> rec{random_channel(4, 8, 21), h * 2.0};
    CHECK(weighted_rate_loss(h, rec, two, gamma) ==
          Catch::Approx(reconstruction_loss(h, rec[0]) / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(weighted_rate_loss(std::vector<double>{}, std::vector<int>{}, gamma), TrainError);
    CHECK_THROWS_AS(weighted_rate_loss(l10, one, gamma), TrainError);
}

TEST_CASE("adam follows the bias-corrected update", "[trainer]")
{
    diff::Parameter a("encoder.w", Tensor({3}, {1.0, -2.0, 0.5}));
    diff::Parameter b("decoder.w", Tensor({2}, {0.25, 0.75}));
    b.requires_grad = false;
    Adam opt({&a, &b}, {0.01});

    opt.step(); // zero gradient
    CHECK(a.value == Tensor({3}, {1.0, -2.0, 0.5}));

    Adam fresh({&a, &b}, {0.01});
    a.grad = Tensor({3}, {0.3, -4.0, 1e-9});
    b.grad = Tensor({2}, {1.0, 1.0});
    fresh.step();
    // First step: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
    const std::vector<double> g0{0.3, -4.0, 1e-9}, w0{1.0, -2.0, 0.5};
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(a.value[i] == Catch::Approx(w0[i] - 0.01 * g0[i] / (std::abs(g0[i]) + 1e-8)).epsilon(1e-12));
    CHECK(b.value == Tensor({2}, {0.25, 0.75}));

    // Second step with a new gradient, evaluated by hand.
    const std::vector<double> w1{a.value[0], a.value[1], a.value[2]};
    a.grad = Tensor({3}, {-0.1, 2.0, 0.0});
    fresh.step();
    const std::vector<double> g1{-0.1, 2.0, 0.0};
    for (std::size_t i = 0; i < 3; ++i)
    {
        const double m = 0.9 * 0.1 * g0[i] + 0.1 * g1[i];
        const double v = 0.999 * 0.001 * g0[i] * g0[i] + 0.001 * g1[i] * g1[i];
        const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
        CHECK(a.value[i] == Catch::Approx(w1[i] - 0.01 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-12));
    }

    a.grad[1] = std::nan("");
    const auto before = a.value;
    try
    {
        fresh.step();
        FAIL("expected an error");
    }
    catch (const TrainError &e)
    {
        CHECK(std::string(e.what()).find("'encoder'") != std::string::npos);
    }
    CHECK(a.value == before);
    CHECK(group_of("fusion.block0.wq") == "fusion");
    CHECK(group_of("plain") == "plain");
}

TEST_CASE("global-norm clipping", "[trainer]")
{
    diff::Parameter a("a", Tensor({2}));
    diff::Parameter b("b", Tensor({1}));
    a.grad = Tensor({2}, {6.0, 0.0});
    b.grad = Tensor({1}, {8.0});
    CHECK(clip_grad_norm({&a, &b}, 5.0) == Catch::Approx(10.0));
    CHECK(a.grad[0] == Catch::Approx(3.0));
    CHECK(b.grad[0] == Catch::Approx(4.0));
    CHECK(clip_grad_norm({&a, &b}, 5.0) == Catch::Approx(5.0));
    CHECK(a.grad[0] == Catch::Approx(3.0));
}

TEST_CASE("model config serializes and checks rates", "[trainer]")
{
    auto cfg = ModelConfig::for_profile("desk");
    CHECK(cfg.features() == 48);
    CHECK_NOTHROW(cfg.check_rate(48));
    CHECK_NOTHROW(cfg.check_rate(144));
    CHECK_THROWS_AS(cfg.check_rate(47), TrainError);
    CHECK_THROWS_AS(cfg.check_rate(145), TrainError);
    CHECK(ModelConfig::from_json(cfg.to_json()) == cfg);
    cfg.fusion = cfg.uplink_fusion(FusionPoint::expanded);
    CHECK(ModelConfig::from_json(cfg.to_json()) == cfg);
    CHECK(ModelConfig::for_profile("full").features() == 48);
    CHECK_THROWS(ModelConfig::for_profile("huge"));
    auto j = cfg.to_json();
    j["fusion"]["point"] = "middle";
    CHECK_THROWS_AS(ModelConfig::from_json(j), TrainError);
    j.erase("net");
    CHECK_THROWS_AS(ModelConfig::from_json(j), TrainError);
}

TEST_CASE("bitstream encode/decode equals the batched path", "[trainer]")
{
    const auto &d = small_dataset();
    auto mcfg = ModelConfig::for_profile("desk");
    mcfg.fusion = mcfg.uplink_fusion();
    CsiModel model(mcfg, 4);
    std::vector<const ChannelMatrix *> hs;
    std::vector<sim::SensorGrid> grids;
    for (std::size_t i = 0; i < 3; ++i)
    {
        hs.push_back(&d.samples[i].downlink);
        grids.push_back(model.sensor_of(d.samples[i]));
    }
    model.init_quantizer(encode_features(model, hs));
    std::vector<const sim::SensorGrid *> gp{&grids[0], &grids[1], &grids[2]};
    for (int rate : {48, 76, 144})
    {
        const auto plain = reconstruct(model, hs, rate);
        const auto fused = reconstruct(model, hs, rate, &gp);
        for (std::size_t i = 0; i < hs.size(); ++i)
        {
            const auto s = encode_channel(model, *hs[i], rate);
            CHECK(static_cast<int>(s.bits.size()) == rate);
            const auto back = quant::from_wire(quant::to_wire(s), rate, model.features(), 3);
            CHECK(decode_channel(model, back) == plain[i]);
            CHECK(decode_channel(model, back, &grids[i]) == fused[i]);
        }
    }
    CHECK_THROWS_AS(encode_channel(model, *hs[0], 200), TrainError);
}

TEST_CASE("checkpoints round trip bit-exactly and reject damage", "[trainer]")
{
    auto mcfg = ModelConfig::for_profile("desk");
    mcfg.fusion = mcfg.uplink_fusion();
    CsiModel model(mcfg, 12);
    const auto ck = capture(model, {"encoder", "decoder"}, {{"note", "x"}});
    REQUIRE(ck.groups.size() == 5);
    const auto path = temp_path("ckpt.bin");
    save_checkpoint(path.string(), ck);
    const auto loaded = load_checkpoint(path.string());
    CHECK(loaded == ck);
    CHECK(loaded.group("encoder")->frozen);
    CHECK_FALSE(loaded.group("fusion")->frozen);
    const auto bytes = file_bytes(path);
    const auto path2 = temp_path("ckpt2.bin");
    save_checkpoint(path2.string(), loaded);
    CHECK(file_bytes(path2) == bytes);

    auto rebuilt = load_model(loaded);
    CHECK(capture(*rebuilt, {"encoder", "decoder"}, {{"note", "x"}}) == ck);
    CHECK_FALSE(rebuilt->group("encoder").front()->requires_grad);
    CHECK(rebuilt->group("fusion").front()->requires_grad);

    auto kind_of = [&](const std::vector<std::uint8_t> &b) {
        write_bytes(path2, b);
        try
        {
            load_checkpoint(path2.string());
        }
        catch (const FormatError &e)
        {
            return std::make_pair(e.kind(), std::string(e.what()));
        }
        return std::make_pair(FormatError::Kind::io, std::string("no error"));
    };
    auto bad = bytes;
    bad[6] = 2;
    const auto [vk, vmsg] = kind_of(bad);
    CHECK(vk == FormatError::Kind::unsupported_version);
    CHECK(vmsg.find("unsupported version") != std::string::npos);
    bad = bytes;
    bad[1] = 'X';
    CHECK(kind_of(bad).first == FormatError::Kind::bad_magic);
    bad = bytes;
    bad[bytes.size() / 2] ^= 0x40;
    CHECK(kind_of(bad).first == FormatError::Kind::corrupt);
    bad.assign(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() - 10));
    CHECK(kind_of(bad).first == FormatError::Kind::truncated);
    bad = bytes;
    bad.push_back(1);
    CHECK(kind_of(bad).first == FormatError::Kind::corrupt);

    // A stage-1 checkpoint cannot be restored strictly into a fused model.
    CsiModel plain(ModelConfig::for_profile("desk"), 1);
    const auto ck1 = capture(plain, {});
    CHECK_THROWS_AS(restore(model, ck1), TrainError);
    CHECK_NOTHROW(restore(model, ck1, true));
    CHECK_THROWS_AS(restore(plain, ck), TrainError);

    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("stage-1 training smoke, log and determinism", "[trainer]")
{
    const auto &d = small_dataset();
    const auto log = temp_path("log.csv");
    std::filesystem::remove(log);
    auto cfg = quick_config(1);
    cfg.log_path = log.string();
    const auto a = train_stage1(d, ModelConfig::for_profile("desk"), cfg);
    REQUIRE(a.history.size() == 2);
    for (double v : a.history.back().val_loss)
        CHECK(std::isfinite(v));
    CHECK(a.history[0].train_loss.empty());
    CHECK(a.val_indices.size() == 16);
    CHECK(a.train_indices.size() == 48);

    std::ifstream in(log);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line))
        lines.push_back(line);
    REQUIRE(lines.size() == 1 + 2 * 5);
    CHECK(lines[0] == "epoch,rate,train_loss,val_loss");
    CHECK(lines[1].rfind("0,48,nan,", 0) == 0);
    CHECK(lines[10].rfind("1,144,", 0) == 0);

    cfg.log_path.clear();
    const auto b = train_stage1(d, ModelConfig::for_profile("desk"), cfg);
    CHECK(a.checkpoint == b.checkpoint);
    for (std::size_t e = 0; e < a.history.size(); ++e)
    {
        CHECK(a.history[e].val_loss == b.history[e].val_loss);
        CHECK(a.history[e].train_loss == b.history[e].train_loss);
    }
    std::filesystem::remove(log);
}

TEST_CASE("training rejects invalid configurations", "[trainer]")
{
    const auto &d = small_dataset();
    auto cfg = quick_config(1);
    cfg.gamma = 1.0;
    CHECK_THROWS_AS(train_stage1(d, ModelConfig::for_profile("desk"), cfg), TrainError);
    cfg = quick_config(1);
    cfg.rates = {40};
    CHECK_THROWS_AS(train_stage1(d, ModelConfig::for_profile("desk"), cfg), TrainError);
    cfg = quick_config(1);
    CHECK_THROWS_AS(train_stage1(d, ModelConfig::for_profile("full"), cfg), TrainError);
    auto fused = ModelConfig::for_profile("desk");
    fused.fusion = fused.uplink_fusion();
    CHECK_THROWS_AS(train_stage1(d, fused, cfg), TrainError);
}

TEST_CASE("stage-2 freezes the codec and starts from the stage-1 loss", "[trainer]")
{
    const auto &d = small_dataset();
    const auto s1 = train_stage1(d, ModelConfig::for_profile("desk"), quick_config(1));

    auto cfg = quick_config(0);
    const auto start = train_stage2(d, s1.checkpoint, cfg);
    auto m1 = load_model(s1.checkpoint);
    auto m2 = load_model(start.checkpoint);
    const auto batch = first_samples(d, 32);
    const double l1 = batch_loss(*m1, batch, cfg.rates, cfg.gamma, false);
    const double l2 = batch_loss(*m2, batch, cfg.rates, cfg.gamma, true);
    CHECK(std::abs(l1 - l2) < 1e-6);

    cfg = quick_config(1);
    const auto s2 = train_stage2(d, s1.checkpoint, cfg);
    for (const auto &name : {"encoder", "quantizer", "decoder"})
    {
        REQUIRE(s2.checkpoint.group(name));
        CHECK(s2.checkpoint.group(name)->frozen);
        CHECK(s2.checkpoint.group(name)->hash() == s1.checkpoint.group(name)->hash());
        CHECK(*s2.checkpoint.group(name) == [&] {
            auto g = *s1.checkpoint.group(name);
            g.frozen = true;
            return g;
        }());
    }
    CHECK_FALSE(s2.checkpoint.group("fusion")->frozen);
    CHECK(s2.checkpoint.group("fusion")->hash() != start.checkpoint.group("fusion")->hash());
    for (double v : s2.history.back().val_loss)
        CHECK(std::isfinite(v));

    auto bare = d;
    bare.samples[3].uplink.reset();
    try
    {
        train_stage2(bare, s1.checkpoint, cfg);
        FAIL("expected an error");
    }
    catch (const TrainError &e)
    {
        CHECK(std::string(e.what()).find("missing sensor modality") != std::string::npos);
    }
    CHECK_THROWS_AS(train_stage2(d, s2.checkpoint, cfg), TrainError);
}

TEST_CASE("stage-2 extractor warm start copies the encoder when layouts match", "[trainer]")
{
    const auto &d = small_dataset();
    const auto s1 = train_stage1(d, ModelConfig::for_profile("desk"), quick_config(1));
    const auto base = s1.checkpoint.model_config();

    auto cfg = quick_config(0);
    const auto warm = train_stage2(d, s1.checkpoint, cfg, base.uplink_fusion(FusionPoint::features));
    CHECK(warm.extractor_warm_start);
    CHECK(warm.checkpoint.config.at("training").at("extractor_warm_start").get<bool>());
    auto m = load_model(warm.checkpoint);
    std::map<std::string, const diff::Tensor *> enc;
    for (auto *p : m->group("encoder"))
        enc[p->name.substr(7)] = &p->value;
    const auto ext = m->group("extractor");
    REQUIRE(ext.size() == enc.size());
    for (auto *p : ext)
    {
        auto rest = p->name.substr(9);
        if (rest.rfind(".proj.", 0) == 0) rest = ".bottleneck." + rest.substr(6);
        REQUIRE(enc.count(rest));
        CHECK(*enc[rest] == p->value);
    }

    cfg.warm_start_extractor = false;
    CHECK_FALSE(train_stage2(d, s1.checkpoint, cfg, base.uplink_fusion(FusionPoint::features)).extractor_warm_start);
    cfg.warm_start_extractor = true;
    CHECK_FALSE(train_stage2(d, s1.checkpoint, cfg, base.uplink_fusion(FusionPoint::expanded)).extractor_warm_start);
}
