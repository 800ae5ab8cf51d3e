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

#include "csiforge/evalcli/cli.hpp"
#include "csiforge/common/seed.hpp"
#include "csiforge/evalcli/sweep.hpp"
#include "csiforge/trainer/train.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace csiforge::eval
{

namespace
{

std::string default_out(const std::string &name)
{
    const char *dir = std::getenv(kOutDirEnv);
    if (!dir || !*dir)
        return name;
    return (std::filesystem::path(dir) / name).string();
}

class UsageError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Expands `--config FILE` into `--key=value` tokens placed right after the
/// subcommand, so that flags given on the command line take precedence.
std::vector<std::string> expand_config(const std::vector<std::string> &args)
{
    std::vector<std::string> rest, extra;
    for (std::size_t i = 0; i < args.size(); ++i)
    {
        std::string file;
        if (args[i] == "--config")
        {
            if (i + 1 >= args.size())
                throw UsageError("--config needs a file argument");
            file = args[++i];
        }
        else if (args[i].rfind("--config=", 0) == 0)
            file = args[i].substr(9);
        else
        {
            rest.push_back(args[i]);
            continue;
        }
        std::ifstream in(file);
        if (!in)
            throw FormatError(FormatError::Kind::io, "cannot open config file '" + file + "'");
        std::string line;
        for (std::size_t ln = 1; std::getline(in, line); ++ln)
        {
            const auto b = line.find_first_not_of(" \t\r");
            if (b == std::string::npos || line[b] == '#')
                continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw UsageError(file + ":" + std::to_string(ln) + ": expected key=value");
            auto trim = [](std::string s) {
                const auto x = s.find_first_not_of(" \t\r"), y = s.find_last_not_of(" \t\r");
                return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
            };
            extra.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
        }
    }
    if (rest.empty() || extra.empty())
        return rest;
    static const std::vector<std::string> commands{"gen-data", "train", "finetune", "encode",
                                                   "decode",   "eval",  "sweep"};
    auto at = std::find_if(rest.begin(), rest.end(), [](const std::string &a) {
        return std::find(commands.begin(), commands.end(), a) != commands.end();
    });
    if (at == rest.end())
        throw UsageError("--config needs a subcommand");
    rest.insert(at + 1, extra.begin(), extra.end());
    return rest;
}

sim::Dataset load_data(const std::string &path) { return sim::read_dataset(path); }

struct TrainFlags
{
    std::string data, out, log, rates = "48,72,96,120,144";
    std::size_t epochs = 100, batch = 32;
    double lr = 1e-3, gamma = std::exp2(1.0 / 96.0), val_fraction = 0.1, input_snr = sim::kPerfectCsi;
};

void add_train_flags(CLI::App *c, TrainFlags &f)
{
    c->add_option("--data", f.data, "Dataset file")->required();
    c->add_option("--out", f.out, "Checkpoint to write");
    c->add_option("--epochs", f.epochs, "Training epochs");
    c->add_option("--batch", f.batch, "Batch size");
    c->add_option("--lr", f.lr, "Adam learning rate");
    c->add_option("--gamma", f.gamma, "Rate weighting base (> 1)");
    c->add_option("--rates", f.rates, "Target rates: list a,b,c or range start:stop:step");
    c->add_option("--val-fraction", f.val_fraction, "Validation share of the dataset");
    c->add_option("--input-snr", f.input_snr, "Corrupt training inputs to this SNR in dB");
    c->add_option("--log", f.log, "Append per-epoch losses to this CSV");
}

train::TrainConfig to_train_config(const TrainFlags &f, std::uint64_t seed, const std::string &stage,
                                   std::ostream &err)
{
    train::TrainConfig c;
    c.rates = parse_rates(f.rates);
    c.epochs = f.epochs;
    c.batch_size = f.batch;
    c.lr = f.lr;
    c.gamma = f.gamma;
    c.val_fraction = f.val_fraction;
    c.input_snr_db = f.input_snr;
    c.seed = seed;
    c.stage = stage;
    c.log_path = f.log;
    c.on_epoch = [&err](const train::EpochRecord &r) {
        err << "epoch " << r.epoch << ": val " << r.val_weighted << " (" << r.seconds << " s)\n";
    };
    return c;
}

} // namespace

int run_cli(const std::vector<std::string> &raw_args, std::ostream &out, std::ostream &err)
{
    CLI::App app{"Variable-rate CSI feedback codec: data generation, training, coding and evaluation", "csiforge"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");
    std::uint64_t seed = 1;
    std::string config_file; // consumed by expand_config before parsing
    app.add_option("--seed", seed, "Random seed")->configurable(false);

    auto with_seed = [&](CLI::App *c) {
        c->add_option("--seed", seed, "Random seed");
        c->add_option("--config", config_file, "key=value file with defaults for this subcommand's flags");
        return c;
    };

    // gen-data
    std::string g_profile = "desk", g_out;
    std::size_t g_samples = 0;
    bool g_uplink = false;
    double g_uplink_snr = 10.0, g_los = 0.5;
    auto *gen = with_seed(app.add_subcommand("gen-data", "Generate a synthetic channel dataset"));
    gen->add_option("--profile", g_profile, "Channel profile (desk | full)");
    gen->add_option("--samples", g_samples, "Number of records")->required();
    gen->add_option("--out", g_out, "Dataset file to write");
    gen->add_flag("--uplink", g_uplink, "Also store the paired uplink estimate");
    gen->add_option("--uplink-snr", g_uplink_snr, "Uplink estimate SNR in dB");
    gen->add_option("--los-p", g_los, "Probability of a line-of-sight path");

    // train / finetune
    TrainFlags tf;
    std::string t_profile = "desk";
    auto *trn = with_seed(app.add_subcommand("train", "Stage 1: train the wireless-only codec"));
    add_train_flags(trn, tf);
    trn->add_option("--profile", t_profile, "Network profile (desk | full)");

    TrainFlags ff;
    std::string f_stage1, f_point = "features";
    auto *fin = with_seed(app.add_subcommand("finetune", "Stage 2: train sensor fusion on a frozen codec"));
    add_train_flags(fin, ff);
    fin->add_option("--stage1", f_stage1, "Stage-1 checkpoint")->required();
    fin->add_option("--fusion-point", f_point, "features | expanded");

    // encode / decode
    std::string e_ckpt, e_data, e_out;
    int e_rate = 0;
    double e_snr = sim::kPerfectCsi;
    auto *enc = with_seed(app.add_subcommand("encode", "Write feedback bitstreams for every channel of a dataset"));
    enc->add_option("--checkpoint", e_ckpt, "Model checkpoint")->required();
    enc->add_option("--data", e_data, "Dataset file")->required();
    enc->add_option("--rate", e_rate, "Feedback length in bits")->required();
    enc->add_option("--snr", e_snr, "Estimate SNR in dB applied before encoding");
    enc->add_option("--out", e_out, "Bitstream file to write");

    std::string d_ckpt, d_bits, d_sensors, d_out;
    auto *dec = with_seed(app.add_subcommand("decode", "Reconstruct channels from a bitstream file"));
    dec->add_option("--checkpoint", d_ckpt, "Model checkpoint")->required();
    dec->add_option("--bits", d_bits, "Bitstream file")->required();
    dec->add_option("--sensors", d_sensors, "Dataset supplying sensor data (fused decoding)");
    dec->add_option("--out", d_out, "Reconstructed-channel dataset file to write");

    // eval / sweep
    std::string v_ckpt, v_data, v_rates, v_snrs = "inf", v_modes = "csi_only", v_out;
    double v_link = 10.0;
    auto *evl = with_seed(app.add_subcommand("eval", "Metrics at one or more rates"));
    evl->add_option("--checkpoint", v_ckpt, "Model checkpoint")->required();
    evl->add_option("--data", v_data, "Dataset file")->required();
    evl->add_option("--rate", v_rates, "Rate (or list/range)")->required();
    evl->add_option("--snr", v_snrs, "Estimate SNRs in dB, comma separated (inf = perfect)");
    evl->add_option("--mode", v_modes, "csi_only and/or fused, comma separated");
    evl->add_option("--link-snr", v_link, "Transmit SNR for throughput, dB");
    evl->add_option("--out", v_out, "Optional CSV report");

    std::string s_ckpt, s_data, s_rates = "48:144:8", s_snrs = "inf", s_modes = "csi_only", s_out;
    double s_link = 10.0;
    auto *swp = with_seed(app.add_subcommand("sweep", "Rate x SNR x mode sweep to CSV"));
    swp->add_option("--checkpoint", s_ckpt, "Model checkpoint")->required();
    swp->add_option("--data", s_data, "Dataset file")->required();
    swp->add_option("--rates", s_rates, "Rates: list a,b,c or range start:stop:step");
    swp->add_option("--snrs", s_snrs, "Estimate SNRs in dB, comma separated (inf = perfect)");
    swp->add_option("--modes", s_modes, "csi_only and/or fused, comma separated");
    swp->add_option("--link-snr", s_link, "Transmit SNR for throughput, dB");
    swp->add_option("--out", s_out, "CSV report");

    try
    {
        auto args = expand_config(raw_args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    }
    catch (const CLI::CallForHelp &)
    {
        out << app.help();
        return 0;
    }
    catch (const CLI::CallForAllHelp &)
    {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    }
    catch (const CLI::ParseError &e)
    {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }
    catch (const UsageError &e)
    {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    catch (const std::exception &e)
    {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    auto parse_modes = [](const std::string &s) {
        std::vector<Mode> m;
        std::stringstream ss(s);
        for (std::string t; std::getline(ss, t, ',');)
            m.push_back(parse_mode(t));
        return m;
    };

    try
    {
        if (*gen)
        {
            sim::GenOptions o;
            o.count = g_samples;
            o.seed = seed;
            o.los_probability = g_los;
            o.with_uplink = g_uplink;
            o.uplink_snr_db = g_uplink_snr;
            const auto path = g_out.empty() ? default_out("dataset.bin") : g_out;
            sim::write_dataset(path, sim::generate_dataset(sim::SimConfig::profile(g_profile), o));
            out << "wrote " << g_samples << " records to " << path << "\n";
        }
        else if (*trn)
        {
            const auto data = load_data(tf.data);
            const auto res = train::train_stage1(data, train::ModelConfig::for_profile(t_profile),
                                                 to_train_config(tf, seed, "stage1", err));
            const auto path = tf.out.empty() ? default_out("stage1.ckpt") : tf.out;
            train::save_checkpoint(path, res.checkpoint);
            out << "best epoch " << res.best_epoch << ", validation loss "
                << res.history[res.best_epoch].val_weighted << "; wrote " << path << "\n";
        }
        else if (*fin)
        {
            const auto data = load_data(ff.data);
            const auto s1 = train::load_checkpoint(f_stage1);
            if (f_point != "features" && f_point != "expanded")
                throw EvalError("--fusion-point must be features or expanded");
            const auto fcfg = s1.model_config().uplink_fusion(f_point == "features" ? train::FusionPoint::features
                                                                                    : train::FusionPoint::expanded);
            const auto res = train::train_stage2(data, s1, to_train_config(ff, seed, "stage2", err), fcfg);
            const auto path = ff.out.empty() ? default_out("stage2.ckpt") : ff.out;
            train::save_checkpoint(path, res.checkpoint);
            out << "best epoch " << res.best_epoch << ", validation loss "
                << res.history[res.best_epoch].val_weighted << "; wrote " << path << "\n";
        }
        else if (*enc)
        {
            const auto model = train::load_model(train::load_checkpoint(e_ckpt));
            const auto data = load_data(e_data);
            if (!(data.config == model->config().sim))
                throw EvalError("dataset channel configuration does not match the checkpoint");
            std::vector<quant::CsiBitstream> streams;
            for (std::size_t i = 0; i < data.samples.size(); ++i)
            {
                const auto &h = data.samples[i].downlink;
                streams.push_back(train::encode_channel(
                    *model, std::isinf(e_snr) ? h : sim::corrupt_estimate(h, e_snr, derive_seed(seed, i)), e_rate));
            }
            const auto path = e_out.empty() ? default_out("feedback.csib") : e_out;
            quant::save_bitstreams(path, streams);
            out << "wrote " << streams.size() << " x " << e_rate << " bits to " << path << "\n";
        }
        else if (*dec)
        {
            const auto model = train::load_model(train::load_checkpoint(d_ckpt));
            const auto streams = quant::load_bitstreams(d_bits);
            std::optional<sim::Dataset> sensors;
            if (!d_sensors.empty())
            {
                sensors = load_data(d_sensors);
                if (sensors->samples.size() != streams.size())
                    throw EvalError("sensor dataset has " + std::to_string(sensors->samples.size()) +
                                    " records for " + std::to_string(streams.size()) + " bitstreams");
            }
            sim::Dataset outd;
            outd.config = model->config().sim;
            for (std::size_t i = 0; i < streams.size(); ++i)
            {
                sim::Sample s;
                if (sensors)
                {
                    const auto grid = model->sensor_of(sensors->samples[i]);
                    s.downlink = train::decode_channel(*model, streams[i], &grid);
                }
                else
                    s.downlink = train::decode_channel(*model, streams[i]);
                outd.samples.push_back(std::move(s));
            }
            const auto path = d_out.empty() ? default_out("reconstructed.bin") : d_out;
            sim::write_dataset(path, outd);
            out << "wrote " << outd.samples.size() << " reconstructed channels to " << path << "\n";
        }
        else if (*evl || *swp)
        {
            const bool is_eval = static_cast<bool>(*evl);
            SweepOptions o;
            o.rates = parse_rates(is_eval ? v_rates : s_rates);
            o.snrs = parse_snrs(is_eval ? v_snrs : s_snrs);
            o.modes = parse_modes(is_eval ? v_modes : s_modes);
            o.link_snr_db = is_eval ? v_link : s_link;
            o.seed = seed;
            const auto ck = train::load_checkpoint(is_eval ? v_ckpt : s_ckpt);
            const auto rep = rate_sweep(ck, load_data(is_eval ? v_data : s_data), o);
            auto path = is_eval ? v_out : s_out;
            if (!is_eval && path.empty())
                path = default_out("sweep.csv");
            if (is_eval)
            {
                out.precision(6);
                for (const auto &r : rep.rows)
                    out << "rate=" << r.rate << " snr=" << r.snr_db << " mode=" << to_string(r.mode)
                        << " loss=" << r.mean_loss << " loss_db=" << r.loss_db << " cosine=" << r.cosine_mean
                        << " gain=" << r.normalized_gain << " throughput=" << r.throughput << "\n";
                out << "baseline ideal gain=" << rep.baseline.ideal_gain
                    << " random gain=" << rep.baseline.random_gain << "\n";
            }
            if (!path.empty())
            {
                std::ofstream f(path);
                if (!f)
                    throw FormatError(FormatError::Kind::io, "cannot open '" + path + "' for writing");
                rep.write_csv(f);
                std::ofstream b(path + ".baselines.csv");
                rep.write_baselines_csv(b);
                out << "wrote " << rep.rows.size() << " rows to " << path << "\n";
            }
        }
        return 0;
    }
    catch (const std::exception &e)
    {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace csiforge::eval
