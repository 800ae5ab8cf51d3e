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

#include "csiforge/trainer/checkpoint.hpp"
#include "csiforge/trainer/loss.hpp"
#include "csiforge/trainer/optim.hpp"

#include <cstring>
#include <map>

namespace csiforge::train
{

namespace
{

struct Fnv
{
    std::uint64_t h = 14695981039346656037ull;
    void add(const void *p, std::size_t n)
    {
        const auto *b = static_cast<const std::uint8_t *>(p);
        for (std::size_t i = 0; i < n; ++i)
        {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    }
    template <class T> void add(T v) { add(&v, sizeof v); }
};

FormatError corrupt(const std::string &ctx, const std::string &what)
{
    return FormatError(FormatError::Kind::corrupt, ctx + ": " + what);
}

} // namespace

std::uint64_t GroupRecord::hash() const
{
    Fnv f;
    for (const auto &t : tensors)
    {
        f.add(t.name.data(), t.name.size());
        f.add<std::uint64_t>(t.shape.size());
        for (auto d : t.shape)
            f.add<std::uint64_t>(d);
        f.add(t.data.data(), t.data.size() * sizeof(float));
    }
    return f.h;
}

const GroupRecord *Checkpoint::group(const std::string &name) const
{
    for (const auto &g : groups)
        if (g.name == name)
            return &g;
    return nullptr;
}

Checkpoint capture(const CsiModel &model, const std::set<std::string> &frozen, nlohmann::json training)
{
    Checkpoint c;
    c.config = {{"model", model.config().to_json()}, {"training", std::move(training)}};
    for (const auto &name : CsiModel::group_names())
    {
        GroupRecord g;
        g.name = name;
        g.frozen = frozen.count(name) > 0;
        for (const auto *p : model.group(name))
        {
            TensorRecord t{p->name, p->value.shape(), {}};
            t.data.reserve(p->value.size());
            for (double v : p->value.data())
                t.data.push_back(static_cast<float>(v));
            g.tensors.push_back(std::move(t));
        }
        if (!g.tensors.empty())
            c.groups.push_back(std::move(g));
    }
    return c;
}

void restore(CsiModel &model, const Checkpoint &ckpt, bool allow_missing)
{
    std::map<std::string, diff::Parameter *> by_name;
    for (auto *p : model.parameters())
        by_name[p->name] = p;
    std::size_t seen = 0;
    for (const auto &g : ckpt.groups)
        for (const auto &t : g.tensors)
        {
            auto it = by_name.find(t.name);
            if (it == by_name.end())
                throw TrainError("checkpoint tensor '" + t.name + "' has no counterpart in the model");
            auto &p = *it->second;
            if (p.value.shape() != t.shape || t.data.size() != p.value.size())
                throw TrainError("checkpoint tensor '" + t.name + "' has shape " + diff::to_string(t.shape) +
                                 ", model expects " + diff::to_string(p.value.shape()));
            for (std::size_t i = 0; i < t.data.size(); ++i)
                p.value[i] = t.data[i];
            ++seen;
        }
    if (!allow_missing && seen != by_name.size())
        throw TrainError("checkpoint covers " + std::to_string(seen) + " of " + std::to_string(by_name.size()) +
                         " model tensors");
}

std::unique_ptr<CsiModel> load_model(const Checkpoint &ckpt)
{
    auto m = std::make_unique<CsiModel>(ckpt.model_config(), 0);
    restore(*m, ckpt);
    for (const auto &g : ckpt.groups)
        m->set_group_trainable(g.name, !g.frozen);
    return m;
}

void serialize_checkpoint(BinaryWriter &w, const Checkpoint &ckpt)
{
    w.put_bytes("CSFKPT", 6);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.groups.size()));
    for (const auto &g : ckpt.groups)
    {
        w.put_string(g.name);
        w.put<std::uint8_t>(g.frozen ? 1 : 0);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(g.tensors.size()));
        for (const auto &t : g.tensors)
        {
            w.put_string(t.name);
            w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
            for (auto d : t.shape)
                w.put<std::uint64_t>(d);
            w.put<std::uint64_t>(t.data.size());
            w.put_bytes(t.data.data(), t.data.size() * sizeof(float));
        }
        w.put<std::uint64_t>(g.hash());
    }
    w.put_string(ckpt.config.dump());
}

Checkpoint deserialize_checkpoint(BinaryReader &r)
{
    const auto &ctx = r.context();
    r.expect_magic("CSFKPT");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw FormatError(FormatError::Kind::unsupported_version,
                          ctx + ": unsupported version " + std::to_string(version));
    Checkpoint c;
    const auto ng = r.get<std::uint32_t>();
    for (std::uint32_t gi = 0; gi < ng; ++gi)
    {
        GroupRecord g;
        g.name = r.get_string();
        const auto fl = r.get<std::uint8_t>();
        if (fl > 1)
            throw corrupt(ctx, "bad frozen flag in group '" + g.name + "'");
        g.frozen = fl == 1;
        const auto nt = r.get<std::uint32_t>();
        for (std::uint32_t ti = 0; ti < nt; ++ti)
        {
            TensorRecord t;
            t.name = r.get_string();
            const auto rank = r.get<std::uint32_t>();
            if (rank > 8)
                throw corrupt(ctx, "implausible rank for '" + t.name + "'");
            for (std::uint32_t k = 0; k < rank; ++k)
                t.shape.push_back(r.get<std::uint64_t>());
            const auto count = r.get<std::uint64_t>();
            if (count != diff::numel(t.shape))
                throw corrupt(ctx, "element count does not match shape of '" + t.name + "'");
            t.data.resize(r.checked_size(count, sizeof(float)));
            r.get_bytes(t.data.data(), count * sizeof(float));
            g.tensors.push_back(std::move(t));
        }
        const auto stored = r.get<std::uint64_t>();
        if (stored != g.hash())
            throw corrupt(ctx, "content hash mismatch in group '" + g.name + "'");
        c.groups.push_back(std::move(g));
    }
    const auto blob = r.get_string();
    try
    {
        c.config = nlohmann::json::parse(blob);
    }
    catch (const nlohmann::json::exception &e)
    {
        throw corrupt(ctx, std::string("config blob: ") + e.what());
    }
    if (r.remaining() != 0)
        throw corrupt(ctx, "trailing bytes");
    return c;
}

void save_checkpoint(const std::string &path, const Checkpoint &ckpt)
{
    BinaryWriter w;
    serialize_checkpoint(w, ckpt);
    w.save(path);
}

Checkpoint load_checkpoint(const std::string &path)
{
    auto r = BinaryReader::from_file(path);
    return deserialize_checkpoint(r);
}

} // namespace csiforge::train
