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

#include "csiforge/quantizer/bitstream.hpp"
#include "csiforge/common/binary_io.hpp"

#include <string>

namespace csiforge::quant
{

CsiBitstream encode_bitstream(std::span<const double> z, const diff::Tensor &boundaries, const BitAllocation &alloc)
{
    const auto k = boundary_count(alloc.b_max);
    if (z.size() != alloc.features() || boundaries.shape() != diff::Shape{alloc.features(), k})
        throw QuantizerError("encode_bitstream: feature/boundary dimensions do not match allocation");
    CsiBitstream s;
    s.allocation = alloc;
    s.bits.reserve(static_cast<std::size_t>(alloc.total()));
    for (std::size_t i = 0; i < z.size(); ++i)
    {
        const auto lv = quantize_levels(z[i], std::span(boundaries.ptr() + i * k, k), alloc.bits[i], alloc.b_max);
        const auto si = pack_bits(lv, alloc.bits[i], alloc.b_max);
        s.bits.insert(s.bits.end(), si.begin(), si.end());
    }
    return s;
}

std::vector<LevelVector> unpack_bitstream(const CsiBitstream &stream)
{
    if (static_cast<int>(stream.bits.size()) != stream.allocation.total())
        throw QuantizerError("unpack_bitstream: stream length " + std::to_string(stream.bits.size()) +
                             " does not match allocation total " + std::to_string(stream.allocation.total()));
    std::vector<LevelVector> out;
    out.reserve(stream.allocation.features());
    std::size_t off = 0;
    for (int b : stream.allocation.bits)
    {
        const auto n = static_cast<std::size_t>(b);
        out.push_back(unpack_bits(std::span(stream.bits).subspan(off, n), stream.allocation.b_max));
        off += n;
    }
    return out;
}

std::vector<double> decode_level_sums(const CsiBitstream &stream)
{
    std::vector<double> z;
    for (const auto &lv : unpack_bitstream(stream))
        z.push_back(level_sum(lv));
    return z;
}

std::vector<std::uint8_t> to_wire(const CsiBitstream &stream)
{
    std::vector<std::uint8_t> bytes((stream.bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < stream.bits.size(); ++i)
        if (stream.bits[i])
            bytes[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    return bytes;
}

CsiBitstream from_wire(std::span<const std::uint8_t> bytes, int total_bits, std::size_t features, int b_max)
{
    CsiBitstream s;
    s.allocation = allocate_bits(total_bits, features, b_max);
    const auto n = static_cast<std::size_t>(total_bits);
    if (bytes.size() != (n + 7) / 8)
        throw QuantizerError("from_wire: expected " + std::to_string((n + 7) / 8) + " bytes, got " +
                             std::to_string(bytes.size()));
    s.bits.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        s.bits[i] = (bytes[i / 8] >> (7 - i % 8)) & 1u;
    return s;
}

void save_bitstreams(const std::string &path, const std::vector<CsiBitstream> &streams)
{
    if (streams.empty())
        throw QuantizerError("save_bitstreams: no streams");
    const auto &alloc = streams.front().allocation;
    BinaryWriter w;
    w.put_bytes("CSIB", 4);
    w.put<std::uint32_t>(kBitstreamFileVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(alloc.total()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(alloc.features()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(alloc.b_max));
    w.put<std::uint64_t>(streams.size());
    for (const auto &s : streams)
    {
        if (!(s.allocation == alloc))
            throw QuantizerError("save_bitstreams: streams differ in bit allocation");
        const auto bytes = to_wire(s);
        w.put_bytes(bytes.data(), bytes.size());
    }
    w.save(path);
}

std::vector<CsiBitstream> load_bitstreams(const std::string &path)
{
    auto r = BinaryReader::from_file(path);
    r.expect_magic("CSIB");
    const auto version = r.get<std::uint32_t>();
    if (version != kBitstreamFileVersion)
        throw FormatError(FormatError::Kind::unsupported_version, path + ": unsupported version " + std::to_string(version));
    const auto total = r.get<std::uint32_t>();
    const auto features = r.get<std::uint32_t>();
    const int b_max = r.get<std::uint8_t>();
    const auto count = r.get<std::uint64_t>();
    if (features == 0 || b_max < 1 || b_max > 8 || total < features || total > features * static_cast<std::uint32_t>(b_max))
        throw FormatError(FormatError::Kind::corrupt, path + ": inconsistent header (B=" + std::to_string(total) +
                                                          ", N=" + std::to_string(features) + ")");
    const std::size_t len = (total + 7) / 8;
    r.checked_size(count, len);
    std::vector<CsiBitstream> out;
    std::vector<std::uint8_t> buf(len);
    for (std::uint64_t i = 0; i < count; ++i)
    {
        r.get_bytes(buf.data(), len);
        out.push_back(from_wire(buf, static_cast<int>(total), features, b_max));
    }
    if (r.remaining() != 0)
        throw FormatError(FormatError::Kind::corrupt, path + ": trailing bytes");
    return out;
}

} // namespace csiforge::quant
