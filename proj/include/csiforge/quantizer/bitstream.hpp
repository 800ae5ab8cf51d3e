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

#pragma once

#include "csiforge/diffcore/tensor.hpp"
#include "csiforge/quantizer/quantizer.hpp"

#include <cstdint>
#include <string>
#include <span>
#include <vector>

namespace csiforge::quant
{

/// Feedback bits s = [s_1 ... s_N], each feature MSB-first.
struct CsiBitstream
{
    std::vector<std::uint8_t> bits;
    BitAllocation allocation;

    bool operator==(const CsiBitstream &) const = default;
};

/// Quantizes and packs one feature vector.
CsiBitstream encode_bitstream(std::span<const double> z, const diff::Tensor &boundaries, const BitAllocation &alloc);

/// Level vectors recovered from the stream, one per feature.
std::vector<LevelVector> unpack_bitstream(const CsiBitstream &stream);

/// Quantized feature vector z(s).
std::vector<double> decode_level_sums(const CsiBitstream &stream);

/// Big-endian bit packing into ceil(B/8) bytes, zero-padded tail.
std::vector<std::uint8_t> to_wire(const CsiBitstream &stream);

/// Parses a wire payload; the allocation is rederived from (B, N, b_max).
CsiBitstream from_wire(std::span<const std::uint8_t> bytes, int total_bits, std::size_t features, int b_max);

inline constexpr std::uint32_t kBitstreamFileVersion = 1;

/// Bitstream file: "CSIB", u32 version, u32 B, u32 N, u8 b_max, u64 count,
/// then count wire payloads of ceil(B/8) bytes. All streams share one allocation.
void save_bitstreams(const std::string &path, const std::vector<CsiBitstream> &streams);
std::vector<CsiBitstream> load_bitstreams(const std::string &path);

} // namespace csiforge::quant
