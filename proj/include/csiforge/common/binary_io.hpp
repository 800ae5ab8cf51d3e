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

// Little-endian primitive (de)serialization shared by the file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

static_assert(std::endian::native == std::endian::little, "csiforge file formats assume a little-endian host");

namespace csiforge
{

class FormatError : public std::runtime_error
{
public:
    enum class Kind
    {
        io,
        bad_magic,
        unsupported_version,
        truncated,
        corrupt
    };

    FormatError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class BinaryWriter
{
public:
    template <typename T>
        requires std::is_trivially_copyable_v<T>
    void put(T v)
    {
        const auto *p = reinterpret_cast<const std::uint8_t *>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }

    void put_bytes(const void *data, std::size_t n)
    {
        const auto *p = static_cast<const std::uint8_t *>(data);
        buf_.insert(buf_.end(), p, p + n);
    }

    void put_string(const std::string &s)
    {
        put<std::uint64_t>(s.size());
        put_bytes(s.data(), s.size());
    }

    void put_f64_array(const std::vector<double> &v)
    {
        put<std::uint64_t>(v.size());
        put_bytes(v.data(), v.size() * sizeof(double));
    }

    const std::vector<std::uint8_t> &bytes() const { return buf_; }

    void save(const std::string &path) const
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw FormatError(FormatError::Kind::io, "cannot open '" + path + "' for writing");
        out.write(reinterpret_cast<const char *>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        if (!out)
            throw FormatError(FormatError::Kind::io, "write to '" + path + "' failed");
    }

private:
    std::vector<std::uint8_t> buf_;
};

class BinaryReader
{
public:
    explicit BinaryReader(std::vector<std::uint8_t> data, std::string context = "file")
        : buf_(std::move(data)), context_(std::move(context))
    {
    }

    static BinaryReader from_file(const std::string &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw FormatError(FormatError::Kind::io, "cannot open '" + path + "'");
        std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return BinaryReader(std::move(data), path);
    }

    template <typename T>
        requires std::is_trivially_copyable_v<T>
    T get()
    {
        T v;
        std::memcpy(&v, take(sizeof(T)), sizeof(T));
        return v;
    }

    void get_bytes(void *out, std::size_t n) { std::memcpy(out, take(n), n); }

    std::string get_string()
    {
        const auto n = get<std::uint64_t>();
        std::string s(checked_size(n, 1), '\0');
        get_bytes(s.data(), s.size());
        return s;
    }

    std::vector<double> get_f64_array()
    {
        const auto n = get<std::uint64_t>();
        std::vector<double> v(checked_size(n, sizeof(double)));
        get_bytes(v.data(), v.size() * sizeof(double));
        return v;
    }

    /// Checks a magic prefix; throws bad_magic otherwise.
    void expect_magic(const std::string &magic)
    {
        if (remaining() < magic.size() || std::memcmp(buf_.data() + pos_, magic.data(), magic.size()) != 0)
            throw FormatError(FormatError::Kind::bad_magic, context_ + ": bad magic, expected '" + magic + "'");
        pos_ += magic.size();
    }

    std::size_t remaining() const { return buf_.size() - pos_; }
    std::size_t position() const { return pos_; }
    const std::string &context() const { return context_; }

    /// Element count that fits into the remaining bytes, else truncated.
    std::size_t checked_size(std::uint64_t count, std::size_t elem_bytes) const
    {
        if (elem_bytes != 0 && count > remaining() / elem_bytes)
            throw FormatError(FormatError::Kind::truncated, context_ + ": truncated");
        return static_cast<std::size_t>(count);
    }

private:
    const std::uint8_t *take(std::size_t n)
    {
        if (remaining() < n)
            throw FormatError(FormatError::Kind::truncated, context_ + ": truncated at byte " + std::to_string(pos_));
        const auto *p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }

    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
    std::string context_;
};

} // namespace csiforge
