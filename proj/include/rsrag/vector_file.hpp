#pragma once

// Binary embedding matrix ("EVEC"), little-endian:
//   magic "EVEC" | version u32 = 1 | dtype u8 = 1 (float32) | dim u32 | count u64 | count*dim float32, row-major

#include "rsrag/error.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace rsrag {

inline constexpr std::array<char, 4> kVectorMagic{'E', 'V', 'E', 'C'};
inline constexpr std::uint32_t kVectorFormatVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;
inline constexpr std::size_t kVectorHeaderBytes = 4 + 4 + 1 + 4 + 8;

/// Row-major float matrix as stored in a vector file.
struct VectorMatrix {
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    std::vector<float> data;

    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(data).subspan(i * dim, dim);
    }
};

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const unsigned char* p) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(p[i]) << (8 * i);
    return value;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace detail

inline std::string encode_vector_file(std::uint32_t dim, std::span<const float> values) {
    if (dim == 0) throw Error(ErrorKind::kInvalidArgument, "vector dim must be positive");
    if (values.size() % dim != 0) throw Error(ErrorKind::kInvalidArgument, "value count not a multiple of dim");
    std::string out;
    out.reserve(kVectorHeaderBytes + values.size() * 4);
    out.append(kVectorMagic.data(), kVectorMagic.size());
    detail::put_le<std::uint32_t>(out, kVectorFormatVersion);
    out.push_back(static_cast<char>(kDtypeFloat32));
    detail::put_le<std::uint32_t>(out, dim);
    detail::put_le<std::uint64_t>(out, values.size() / dim);
    for (float v : values) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

inline VectorMatrix decode_vector_file(std::string_view bytes, const std::string& label = "vector file") {
    if (bytes.size() < kVectorHeaderBytes) throw Error(ErrorKind::kMalformedHeader, label + ": truncated header");
    if (std::memcmp(bytes.data(), kVectorMagic.data(), 4) != 0) throw Error(ErrorKind::kBadMagic, label);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const auto version = detail::get_le<std::uint32_t>(p + 4);
    const auto dtype = p[8];
    VectorMatrix m;
    m.dim = detail::get_le<std::uint32_t>(p + 9);
    m.count = detail::get_le<std::uint64_t>(p + 13);
    if (version != kVectorFormatVersion) {
        throw Error(ErrorKind::kMalformedHeader, label + ": unsupported version " + std::to_string(version));
    }
    if (dtype != kDtypeFloat32) {
        throw Error(ErrorKind::kMalformedHeader, label + ": unsupported dtype " + std::to_string(dtype));
    }
    if (m.dim == 0) throw Error(ErrorKind::kMalformedHeader, label + ": dim is zero");
    const std::uint64_t payload = bytes.size() - kVectorHeaderBytes;
    if (m.count > payload / 4 / m.dim || payload != m.count * m.dim * 4) {
        throw Error(ErrorKind::kMalformedHeader, label + ": payload size does not match dim*count");
    }
    m.data.resize(m.count * m.dim);
    const unsigned char* body = p + kVectorHeaderBytes;
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        m.data[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(body + 4 * i));
        if (!std::isfinite(m.data[i])) {
            throw Error(ErrorKind::kMalformedRecord, label + ": non-finite value in row " + std::to_string(i / m.dim));
        }
    }
    return m;
}

inline VectorMatrix read_vector_file(const std::filesystem::path& path) {
    return decode_vector_file(detail::read_file_bytes(path), path.string());
}

inline void write_vector_file(const std::filesystem::path& path, std::uint32_t dim, std::span<const float> values) {
    const std::string bytes = encode_vector_file(dim, values);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace rsrag
