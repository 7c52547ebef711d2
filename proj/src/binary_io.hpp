#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gmmsum/error.hpp"

namespace gmmsum::detail {

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for " + path.string());
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

template <typename T>
T from_little_endian(const char* p) {
    static_assert(sizeof(T) == 4);
    std::uint32_t raw = 0;
    for (int i = 3; i >= 0; --i) raw = (raw << 8) | static_cast<unsigned char>(p[i]);
    return std::bit_cast<T>(raw);
}

template <typename T>
void append_little_endian(std::string& out, T value) {
    static_assert(sizeof(T) == 4);
    auto raw = std::bit_cast<std::uint32_t>(value);
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>(raw & 0xffu));
        raw >>= 8;
    }
}

template <typename T>
std::vector<T> read_le_array(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() % 4 != 0) throw LengthMismatch(path.string() + ": size is not a multiple of 4 bytes");
    std::vector<T> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = from_little_endian<T>(bytes.data() + 4 * i);
    return out;
}

template <typename T, typename Range>
void write_le_array(const std::filesystem::path& path, const Range& values) {
    std::string bytes;
    bytes.reserve(values.size() * 4);
    for (auto v : values) append_little_endian<T>(bytes, static_cast<T>(v));
    write_file_bytes(path, bytes);
}

}  // namespace gmmsum::detail
