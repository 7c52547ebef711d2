#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace gmmsum::detail {

// window_bits follows zlib: 15 for a zlib stream, 16 + 15 for gzip.
std::string deflate_bytes(std::string_view input, int window_bits, int level = 6);
// Throws ChecksumError on corrupt or truncated input.
std::string inflate_bytes(std::string_view input, int window_bits);

std::uint32_t crc32_of(std::string_view bytes, std::uint32_t crc = 0);

}  // namespace gmmsum::detail
