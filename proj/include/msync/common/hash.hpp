#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include <msync/common/types.hpp>

namespace mxsync {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::string_view data);
std::string sha256_hex(std::string_view data);
std::string hmac_sha256_hex(std::string_view key, std::string_view data);

std::string to_hex(const std::uint8_t* data, std::size_t size);
inline std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }
inline std::string to_hex(const Digest& d) { return to_hex(d.data(), d.size()); }
inline std::string to_hex(std::string_view s) {
    return to_hex(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}
/// Accepts an optional "0x" prefix. Throws Error(invalid_argument) on bad input.
Bytes from_hex(std::string_view hex);

/// Appends a length-prefixed field; used to build unambiguous digest inputs.
void append_field(std::string& out, std::string_view field);

}  // namespace mxsync
