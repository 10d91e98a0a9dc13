#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace typojack {

std::string b64_encode(const std::uint8_t* data, std::size_t size);

inline std::string b64_encode(const std::vector<std::uint8_t>& bytes) {
  return b64_encode(bytes.data(), bytes.size());
}

std::vector<std::uint8_t> b64_decode(const std::string& text);

}  // namespace typojack
