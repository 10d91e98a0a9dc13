#include "typojack/common.hpp"

namespace typojack {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::empty_prompt: return "empty_prompt";
    case Errc::unrenderable: return "unrenderable";
    case Errc::io_error: return "io_error";
    case Errc::decode_error: return "decode_error";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::remote_unavailable: return "remote_unavailable";
    case Errc::zero_vector: return "zero_vector";
    case Errc::empty_caption_set: return "empty_caption_set";
    case Errc::negative_weight: return "negative_weight";
    case Errc::transport: return "transport";
    case Errc::rate_limited: return "rate_limited";
    case Errc::malformed_response: return "malformed_response";
    case Errc::empty_history: return "empty_history";
    case Errc::out_of_bounds: return "out_of_bounds";
    case Errc::non_finite_loss: return "non_finite_loss";
    case Errc::provider_failure: return "provider_failure";
    case Errc::victim_failure: return "victim_failure";
    case Errc::scorer_failure: return "scorer_failure";
    case Errc::empty_reply: return "empty_reply";
    case Errc::malformed_strategy: return "malformed_strategy";
    case Errc::parse_failure: return "parse_failure";
    case Errc::no_valid_outcomes: return "no_valid_outcomes";
    case Errc::config_error: return "config_error";
    case Errc::provider_unhealthy: return "provider_unhealthy";
  }
  return "unknown";
}

std::uint64_t fnv1a64(const void* data, std::size_t size) noexcept {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::uint64_t fnv1a64(const std::string& text) noexcept {
  return fnv1a64(text.data(), text.size());
}

std::uint64_t mix_bits(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  return mix_bits(mix_bits(a) ^ (b + 0x9e3779b97f4a7c15ull));
}

std::uint64_t derive_seed(std::uint64_t base, const std::string& tag) noexcept {
  return mix_seed(base, fnv1a64(tag));
}

}  // namespace typojack
