#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace typojack {

/// Categorized failure reasons. Every error thrown by the library carries one
/// of these so callers (and the C API) can branch without string matching.
enum class Errc {
  invalid_argument,
  empty_prompt,
  unrenderable,
  io_error,
  decode_error,
  dimension_mismatch,
  remote_unavailable,
  zero_vector,
  empty_caption_set,
  negative_weight,
  transport,
  rate_limited,
  malformed_response,
  empty_history,
  out_of_bounds,
  non_finite_loss,
  provider_failure,
  victim_failure,
  scorer_failure,
  empty_reply,
  malformed_strategy,
  parse_failure,
  no_valid_outcomes,
  config_error,
  provider_unhealthy,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

const char* errc_name(Errc code) noexcept;

// FNV-1a, 64-bit. Used for content hashes and seed derivation; stability of
// the exact bit pattern matters for reproducible runs.
std::uint64_t fnv1a64(const void* data, std::size_t size) noexcept;
std::uint64_t fnv1a64(const std::string& text) noexcept;

// splitmix64 finalizer; decorrelates composed seeds.
std::uint64_t mix_bits(std::uint64_t x) noexcept;

// Deterministic seed composition: mix_seed(a, b) != mix_seed(b, a) in general.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;
std::uint64_t derive_seed(std::uint64_t base, const std::string& tag) noexcept;

}  // namespace typojack
