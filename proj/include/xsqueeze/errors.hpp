// errors.hpp
// Exception types shared by the xsqueeze modules.

#pragma once

#include <array>
#include <charconv>
#include <stdexcept>
#include <string>

namespace xsq {

// Shortest round-trip text for numbers quoted in diagnostics.
inline std::string num_text(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

// Bad truncation size, mismatched dimensions, malformed arguments.
struct invalid_dimension : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct dimension_mismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct parity_violation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Base for every failure that means "the numbers can no longer be trusted".
// The CLI maps this family to exit code 2.
struct numerical_health_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct truncation_error : numerical_health_error {
  using numerical_health_error::numerical_health_error;
};

struct boundary_leak_error : numerical_health_error {
  using numerical_health_error::numerical_health_error;
};

struct tail_leak_error : numerical_health_error {
  using numerical_health_error::numerical_health_error;
};

struct step_size_error : numerical_health_error {
  using numerical_health_error::numerical_health_error;
};

struct basis_conversion_error : numerical_health_error {
  using numerical_health_error::numerical_health_error;
};

// Configuration problems (exit code 1) and file-system problems (exit code 3).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace xsq
