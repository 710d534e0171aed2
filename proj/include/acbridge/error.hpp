#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace acbridge {

enum class ErrorCode {
  invalid_argument,
  singular_network,
  non_invertible_ratio,
  division_by_zero,
  correction_singular,
  zero_impedance,
  invalid_geometry,
  quadrature_grid_mismatch,
  generator_absent,
  not_converged,
  singular_jacobian,
  integration_diverged,
  invalid_config,
  parse_error,
  io_error,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace acbridge
