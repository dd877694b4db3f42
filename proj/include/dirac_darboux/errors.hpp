#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace dirac_darboux {

enum class ErrorKind {
  numerical_failure,
  singular_matrix,
  invalid_operator,
  invalid_seed,
  singular_seed,
  pole_in_formula,
  not_a_scattering_energy,
  invalid_seed_energy,
  not_reducible,
  invalid_input,
  invalid_parameter,
  degenerate_asymptotics,
  one_sided_scattering,
};

inline const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::numerical_failure: return "numerical-failure";
    case ErrorKind::singular_matrix: return "singular-matrix";
    case ErrorKind::invalid_operator: return "invalid-operator";
    case ErrorKind::invalid_seed: return "invalid-seed";
    case ErrorKind::singular_seed: return "singular-seed";
    case ErrorKind::pole_in_formula: return "pole-in-formula";
    case ErrorKind::not_a_scattering_energy: return "not-a-scattering-energy";
    case ErrorKind::invalid_seed_energy: return "invalid-seed-energy";
    case ErrorKind::not_reducible: return "not-reducible";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::degenerate_asymptotics: return "degenerate-asymptotics";
    case ErrorKind::one_sided_scattering: return "one-sided-scattering";
  }
  return "unknown";
}

/// Library error. `value` carries the offending number when there is one
/// (|det M| for singular matrices, x for singular seeds, leakage norm for
/// non-reducible operators).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::optional<double> value = {})
      : std::runtime_error(std::string(kind_name(kind)) + ": " + message),
        kind_(kind),
        value_(value) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<double> value() const noexcept { return value_; }

 private:
  ErrorKind kind_;
  std::optional<double> value_;
};

// Errors caused by what the caller asked for, as opposed to numerical trouble.
inline bool is_input_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_operator:
    case ErrorKind::invalid_seed:
    case ErrorKind::pole_in_formula:
    case ErrorKind::not_a_scattering_energy:
    case ErrorKind::invalid_seed_energy:
    case ErrorKind::not_reducible:
    case ErrorKind::invalid_input:
    case ErrorKind::invalid_parameter:
    case ErrorKind::one_sided_scattering:
      return true;
    default:
      return false;
  }
}

}  // namespace dirac_darboux
