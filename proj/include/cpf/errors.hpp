#pragma once

#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>

namespace cpf {

enum class SolverFailure { newton_diverged, positivity_lost, non_finite, constraint_infeasible };

/// %.6g, for messages.
inline std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline const char* to_string(SolverFailure f) {
  switch (f) {
    case SolverFailure::newton_diverged: return "NewtonDiverged";
    case SolverFailure::positivity_lost: return "PositivityLost";
    case SolverFailure::non_finite: return "NonFinite";
    case SolverFailure::constraint_infeasible: return "ConstraintInfeasible";
  }
  return "Unknown";
}

/// Failure of a nonlinear solve or a step; carries the simulated time when known.
class SolverError : public std::runtime_error {
 public:
  SolverError(SolverFailure kind, const std::string& what, std::optional<double> time = std::nullopt)
      : std::runtime_error(compose(kind, what, time)), kind_(kind), detail_(what), time_(time) {}

  SolverFailure kind() const { return kind_; }
  std::optional<double> time() const { return time_; }

  SolverError at_time(double t) const { return SolverError(kind_, detail_, t); }

 private:
  static std::string compose(SolverFailure kind, const std::string& what, std::optional<double> time) {
    std::string s = std::string(to_string(kind)) + ": " + what;
    if (time) s += " (t = " + brief(*time) + ")";
    return s;
  }

  SolverFailure kind_;
  std::string detail_;
  std::optional<double> time_;
};

/// Malformed or inconsistent configuration; message carries line/field context.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cpf
