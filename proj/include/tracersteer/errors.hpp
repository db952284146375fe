#pragma once

#include <stdexcept>
#include <string>

namespace tracersteer {

enum class ErrorKind {
  not_spd,
  not_skew,
  non_monotone_grid,
  interpolant_not_spd,
  rank_deficient_tracer,
  out_of_domain,
  singular_inner_matrix,
  flow_degenerate,
  infeasible_surface,
  not_determined,
  no_convergence,
  grid_too_coarse,
  schema_error,
  regime_mismatch,
  unknown_generator,
  file_format,
  check_failed,
};

inline const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries one of the kinds above so
/// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::not_spd: return "NotSpd";
    case ErrorKind::not_skew: return "NotSkew";
    case ErrorKind::non_monotone_grid: return "NonMonotoneGrid";
    case ErrorKind::interpolant_not_spd: return "InterpolantNotSpd";
    case ErrorKind::rank_deficient_tracer: return "RankDeficientTracer";
    case ErrorKind::out_of_domain: return "OutOfDomain";
    case ErrorKind::singular_inner_matrix: return "SingularInnerMatrix";
    case ErrorKind::flow_degenerate: return "FlowDegenerate";
    case ErrorKind::infeasible_surface: return "InfeasibleSurface";
    case ErrorKind::not_determined: return "NotDetermined";
    case ErrorKind::no_convergence: return "NoConvergence";
    case ErrorKind::grid_too_coarse: return "GridTooCoarse";
    case ErrorKind::schema_error: return "SchemaError";
    case ErrorKind::regime_mismatch: return "RegimeMismatch";
    case ErrorKind::unknown_generator: return "UnknownGenerator";
    case ErrorKind::file_format: return "FileFormat";
    case ErrorKind::check_failed: return "CheckFailed";
  }
  return "Unknown";
}

}  // namespace tracersteer
