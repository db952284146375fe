#pragma once

#include <string>

#include "tracersteer/paths.hpp"

namespace tracersteer::cli {

struct SpiralParams {
  Matrix y0;
  double rho = 1.0;
  double theta1_deg = 0.0;
};

/// Planar spiral y_t = r(t) R(theta(t)) y0 with r(t) = (1 - t) + t rho,
/// theta(t) = t theta1 and R the clockwise-positive rotation.
TracerPath spiral_tracer_path(const SpiralParams& params);

/// Looks up a generator by name; throws UnknownGenerator.
TracerPath builtin_tracer_generator(const std::string& name, const SpiralParams& params);

}  // namespace tracersteer::cli
