#include "tracersteer/cli/generators.hpp"

#include <cmath>
#include <numbers>

#include "tracersteer/boundary.hpp"
#include "tracersteer/errors.hpp"

namespace tracersteer::cli {

TracerPath spiral_tracer_path(const SpiralParams& params) {
  if (params.y0.rows() != 2 || params.y0.cols() == 0) {
    throw std::invalid_argument("spiral generator needs a 2 x m initial tracer matrix");
  }
  if (!(params.rho > 0.0)) throw std::invalid_argument("spiral radius ratio must be positive");
  const Matrix y0 = params.y0;
  const double rho = params.rho;
  const double theta1 = params.theta1_deg * std::numbers::pi / 180.0;
  return TracerPath::trajectory(2, y0.cols(), [y0, rho, theta1](double t) {
    const double r = (1.0 - t) + t * rho;
    const double theta = t * theta1;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Matrix rot_dot(2, 2);
    rot_dot << -s, c, -c, -s;
    const Matrix rot = clockwise_rotation(theta);
    return TracerSample{r * rot * y0, ((rho - 1.0) * rot + r * theta1 * rot_dot) * y0};
  });
}

TracerPath builtin_tracer_generator(const std::string& name, const SpiralParams& params) {
  if (name == "spiral") return spiral_tracer_path(params);
  throw Error(ErrorKind::unknown_generator, "unknown tracer generator '" + name + "'");
}

}  // namespace tracersteer::cli
