#include "tracersteer/solution.hpp"

#include <string>

namespace tracersteer {

double simpson(const std::vector<double>& samples) {
  const int intervals = static_cast<int>(samples.size()) - 1;
  if (intervals < 16) {
    throw Error(ErrorKind::grid_too_coarse,
                "quadrature needs at least 16 intervals, got " + std::to_string(intervals));
  }
  const double h = 1.0 / intervals;
  const int simpson_end = intervals % 2 == 0 ? intervals : intervals - 3;
  double sum = 0.0;
  for (int i = 0; i < simpson_end; i += 2) {
    sum += samples[i] + 4.0 * samples[i + 1] + samples[i + 2];
  }
  sum *= h / 3.0;
  if (simpson_end != intervals) {
    const int i = simpson_end;
    sum += 3.0 * h / 8.0 *
           (samples[i] + 3.0 * samples[i + 1] + 3.0 * samples[i + 2] + samples[i + 3]);
  }
  return sum;
}

double kinetic_cost(const FlowSolution& solution, const SpdMatrix& sigma0) {
  std::vector<double> integrand(solution.times.size());
  for (std::size_t i = 0; i < integrand.size(); ++i) {
    const Matrix velocity = solution.gain[i] * solution.phi[i];
    integrand[i] = 0.5 * (velocity * sigma0.matrix() * velocity.transpose()).trace();
  }
  return simpson(integrand);
}

double attention_cost(const FlowSolution& solution) {
  std::vector<double> integrand(solution.times.size());
  for (std::size_t i = 0; i < integrand.size(); ++i) {
    integrand[i] = 0.5 * solution.gain[i].squaredNorm();
  }
  return simpson(integrand);
}

}  // namespace tracersteer
