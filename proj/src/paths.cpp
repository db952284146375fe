#include "tracersteer/paths.hpp"

#include <algorithm>
#include <string>
#include <variant>

namespace tracersteer {
namespace {

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw Error(ErrorKind::out_of_domain, "time " + std::to_string(t) + " outside [0, 1]");
  }
}

// Entrywise cubic Hermite interpolation. Node slopes come from the derivative
// of the Lagrange polynomial through (up to) the five nearest nodes, which is
// fourth-order accurate on smooth data and needs no global solve.
class HermiteTable {
 public:
  HermiteTable(std::vector<double> times, std::vector<Matrix> values)
      : times_(std::move(times)), values_(std::move(values)) {
    const std::size_t count = times_.size();
    if (count < 2) throw Error(ErrorKind::non_monotone_grid, "need at least two nodes");
    if (times_.front() != 0.0 || times_.back() != 1.0) {
      throw Error(ErrorKind::non_monotone_grid, "nodes must start at t = 0 and end at t = 1");
    }
    for (std::size_t i = 1; i < count; ++i) {
      if (!(times_[i] > times_[i - 1])) {
        throw Error(ErrorKind::non_monotone_grid,
                    "node times not strictly increasing at index " + std::to_string(i));
      }
      if (values_[i].rows() != values_[0].rows() || values_[i].cols() != values_[0].cols()) {
        throw std::invalid_argument("sample nodes have inconsistent shapes");
      }
    }
    slopes_.reserve(count);
    const std::size_t width = std::min<std::size_t>(5, count);
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t lo = i >= width / 2 ? i - width / 2 : 0;
      lo = std::min(lo, count - width);
      slopes_.push_back(lagrange_slope(i, lo, lo + width));
    }
  }

  std::pair<Matrix, Matrix> evaluate(double t) const {
    check_time(t);
    const auto upper = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t i = static_cast<std::size_t>(upper - times_.begin());
    i = std::clamp<std::size_t>(i, 1, times_.size() - 1) - 1;
    const double h = times_[i + 1] - times_[i];
    const double s = (t - times_[i]) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    const double d00 = (6 * s2 - 6 * s) / h;
    const double d10 = 3 * s2 - 4 * s + 1;
    const double d01 = (-6 * s2 + 6 * s) / h;
    const double d11 = 3 * s2 - 2 * s;
    Matrix value;
    if (s == 0.0) {
      value = values_[i];
    } else if (s == 1.0) {
      value = values_[i + 1];
    } else {
      value = h00 * values_[i] + (h10 * h) * slopes_[i] + h01 * values_[i + 1] +
              (h11 * h) * slopes_[i + 1];
    }
    Matrix derivative =
        d00 * values_[i] + d10 * slopes_[i] + d01 * values_[i + 1] + d11 * slopes_[i + 1];
    return {std::move(value), std::move(derivative)};
  }

  const Matrix& first() const { return values_.front(); }
  const Matrix& last() const { return values_.back(); }

 private:
  Matrix lagrange_slope(std::size_t i, std::size_t lo, std::size_t hi) const {
    Matrix slope = Matrix::Zero(values_[i].rows(), values_[i].cols());
    const double xi = times_[i];
    for (std::size_t j = lo; j < hi; ++j) {
      double weight = 0.0;
      if (j == i) {
        for (std::size_t k = lo; k < hi; ++k) {
          if (k != i) weight += 1.0 / (xi - times_[k]);
        }
      } else {
        double num = 1.0;
        double den = 1.0;
        for (std::size_t k = lo; k < hi; ++k) {
          if (k == j) continue;
          den *= times_[j] - times_[k];
          if (k != i) num *= xi - times_[k];
        }
        weight = num / den;
      }
      slope += weight * values_[j];
    }
    return slope;
  }

  std::vector<double> times_;
  std::vector<Matrix> values_;
  std::vector<Matrix> slopes_;
};

struct McCannData {
  SpdMatrix sigma0;
  SpdMatrix sigma1;
  Matrix map;
};

struct SampledCovariance {
  SpdMatrix sigma0;
  SpdMatrix sigma1;
  HermiteTable table;
};

struct CovarianceEndpoints {
  SpdMatrix sigma0;
  SpdMatrix sigma1;
};

struct AnalyticTracer {
  Eigen::Index n;
  Eigen::Index m;
  TracerPath::Generator generator;
};

struct SampledTracer {
  HermiteTable table;
};

struct TracerEndpoints {
  Matrix y0;
  Matrix y1;
};

}  // namespace

struct CovariancePath::Impl {
  std::variant<McCannData, SampledCovariance, CovarianceEndpoints> data;
};

struct TracerPath::Impl {
  std::variant<AnalyticTracer, SampledTracer, TracerEndpoints> data;
};

void require_full_column_rank(const Matrix& y, const char* context) {
  if (y.cols() == 0) return;
  if (y.cols() > y.rows() || !(singular_value_ratio(y) > kTracerRankTol)) {
    throw Error(ErrorKind::rank_deficient_tracer, std::string(context) +
                                                      ": tracer matrix lacks full column rank");
  }
}

// ---------------------------------------------------------------------------
// Covariance paths

Matrix bures_map(const SpdMatrix& sigma0, const SpdMatrix& sigma1) {
  if (sigma0.size() != sigma1.size()) throw std::invalid_argument("bures_map: size mismatch");
  const Matrix root0 = sigma0.sqrt();
  const Matrix inv_root0 = sigma0.inverse_sqrt();
  const SpdMatrix middle(root0 * sigma1.matrix() * root0);
  Matrix map = inv_root0 * middle.sqrt() * inv_root0;
  return 0.5 * (map + map.transpose());
}

double bures_distance_squared(const SpdMatrix& sigma0, const SpdMatrix& sigma1) {
  const Matrix root0 = sigma0.sqrt();
  const SpdMatrix middle(root0 * sigma1.matrix() * root0);
  return (sigma0.matrix() + sigma1.matrix() - 2.0 * middle.sqrt()).trace();
}

CovariancePath mccann_path(const SpdMatrix& sigma0, const SpdMatrix& sigma1) {
  Matrix map = bures_map(sigma0, sigma1);
  return CovariancePath(std::make_shared<const CovariancePath::Impl>(
      CovariancePath::Impl{McCannData{sigma0, sigma1, std::move(map)}}));
}

CovariancePath sampled_covariance_path(const std::vector<CovarianceNode>& nodes) {
  if (nodes.empty()) throw Error(ErrorKind::non_monotone_grid, "no covariance nodes");
  std::vector<double> times;
  std::vector<Matrix> values;
  for (const auto& node : nodes) {
    if (node.sigma.size() != nodes.front().sigma.size()) {
      throw std::invalid_argument("covariance nodes have inconsistent sizes");
    }
    times.push_back(node.t);
    values.push_back(node.sigma.matrix());
  }
  HermiteTable table(std::move(times), std::move(values));
  return CovariancePath(std::make_shared<const CovariancePath::Impl>(CovariancePath::Impl{
      SampledCovariance{nodes.front().sigma, nodes.back().sigma, std::move(table)}}));
}

CovariancePath CovariancePath::endpoints_only(const SpdMatrix& sigma0, const SpdMatrix& sigma1) {
  if (sigma0.size() != sigma1.size()) throw std::invalid_argument("endpoint size mismatch");
  return CovariancePath(
      std::make_shared<const Impl>(Impl{CovarianceEndpoints{sigma0, sigma1}}));
}

CovariancePathKind CovariancePath::kind() const {
  switch (impl_->data.index()) {
    case 0: return CovariancePathKind::mccann;
    case 1: return CovariancePathKind::sampled;
    default: return CovariancePathKind::endpoints_only;
  }
}

Eigen::Index CovariancePath::dim() const { return start().size(); }

const SpdMatrix& CovariancePath::start() const {
  return std::visit([](const auto& d) -> const SpdMatrix& { return d.sigma0; }, impl_->data);
}

const SpdMatrix& CovariancePath::end() const {
  return std::visit([](const auto& d) -> const SpdMatrix& { return d.sigma1; }, impl_->data);
}

CovarianceSample CovariancePath::evaluate(double t) const {
  check_time(t);
  if (const auto* m = std::get_if<McCannData>(&impl_->data)) {
    const Eigen::Index n = m->sigma0.size();
    const Matrix a = (1.0 - t) * Matrix::Identity(n, n) + t * m->map;
    const Matrix a_dot = m->map - Matrix::Identity(n, n);
    const Matrix& s0 = m->sigma0.matrix();
    Matrix sigma_dot = a_dot * s0 * a.transpose();
    sigma_dot += sigma_dot.transpose().eval();
    if (t == 0.0) return {m->sigma0, std::move(sigma_dot)};
    if (t == 1.0) return {m->sigma1, std::move(sigma_dot)};
    return {SpdMatrix(a * s0 * a.transpose()), std::move(sigma_dot)};
  }
  if (const auto* s = std::get_if<SampledCovariance>(&impl_->data)) {
    auto [value, derivative] = s->table.evaluate(t);
    Matrix sigma_dot = 0.5 * (derivative + derivative.transpose());
    try {
      return {SpdMatrix(value), std::move(sigma_dot)};
    } catch (const Error&) {
      throw Error(ErrorKind::interpolant_not_spd,
                  "interpolated covariance at t = " + std::to_string(t) + " is not SPD");
    }
  }
  throw Error(ErrorKind::out_of_domain, "endpoint-only covariance path has no derivative");
}

SpdMatrix CovariancePath::at(double t) const {
  if (kind() == CovariancePathKind::endpoints_only) {
    if (t == 0.0) return start();
    if (t == 1.0) return end();
    throw Error(ErrorKind::out_of_domain,
                "endpoint-only covariance path evaluated at t = " + std::to_string(t));
  }
  return evaluate(t).sigma;
}

// ---------------------------------------------------------------------------
// Tracer paths

TracerPath TracerPath::endpoints_only(const Matrix& y0, const Matrix& y1) {
  if (y0.rows() != y1.rows() || y0.cols() != y1.cols()) {
    throw std::invalid_argument("tracer endpoints have different shapes");
  }
  return TracerPath(std::make_shared<const Impl>(Impl{TracerEndpoints{y0, y1}}));
}

TracerPath TracerPath::trajectory(Eigen::Index n, Eigen::Index m, Generator generator) {
  if (!generator) throw std::invalid_argument("empty tracer generator");
  return TracerPath(
      std::make_shared<const Impl>(Impl{AnalyticTracer{n, m, std::move(generator)}}));
}

TracerPath sampled_tracer_path(const std::vector<TracerNode>& nodes) {
  if (nodes.empty()) throw Error(ErrorKind::non_monotone_grid, "no tracer nodes");
  std::vector<double> times;
  std::vector<Matrix> values;
  for (const auto& node : nodes) {
    require_full_column_rank(node.y, "tracer node");
    times.push_back(node.t);
    values.push_back(node.y);
  }
  return TracerPath(std::make_shared<const TracerPath::Impl>(
      TracerPath::Impl{SampledTracer{HermiteTable(std::move(times), std::move(values))}}));
}

TracerPathKind TracerPath::kind() const {
  return std::holds_alternative<TracerEndpoints>(impl_->data) ? TracerPathKind::endpoints_only
                                                              : TracerPathKind::trajectory;
}

Eigen::Index TracerPath::rows() const {
  if (const auto* a = std::get_if<AnalyticTracer>(&impl_->data)) return a->n;
  if (const auto* s = std::get_if<SampledTracer>(&impl_->data)) return s->table.first().rows();
  return std::get<TracerEndpoints>(impl_->data).y0.rows();
}

Eigen::Index TracerPath::cols() const {
  if (const auto* a = std::get_if<AnalyticTracer>(&impl_->data)) return a->m;
  if (const auto* s = std::get_if<SampledTracer>(&impl_->data)) return s->table.first().cols();
  return std::get<TracerEndpoints>(impl_->data).y0.cols();
}

TracerSample TracerPath::evaluate(double t) const {
  check_time(t);
  TracerSample sample;
  if (const auto* a = std::get_if<AnalyticTracer>(&impl_->data)) {
    sample = a->generator(t);
    if (sample.y.rows() != a->n || sample.y.cols() != a->m || sample.y_dot.rows() != a->n ||
        sample.y_dot.cols() != a->m) {
      throw std::logic_error("tracer generator returned a sample of the wrong shape");
    }
  } else if (const auto* s = std::get_if<SampledTracer>(&impl_->data)) {
    auto [value, derivative] = s->table.evaluate(t);
    sample = {std::move(value), std::move(derivative)};
  } else {
    throw Error(ErrorKind::out_of_domain, "endpoint-only tracer path has no derivative");
  }
  require_full_column_rank(sample.y, "tracer path");
  return sample;
}

Matrix TracerPath::at(double t) const {
  if (const auto* e = std::get_if<TracerEndpoints>(&impl_->data)) {
    if (t == 0.0) return e->y0;
    if (t == 1.0) return e->y1;
    throw Error(ErrorKind::out_of_domain,
                "endpoint-only tracer path evaluated at t = " + std::to_string(t));
  }
  return evaluate(t).y;
}

}  // namespace tracersteer
