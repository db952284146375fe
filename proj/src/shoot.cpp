#include "tracersteer/shoot.hpp"

#include <cmath>
#include <limits>

#include "tracersteer/log.hpp"
#include "tracersteer/rng.hpp"

namespace tracersteer {
namespace {

constexpr double kPhiSingularTol = 1e-10;
constexpr double kFrameSingularTol = 1e-8;
constexpr double kInfinity = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double min_singular_value(const Matrix& a) {
  if (a.size() == 0) return kInfinity;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

void require_regular(const Matrix& phi, int node) {
  if (!phi.allFinite() || !(min_singular_value(phi) > kPhiSingularTol)) {
    throw Error(ErrorKind::flow_degenerate,
                "state transition became singular at node " + std::to_string(node));
  }
}

void require_frame(const Matrix& nmat, int node) {
  if (nmat.rows() == 0) return;
  if (!nmat.allFinite() || !(min_singular_value(nmat) >= kFrameSingularTol)) {
    throw Error(ErrorKind::flow_degenerate,
                "nullspace frame lost row rank at node " + std::to_string(node));
  }
}

P1State p1_initial(const Matrix& p0) {
  return {Matrix::Identity(p0.rows(), p0.cols()), p0};
}

P2State p2_initial(const Matrix& p0, const P2Problem& problem) {
  return {Matrix::Identity(p0.rows(), p0.cols()), p0, problem.n0};
}

void check_costate_shape(const Matrix& p0, const TerminalSurface& surface) {
  if (p0.rows() != surface.n() || p0.cols() != surface.n()) {
    throw std::invalid_argument("initial costate must be n x n");
  }
}

}  // namespace

P1Problem make_p1_problem(const CovariancePath& path, const TracerPath& tracers) {
  if (path.kind() == CovariancePathKind::endpoints_only) {
    throw Error(ErrorKind::regime_mismatch,
                "tracer-endpoint steering needs a full covariance path, not endpoints");
  }
  if (tracers.rows() != path.dim()) {
    throw std::invalid_argument("tracer dimension does not match covariance dimension");
  }
  TerminalSurface surface(path.start(), path.end(), tracers.at(0.0), tracers.at(1.0));
  return P1Problem{path, std::move(surface)};
}

P2Problem make_p2_problem(const SpdMatrix& sigma0, const SpdMatrix& sigma1,
                          const TracerPath& tracers, EpsilonWeight eps) {
  if (tracers.kind() != TracerPathKind::trajectory) {
    throw Error(ErrorKind::regime_mismatch,
                "covariance-endpoint steering needs a full tracer trajectory");
  }
  return make_p2_problem(sigma0, sigma1, tracers, eps, initial_nullspace(tracers.at(0.0)));
}

P2Problem make_p2_problem(const SpdMatrix& sigma0, const SpdMatrix& sigma1,
                          const TracerPath& tracers, EpsilonWeight eps, Matrix n0) {
  if (tracers.kind() != TracerPathKind::trajectory) {
    throw Error(ErrorKind::regime_mismatch,
                "covariance-endpoint steering needs a full tracer trajectory");
  }
  TerminalSurface surface(sigma0, sigma1, tracers.at(0.0), tracers.at(1.0));
  const Eigen::Index n = surface.n();
  if (n0.rows() != n - surface.m() || n0.cols() != n) {
    throw std::invalid_argument("initial nullspace frame must be (n - m) x n");
  }
  if ((n0 * surface.y0()).norm() > 1e-10 * std::max(1.0, n0.norm() * surface.y0().norm())) {
    throw std::invalid_argument("initial nullspace frame does not annihilate Y0");
  }
  require_frame(n0, 0);
  return P2Problem{tracers, std::move(surface), eps, std::move(n0)};
}

const TerminalSurface& surface_of(const Problem& problem) {
  return std::visit([](const auto& p) -> const TerminalSurface& { return p.surface; }, problem);
}

ProblemKind kind_of(const Problem& problem) {
  return std::holds_alternative<P1Problem>(problem) ? ProblemKind::covariance_path
                                                    : ProblemKind::tracer_trajectory;
}

double epsilon_of(const Problem& problem) {
  if (const auto* p2 = std::get_if<P2Problem>(&problem)) return p2->eps.value();
  return 0.0;
}

TerminalState integrate_terminal(const Matrix& p0, const Problem& problem,
                                 const IntegratorGrid& grid) {
  check_costate_shape(p0, surface_of(problem));
  if (const auto* p1 = std::get_if<P1Problem>(&problem)) {
    const auto field = [&](double t, const P1State& s) { return p1_vector_field(t, s, p1->path); };
    const P1State end = rk4_march(field, p1_initial(p0), grid,
                                  [](int i, const P1State& s) { require_regular(s.phi, i); });
    return {end.phi, end.p};
  }
  const auto& p2 = std::get<P2Problem>(problem);
  const SpdMatrix& sigma0 = p2.surface.sigma0();
  const auto field = [&](double t, const P2State& s) {
    return p2_vector_field(t, s, p2.tracers, sigma0, p2.eps);
  };
  const P2State end = rk4_march(field, p2_initial(p0, p2), grid, [](int i, const P2State& s) {
    require_regular(s.phi, i);
    require_frame(s.nmat, i);
  });
  return {end.phi, end.p};
}

Vector shooting_residual(const Matrix& p0, const Problem& problem,
                         const std::optional<Matrix>& target, const IntegratorGrid& grid,
                         double rank_tol) {
  const TerminalState end = integrate_terminal(p0, problem, grid);
  if (target) return (end.phi - *target).reshaped();
  const TerminalSurface& surface = surface_of(problem);
  const Vector on_surface = surface_residual(end.phi, surface);
  const Vector tangential = tangent_projector(end.phi, surface, rank_tol) * end.p.reshaped();
  Vector out(on_surface.size() + tangential.size());
  out << on_surface, tangential;
  return out;
}

FlowSolution sample_flow(const Matrix& p0, const Problem& problem, const IntegratorGrid& grid) {
  const TerminalSurface& surface = surface_of(problem);
  check_costate_shape(p0, surface);
  FlowSolution sol;
  sol.kind = kind_of(problem);
  sol.epsilon = epsilon_of(problem);
  sol.p0 = p0;
  const int count = grid.steps() + 1;
  sol.times.resize(count);
  sol.residual_cov.assign(count, kNaN);
  sol.residual_tracer.assign(count, kNaN);
  for (int i = 0; i < count; ++i) sol.times[i] = grid.time(i);

  const Matrix& y0 = surface.y0();
  const Matrix& s0 = surface.sigma0().matrix();
  if (const auto* p1 = std::get_if<P1Problem>(&problem)) {
    const auto field = [&](double t, const P1State& s) { return p1_vector_field(t, s, p1->path); };
    const auto states = rk4_integrate(field, p1_initial(p0), grid);
    for (int i = 0; i < count; ++i) {
      require_regular(states[i].phi, i);
      P1Eval eval = evaluate_p1(sol.times[i], states[i], p1->path);
      const Matrix& phi = states[i].phi;
      sol.residual_cov[i] =
          (phi * s0 * phi.transpose() - p1->path.at(sol.times[i]).matrix()).norm();
      sol.phi.push_back(phi);
      sol.gain.push_back(std::move(eval.gain));
      sol.control.push_back(eval.omega.matrix());
    }
    sol.residual_tracer.front() = (sol.phi.front() * y0 - y0).norm();
    sol.residual_tracer.back() = (sol.phi.back() * y0 - surface.y1()).norm();
  } else {
    const auto& p2 = std::get<P2Problem>(problem);
    const auto field = [&](double t, const P2State& s) {
      return p2_vector_field(t, s, p2.tracers, surface.sigma0(), p2.eps);
    };
    const auto states = rk4_integrate(field, p2_initial(p0, p2), grid);
    for (int i = 0; i < count; ++i) {
      require_regular(states[i].phi, i);
      require_frame(states[i].nmat, i);
      P2Eval eval = evaluate_p2(sol.times[i], states[i], p2.tracers, surface.sigma0(), p2.eps);
      const Matrix& phi = states[i].phi;
      sol.residual_tracer[i] = (phi * y0 - p2.tracers.at(sol.times[i])).norm();
      sol.phi.push_back(phi);
      sol.gain.push_back(std::move(eval.gain));
      sol.control.push_back(std::move(eval.r));
    }
    sol.residual_cov.front() = (sol.phi.front() * s0 * sol.phi.front().transpose() - s0).norm();
    sol.residual_cov.back() = (sol.phi.back() * s0 * sol.phi.back().transpose() -
                               surface.sigma1().matrix())
                                  .norm();
  }
  sol.j_ke = kinetic_cost(sol, surface.sigma0());
  sol.j_a = attention_cost(sol);
  return sol;
}

namespace {

struct Attempt {
  Matrix p0;
  double residual_norm = kInfinity;
  bool converged = false;
  int iterations = 0;
};

template <typename ResidualFn>
Attempt gauss_newton(const ResidualFn& residual, Matrix p, const ShootingOptions& opts,
                     int candidate, int start, std::vector<IterationRecord>& log_out) {
  const Eigen::Index n = p.rows();
  Attempt out{p};
  Vector r;
  try {
    r = residual(p);
  } catch (const Error& e) {
    log(LogLevel::debug, "start ", start, " rejected: ", e.what());
    return out;
  }
  double norm = r.norm();
  double trust = opts.damping;
  log_out.push_back({candidate, start, 0, norm, trust, 0});

  for (int it = 1; it <= opts.max_iterations && !(norm <= opts.residual_tol); ++it) {
    const double h = opts.fd_step * std::max(1.0, p.norm());
    Matrix jac(r.size(), p.size());
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      Matrix probe = p;
      probe.reshaped()(j) += h;
      try {
        jac.col(j) = (residual(probe) - r) / h;
      } catch (const Error&) {
        probe.reshaped()(j) -= 2.0 * h;
        try {
          jac.col(j) = (r - residual(probe)) / h;
        } catch (const Error& e) {
          log(LogLevel::debug, "start ", start, " Jacobian failed: ", e.what());
          out.p0 = p;
          out.residual_norm = norm;
          out.iterations = it - 1;
          return out;
        }
      }
    }
    Eigen::JacobiSVD<Matrix> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(std::max(opts.rank_tol, opts.jacobian_tol));
    const int rank = static_cast<int>(svd.rank());
    log(LogLevel::debug, "start ", start, " iteration ", it, " singular values ",
        svd.singularValues().transpose());
    if (rank < std::min(jac.rows(), jac.cols())) {
      log(LogLevel::debug, "start ", start, " iteration ", it, ": rank-deficient Jacobian (rank ",
          rank, " of ", std::min(jac.rows(), jac.cols()), "), taking minimum-norm step");
    }
    const Matrix step = (-svd.solve(r)).reshaped(n, n);

    bool accepted = false;
    double lambda = trust;
    while (lambda >= 1e-10) {
      const Matrix trial = p + lambda * step;
      double trial_norm = kInfinity;
      Vector trial_r;
      try {
        trial_r = residual(trial);
        trial_norm = trial_r.norm();
      } catch (const Error&) {
      }
      if (trial_norm < (1.0 - 1e-4 * lambda) * norm) {
        p = trial;
        r = std::move(trial_r);
        norm = trial_norm;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    out.iterations = it;
    if (!accepted) {
      log(LogLevel::debug, "start ", start, " stalled at residual ", norm);
      break;
    }
    log_out.push_back({candidate, start, it, norm, lambda, rank});
    log(LogLevel::debug, "candidate ", candidate, " start ", start, " iteration ", it,
        " residual ", norm, " damping ", lambda);
    trust = std::min(1.0, 2.0 * lambda);
  }
  out.p0 = p;
  out.residual_norm = norm;
  out.converged = norm <= opts.residual_tol;
  return out;
}

/// Lower cost wins; costs equal to round-off fall back to the smaller residual.
bool preferred(const FlowSolution& a, const FlowSolution& b) {
  const double tie = 1e-10 * std::max(1.0, std::abs(b.total_cost()));
  if (a.total_cost() < b.total_cost() - tie) return true;
  if (a.total_cost() > b.total_cost() + tie) return false;
  return a.residual_norm < b.residual_norm;
}

}  // namespace

FlowSolution solve_shooting(const Problem& problem, const IntegratorGrid& grid,
                            const ShootingOptions& opts) {
  const TerminalSurface& surface = surface_of(problem);
  const double gram = gram_feasibility(surface);
  if (!(gram <= 1e-8)) {
    throw Error(ErrorKind::infeasible_surface,
                "tracer Gram matrices differ by " + std::to_string(gram));
  }
  const Eigen::Index n = surface.n();

  std::vector<std::optional<Matrix>> targets;
  if (surface.m() == n - 1) {
    for (Matrix& candidate : determined_endpoint(surface, opts.rank_tol)) {
      // det(Phi_t) = exp(int tr K) > 0, so orientation-reversing endpoints are unreachable.
      if (candidate.determinant() > 0.0) {
        targets.emplace_back(std::move(candidate));
      } else {
        log(LogLevel::info, "skipping orientation-reversing endpoint candidate");
      }
    }
  } else {
    targets.emplace_back(std::nullopt);
  }

  std::vector<Matrix> starts{Matrix::Zero(n, n)};
  for (int s = 1; s < opts.multistart; ++s) {
    Matrix p0(n, n);
    for (Eigen::Index k = 0; k < p0.size(); ++k) {
      p0.reshaped()(k) = opts.seed_scale * counter_normal(opts.seed, static_cast<std::uint64_t>(s),
                                                          static_cast<std::uint64_t>(k));
    }
    starts.push_back(std::move(p0));
  }

  std::vector<IterationRecord> records;
  std::optional<FlowSolution> best;
  Attempt closest;
  int closest_candidate = 0;
  for (std::size_t c = 0; c < targets.size(); ++c) {
    const auto residual = [&](const Matrix& p0) {
      return shooting_residual(p0, problem, targets[c], grid, opts.rank_tol);
    };
    for (std::size_t s = 0; s < starts.size(); ++s) {
      Attempt attempt = gauss_newton(residual, starts[s], opts, static_cast<int>(c),
                                     static_cast<int>(s), records);
      log(LogLevel::info, "candidate ", c, " start ", s, ": residual ", attempt.residual_norm,
          " after ", attempt.iterations, " iterations", attempt.converged ? " (converged)" : "");
      if (attempt.converged) {
        FlowSolution sol = sample_flow(attempt.p0, problem, grid);
        sol.converged = true;
        sol.iterations = attempt.iterations;
        sol.residual_norm = attempt.residual_norm;
        sol.candidate = static_cast<int>(c);
        if (targets[c]) sol.phi1_target = *targets[c];
        log(LogLevel::info, "candidate ", c, " start ", s, ": total cost ", sol.total_cost());
        if (!best || preferred(sol, *best)) best = std::move(sol);
      } else if (attempt.residual_norm < closest.residual_norm) {
        closest = attempt;
        closest_candidate = static_cast<int>(c);
      }
    }
  }

  if (!best) {
    if (!std::isfinite(closest.residual_norm)) {
      throw Error(ErrorKind::no_convergence, "every shooting start failed to integrate");
    }
    best = sample_flow(closest.p0, problem, grid);
    best->converged = false;
    best->iterations = closest.iterations;
    best->residual_norm = closest.residual_norm;
    best->candidate = closest_candidate;
    if (targets[closest_candidate]) best->phi1_target = *targets[closest_candidate];
  }
  best->log = std::move(records);
  return std::move(*best);
}

void require_converged(const FlowSolution& solution) {
  if (!solution.converged) {
    throw Error(ErrorKind::no_convergence,
                "shooting did not converge; best residual " + std::to_string(solution.residual_norm));
  }
}

double quadratic_convergence_ratio(const std::vector<IterationRecord>& log, int candidate,
                                   int start, int window) {
  std::vector<double> norms;
  for (const auto& rec : log) {
    if (rec.candidate == candidate && rec.start == start) norms.push_back(rec.residual_norm);
  }
  double worst = 0.0;
  const int count = static_cast<int>(norms.size());
  for (int k = std::max(0, count - 1 - window); k + 1 < count; ++k) {
    worst = std::max(worst, norms[k + 1] / (norms[k] * norms[k]));
  }
  return worst;
}

}  // namespace tracersteer
