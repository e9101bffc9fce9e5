#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace purcellkit {

// Fills r (model minus data) and J (d r_i / d p_j) at p.
using LevMarModel =
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)>;

struct LevMarOptions {
  double lambda0 = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  double lambda_max = 1e12;
  int max_iterations = 200;
  double gradient_tol = 1e-10;  // scaled by max(1, initial cost)
  double step_tol = 1e-13;      // relative parameter step
};

struct LevMarOutcome {
  Eigen::VectorXd params;
  Eigen::VectorXd sigmas;   // NaN when the problem has no spare degrees of freedom
  double cost = 0.0;        // sum of squared residuals
  double residual_rms = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Damped Gauss-Newton with Marquardt scaling of the diagonal. Accepted steps
// relax the damping, rejected ones tighten it; convergence is declared on a
// small gradient or a negligible parameter step.
inline LevMarOutcome levmar(const LevMarModel& model, const Eigen::VectorXd& p0,
                            const LevMarOptions& opt = {}) {
  const auto m = static_cast<Eigen::Index>(p0.size());
  if (m == 0) throw std::invalid_argument("levmar: empty parameter vector");

  Eigen::VectorXd p = p0;
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  model(p, r, J);
  if (J.rows() != r.size() || J.cols() != m)
    throw std::invalid_argument("levmar: model returned inconsistent shapes");

  double cost = r.squaredNorm();
  const double gtol = opt.gradient_tol * std::max(1.0, cost);
  double lambda = opt.lambda0;

  LevMarOutcome out;
  Eigen::VectorXd g = J.transpose() * r;
  Eigen::MatrixXd jtj = J.transpose() * J;

  for (int it = 0; it < opt.max_iterations; ++it) {
    out.iterations = it;
    out.gradient_norm = g.lpNorm<Eigen::Infinity>();
    if (out.gradient_norm <= gtol) {
      out.converged = true;
      break;
    }

    bool accepted = false;
    while (lambda <= opt.lambda_max) {
      Eigen::MatrixXd a = jtj;
      for (Eigen::Index k = 0; k < m; ++k) {
        const double d = jtj(k, k);
        a(k, k) += lambda * (d > 0.0 ? d : 1.0);
      }
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= opt.lambda_up;
        continue;
      }
      if (step.norm() <= opt.step_tol * (p.norm() + opt.step_tol)) {
        out.converged = true;
        accepted = false;
        break;
      }
      const Eigen::VectorXd trial = p + step;
      Eigen::VectorXd r_trial;
      Eigen::MatrixXd j_trial;
      model(trial, r_trial, j_trial);
      const double cost_trial = r_trial.squaredNorm();
      if (std::isfinite(cost_trial) && cost_trial < cost) {
        p = trial;
        r = std::move(r_trial);
        J = std::move(j_trial);
        cost = cost_trial;
        g = J.transpose() * r;
        jtj = J.transpose() * J;
        lambda = std::max(lambda / opt.lambda_down,
                          std::numeric_limits<double>::min());
        accepted = true;
        break;
      }
      lambda *= opt.lambda_up;
    }
    if (!accepted) {
      if (!out.converged) out.converged = g.lpNorm<Eigen::Infinity>() <= gtol;
      break;
    }
  }

  out.params = p;
  out.cost = cost;
  out.gradient_norm = g.lpNorm<Eigen::Infinity>();
  const auto n = static_cast<Eigen::Index>(r.size());
  out.residual_rms = n > 0 ? std::sqrt(cost / static_cast<double>(n)) : 0.0;

  out.sigmas = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::quiet_NaN());
  if (n > m) {
    const double variance = cost / static_cast<double>(n - m);
    const Eigen::MatrixXd cov =
        jtj.ldlt().solve(Eigen::MatrixXd::Identity(m, m)) * variance;
    for (Eigen::Index k = 0; k < m; ++k) {
      const double v = cov(k, k);
      out.sigmas[k] = v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

}  // namespace purcellkit
