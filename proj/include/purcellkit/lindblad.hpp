#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>

#include "purcellkit/coupling.hpp"

namespace purcellkit {

// Single-excitation basis {|e,0>, |g,1>, |g,0>}. All rates in rad/ns.
struct LindbladParams {
  double g = 0.0;         // emitter-cavity coupling
  double kappa_c = 0.0;   // cavity decay into the bus waveguide
  double kappa_i = 0.0;   // intrinsic cavity loss
  double gamma_r = 0.0;   // radiative decay to free space
  double gamma_nr = 0.0;  // non-radiative decay
  double gamma_phi = 0.0; // pure dephasing
  double delta = 0.0;     // emitter minus cavity frequency
};

// Where the excitation ended up. Sums to one with the residual included.
struct EmissionBudget {
  double bus = 0.0;
  double cavity_loss = 0.0;
  double free_space = 0.0;
  double nonradiative = 0.0;
  double residual = 0.0;
};

inline double total(const EmissionBudget& b) {
  return b.bus + b.cavity_loss + b.free_space + b.nonradiative + b.residual;
}

struct LindbladOptions {
  double t_final = 0.0;  // 0: ten lifetimes of the slowest drain channel
  double dt = 0.0;       // 0: one percent of the fastest timescale
  int positivity_stride = 64;
};

struct LindbladResult {
  EmissionBudget budget;
  double trace_error_max = 0.0;
  double min_eigenvalue = 0.0;
  std::size_t steps = 0;
  double t_final = 0.0;
  double dt = 0.0;
};

namespace detail {

struct LindbladState {
  Eigen::Matrix3cd rho;
  double int_e = 0.0;  // integral of the emitter population
  double int_c = 0.0;  // integral of the cavity population
};

// Master-equation right-hand side. The anticommutator part uses the
// constant diagonal D = sum C^dag C; the dephasing jump sigma_z rho sigma_z
// is an elementwise sign flip of the coherences to |e,0> ... |g,1>/|g,0>.
class LindbladGenerator {
 public:
  explicit LindbladGenerator(const LindbladParams& p)
      : kappa_(p.kappa_c + p.kappa_i),
        gamma_(p.gamma_r + p.gamma_nr),
        gamma_phi_(p.gamma_phi) {
    h_.setZero();
    h_(0, 0) = p.delta;
    h_(0, 1) = p.g;
    h_(1, 0) = p.g;
    d_ = Eigen::Vector3d(gamma_ + 0.5 * gamma_phi_, kappa_ + 0.5 * gamma_phi_,
                         0.5 * gamma_phi_);
    Eigen::Matrix3d sign;
    sign << 1.0, -1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0;
    sign_ = sign.cast<std::complex<double>>();
  }

  void operator()(const LindbladState& s, LindbladState& ds) const {
    const std::complex<double> mi(0.0, -1.0);
    ds.rho = mi * (h_ * s.rho - s.rho * h_);
    ds.rho -= 0.5 * (d_.asDiagonal() * s.rho + s.rho * d_.asDiagonal());
    if (gamma_phi_ > 0.0)
      ds.rho += (0.5 * gamma_phi_) * s.rho.cwiseProduct(sign_);
    ds.rho(2, 2) += kappa_ * s.rho(1, 1) + gamma_ * s.rho(0, 0);
    ds.int_e = s.rho(0, 0).real();
    ds.int_c = s.rho(1, 1).real();
  }

 private:
  Eigen::Matrix3cd h_;
  Eigen::Vector3d d_;
  Eigen::Matrix3cd sign_;
  double kappa_, gamma_, gamma_phi_;
};

}  // namespace detail

inline void validate(const LindbladParams& p) {
  for (double v : {p.g, p.kappa_c, p.kappa_i, p.gamma_r, p.gamma_nr, p.gamma_phi})
    if (v < 0.0 || !std::isfinite(v))
      throw std::domain_error("lindblad: rates must be finite and non-negative");
  if (!std::isfinite(p.delta))
    throw std::domain_error("lindblad: delta must be finite");
}

// Fixed-step RK4 integration of the master equation starting from |e,0>.
// Channel probabilities are rate * integrated population, accumulated with
// the same fourth-order quadrature as the state itself.
inline LindbladResult evolve_single_excitation(const LindbladParams& p,
                                               const LindbladOptions& opt = {}) {
  validate(p);
  const double drain_min = [&] {
    double m = 0.0;
    for (double v : {p.kappa_c, p.kappa_i, p.gamma_r, p.gamma_nr})
      if (v > 0.0 && (m == 0.0 || v < m)) m = v;
    return m;
  }();

  double t_final = opt.t_final;
  if (t_final <= 0.0) {
    if (drain_min == 0.0)
      throw std::domain_error(
          "lindblad: no drain channel; t_final must be given explicitly");
    t_final = 10.0 / drain_min;
  }
  double dt = opt.dt;
  if (dt <= 0.0) {
    const double fastest =
        std::max({p.kappa_c + p.kappa_i, p.gamma_r + p.gamma_nr, p.gamma_phi,
                  2.0 * p.g, std::abs(p.delta)});
    if (fastest <= 0.0)
      throw std::domain_error("lindblad: all rates zero; dt must be given");
    dt = 0.01 / fastest;
  }
  auto steps = static_cast<std::size_t>(std::ceil(t_final / dt));
  if (steps > 200'000'000)
    throw std::domain_error("lindblad: step count too large; adjust t_final/dt");
  dt = t_final / static_cast<double>(steps);

  detail::LindbladGenerator rhs(p);
  detail::LindbladState s;
  s.rho.setZero();
  s.rho(0, 0) = 1.0;

  LindbladResult res;
  res.t_final = t_final;
  res.dt = dt;
  res.steps = steps;
  res.min_eigenvalue = 0.0;

  detail::LindbladState k1, k2, k3, k4, tmp;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> eig;
  const int stride = std::max(1, opt.positivity_stride);

  auto check = [&](const detail::LindbladState& st) {
    const double tr = st.rho(0, 0).real() + st.rho(1, 1).real() + st.rho(2, 2).real();
    res.trace_error_max = std::max(res.trace_error_max, std::abs(tr - 1.0));
  };

  for (std::size_t n = 0; n < steps; ++n) {
    rhs(s, k1);
    tmp.rho = s.rho + (0.5 * dt) * k1.rho;
    rhs(tmp, k2);
    tmp.rho = s.rho + (0.5 * dt) * k2.rho;
    rhs(tmp, k3);
    tmp.rho = s.rho + dt * k3.rho;
    rhs(tmp, k4);
    s.rho += (dt / 6.0) * (k1.rho + 2.0 * k2.rho + 2.0 * k3.rho + k4.rho);
    s.int_e += (dt / 6.0) * (k1.int_e + 2.0 * k2.int_e + 2.0 * k3.int_e + k4.int_e);
    s.int_c += (dt / 6.0) * (k1.int_c + 2.0 * k2.int_c + 2.0 * k3.int_c + k4.int_c);
    check(s);
    if (n % static_cast<std::size_t>(stride) == 0 || n + 1 == steps) {
      eig.compute(0.5 * (s.rho + s.rho.adjoint()),
                  Eigen::EigenvaluesOnly);
      res.min_eigenvalue =
          std::min(res.min_eigenvalue, eig.eigenvalues().minCoeff());
    }
  }

  res.budget.bus = p.kappa_c * s.int_c;
  res.budget.cavity_loss = p.kappa_i * s.int_c;
  res.budget.free_space = p.gamma_r * s.int_e;
  res.budget.nonradiative = p.gamma_nr * s.int_e;
  res.budget.residual = s.rho(0, 0).real() + s.rho(1, 1).real();
  return res;
}

// Bridge from the device description to master-equation rates. The coupling
// follows g = sqrt(F kappa gamma_r)/2 with F the overlap-weighted ideal
// Purcell factor, so 4g^2/(kappa gamma_r) round-trips to F. Pure dephasing
// makes up whatever ZPL width the population decay does not explain.
inline LindbladParams params_from_system(const CoupledSystem& sys) {
  validate(sys.emitter);
  LindbladParams p;
  const double q = loaded_q(sys.resonator);
  const double lam = sys.emitter.zpl_wavelength;
  const double omega = 2.0 * std::numbers::pi * c_nm_per_ns / lam;
  const double kappa = omega / q;
  p.kappa_c = omega / sys.resonator.q_coupling;
  p.kappa_i = kappa - p.kappa_c;
  p.gamma_r = radiative_rate(sys.emitter);
  p.gamma_nr = nonradiative_rate(sys.emitter);
  const double zpl_width_angular =
      2.0 * std::numbers::pi * c_nm_per_ns * sys.emitter.zpl_fwhm / (lam * lam);
  p.gamma_phi = std::max(0.0, 0.5 * (zpl_width_angular - p.gamma_r - p.gamma_nr));
  const double f =
      purcell_good(q, sys.resonator.mode_volume) * sys.overlap_factor;
  p.g = 0.5 * std::sqrt(f * kappa * p.gamma_r);
  const double line = lam - sys.detuning;
  p.delta = 2.0 * std::numbers::pi * c_nm_per_ns * (1.0 / lam - 1.0 / line);
  return p;
}

}  // namespace purcellkit
