// lattice_dynamics.hpp
// Time-dependent Schrödinger integration for an ion in a harmonic trap plus an
// intensity-modulated optical lattice, V0(t) sin²(k x + Φ), with
// V0(t) = ħ ε (1 − sin(ω_d t − θ)).
//
// Units: ħ = m = 1, lengths in σ_g = sqrt(ħ/m ω_T), so k x = sqrt(η_g) x.
// Frequencies and energies share one reference unit (ω_T = 1 in the usual
// dimensionless setup); times are in its inverse.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fock_core.hpp"
#include "hermite.hpp"

namespace xsq {

struct TrapConfig {
  double omega_t = 1.0;
  double eta_g = 0.02;  // k_l² σ_g²
  double phi = 0.0;     // lattice phase

  void validate() const {
    if (!(omega_t > 0.0)) throw std::invalid_argument("trap.omega_t must be > 0");
    if (!(eta_g > 0.0 && eta_g < 1.0))
      throw std::invalid_argument("trap.eta_g must lie in (0, 1) (Lamb-Dicke regime)");
  }
};

struct DriveConfig {
  double epsilon = 0.0;  // modulation amplitude, frequency units
  double omega_d = 0.0;  // 0 holds V0 = ħε(1 + sin θ) fixed
  double theta = 0.0;

  void validate() const {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("drive.epsilon must be >= 0");
    if (!(omega_d >= 0.0)) throw std::invalid_argument("drive.omega_d must be >= 0");
  }

  double amplitude(double t) const { return epsilon * (1.0 - std::sin(omega_d * t - theta)); }
};

struct DerivedParams {
  double omega_e = 1.0;      // dressed trap frequency
  double sigma_ratio = 1.0;  // σ_e / σ_g
  double eta_e = 0.0;        // k_l² σ_e²
  double g_rate = 0.0;       // G = ε η_e

  // ln(σ_g/σ_e): the dilation taking g-oscillator eigenstates to e-oscillator ones.
  double dilation() const { return -std::log(sigma_ratio); }
};

inline DerivedParams derive_params(const TrapConfig& trap, const DriveConfig& drive) {
  trap.validate();
  drive.validate();
  DerivedParams d;
  d.omega_e = std::sqrt(trap.omega_t * trap.omega_t + 2.0 * trap.eta_g * drive.epsilon * trap.omega_t);
  d.sigma_ratio = std::sqrt(trap.omega_t / d.omega_e);
  d.eta_e = trap.eta_g * trap.omega_t / d.omega_e;
  d.g_rate = drive.epsilon * d.eta_e;
  return d;
}

// Time needed for the resonant drive to reach squeezing r = G t / 2.
inline double time_for_squeezing(const DerivedParams& d, double r) {
  if (!(d.g_rate > 0.0)) throw std::invalid_argument("drive produces no squeezing (G = 0)");
  return 2.0 * r / d.g_rate;
}

enum class LatticeModel {
  full,       // sin²(sqrt(η) x + Φ)
  quadratic,  // its second-order Taylor polynomial about x = 0
};

// Spatial profile of the lattice, sin²(sqrt(η) x + Φ) or its quadratic truncation.
inline double lattice_profile(const TrapConfig& trap, double x, LatticeModel model = LatticeModel::full) {
  const double kx = std::sqrt(trap.eta_g) * x;
  if (model == LatticeModel::full) {
    const double s = std::sin(kx + trap.phi);
    return s * s;
  }
  const double s = std::sin(trap.phi);
  return s * s + std::sin(2.0 * trap.phi) * kx + std::cos(2.0 * trap.phi) * kx * kx;
}

// V(x, t) = ½ ω_T x² + V0(t) sin²(sqrt(η_g) x + Φ)
inline std::function<double(double)> potential_full(const TrapConfig& trap, const DriveConfig& drive,
                                                    double t, LatticeModel model = LatticeModel::full) {
  const double v0 = drive.amplitude(t);
  return [trap, v0, model](double x) {
    return 0.5 * trap.omega_t * x * x + v0 * lattice_profile(trap, x, model);
  };
}

// ---------------------------------------------------------------------------
// Position grid

struct GridConfig {
  std::size_t n_points = 1024;
  double x_max = 10.0;
  double dt = 0.01;
  double t_final = 0.0;

  void validate() const {
    if (n_points < 128 || (n_points & (n_points - 1)) != 0)
      throw std::invalid_argument("grid.n_points must be a power of two >= 128");
    if (!(x_max > 0.0)) throw std::invalid_argument("grid.x_max must be > 0");
    if (!(dt > 0.0)) throw std::invalid_argument("grid.dt must be > 0");
    if (!(t_final >= 0.0)) throw std::invalid_argument("grid.t_final must be >= 0");
  }
};

// Periodic grid x_j = −x_max + j dx, dx = 2 x_max / n.
class PositionGrid {
 public:
  PositionGrid(std::size_t n, double x_max) : n_(n), x_max_(x_max) {
    if (n < 2) throw invalid_dimension("grid needs at least two points");
  }

  std::size_t size() const { return n_; }
  double x_max() const { return x_max_; }
  double dx() const { return 2.0 * x_max_ / static_cast<double>(n_); }
  double x(std::size_t j) const { return -x_max_ + static_cast<double>(j) * dx(); }

  std::vector<double> xs() const {
    std::vector<double> out(n_);
    for (std::size_t j = 0; j < n_; ++j) out[j] = x(j);
    return out;
  }

  // FFT ordering: 0, 1, ..., n/2−1, −n/2, ..., −1 times 2π/(n dx)
  std::vector<double> wavenumbers() const {
    std::vector<double> k(n_);
    const double dk = 2.0 * pi / (static_cast<double>(n_) * dx());
    for (std::size_t j = 0; j < n_; ++j) {
      const auto jj = static_cast<double>(j);
      k[j] = (j < n_ / 2 ? jj : jj - static_cast<double>(n_)) * dk;
    }
    return k;
  }

 private:
  std::size_t n_;
  double x_max_;
};

struct GridState {
  PositionGrid grid;
  cvec psi;

  double norm_squared() const { return psi.squaredNorm() * grid.dx(); }
};

// n-th eigenfunction of an oscillator with length `scale` (in σ_g), sampled on the grid.
inline GridState oscillator_state(const PositionGrid& grid, std::size_t n, double scale = 1.0) {
  const auto xs = grid.xs();
  const Eigen::MatrixXd phi = oscillator_functions(n + 1, xs, scale);
  GridState s{grid, phi.col(static_cast<Index>(n)).cast<complex>()};
  s.psi /= std::sqrt(s.norm_squared());
  return s;
}

// Grid wavefunction for a Fock-basis state of an oscillator with length `scale`.
inline GridState grid_from_fock(const MotionalState& state, const PositionGrid& grid, double scale = 1.0) {
  const auto xs = grid.xs();
  const Eigen::MatrixXd phi = oscillator_functions(state.dim(), xs, scale);
  return GridState{grid, phi.cast<complex>() * state.amplitudes()};
}

// Projection onto the first `dim` eigenfunctions of an oscillator with length
// `scale`. Throws when the projection drops more than `max_loss` of the norm.
inline MotionalState fock_from_grid(const GridState& state, std::size_t dim, double scale = 1.0,
                                    double max_loss = 1e-8) {
  const auto xs = state.grid.xs();
  const Eigen::MatrixXd phi = oscillator_functions(dim, xs, scale);
  cvec c = phi.transpose().cast<complex>() * state.psi * state.grid.dx();
  const double loss = 1.0 - c.squaredNorm() / state.norm_squared();
  if (loss > max_loss)
    throw basis_conversion_error("grid-to-Fock projection loses " + num_text(loss) +
                                 " of the norm (dim=" + std::to_string(dim) + ")");
  return MotionalState(std::move(c));
}

// Probability within `edge_points` grid points of either end.
inline double boundary_probability(const GridState& s, std::size_t edge_points = 5) {
  const auto e = static_cast<Index>(std::min<std::size_t>(edge_points, s.psi.size() / 2));
  return (s.psi.head(e).squaredNorm() + s.psi.tail(e).squaredNorm()) * s.grid.dx();
}

struct PropagationOptions {
  std::size_t snapshot_stride = 1;  // steps between stored snapshots
  LatticeModel model = LatticeModel::full;
  double boundary_tol = 1e-8;
  std::size_t edge_points = 5;
  double tail_tol = 1e-8;  // Fock solver: top-10% probability bound
};

struct GridSnapshot {
  double t = 0.0;
  cvec psi;
  double norm_defect = 0.0;
  double boundary_leak = 0.0;
};

struct GridEvolution {
  PositionGrid grid;
  std::vector<GridSnapshot> snapshots;

  GridState state(std::size_t i) const { return GridState{grid, snapshots.at(i).psi}; }
  GridState final_state() const { return GridState{grid, snapshots.back().psi}; }
};

namespace detail {

inline std::size_t step_count(double t_final, double dt) {
  if (t_final <= 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(t_final / dt - 1e-9));
}

}  // namespace detail

// Strang splitting: half kinetic step in k-space, full potential step at the
// step midpoint, half kinetic step. The state lives in k-space between steps.
inline GridEvolution propagate_grid(const GridState& initial, const TrapConfig& trap,
                                    const DriveConfig& drive, const GridConfig& cfg,
                                    const PropagationOptions& opt = {}) {
  trap.validate();
  drive.validate();
  cfg.validate();
  if (initial.grid.size() != cfg.n_points || initial.grid.x_max() != cfg.x_max)
    throw dimension_mismatch("initial state grid does not match grid config");

  const PositionGrid& grid = initial.grid;
  const std::size_t n = grid.size();
  const std::size_t steps = detail::step_count(cfg.t_final, cfg.dt);
  const double dt = steps > 0 ? cfg.t_final / static_cast<double>(steps) : 0.0;
  const std::size_t stride = std::max<std::size_t>(1, opt.snapshot_stride);
  const double dx = grid.dx();

  const auto xs = grid.xs();
  const auto ks = grid.wavenumbers();
  std::vector<complex> half_kinetic(n);
  for (std::size_t j = 0; j < n; ++j)
    half_kinetic[j] = std::polar(1.0, -0.5 * dt * trap.omega_t * 0.5 * ks[j] * ks[j]);
  std::vector<double> harmonic(n), lattice(n);
  for (std::size_t j = 0; j < n; ++j) {
    harmonic[j] = 0.5 * trap.omega_t * xs[j] * xs[j];
    lattice[j] = lattice_profile(trap, xs[j], opt.model);
  }

  const double norm0 = initial.norm_squared();
  GridEvolution out{grid, {}};
  std::vector<complex> psi(initial.psi.data(), initial.psi.data() + n);
  std::vector<complex> phik(n);
  Eigen::FFT<double> fft;

  auto record = [&](double t, const std::vector<complex>& x_space) {
    GridSnapshot snap;
    snap.t = t;
    snap.psi = Eigen::Map<const cvec>(x_space.data(), static_cast<Index>(n));
    snap.norm_defect = std::abs(snap.psi.squaredNorm() * dx - norm0);
    snap.boundary_leak = boundary_probability(GridState{grid, snap.psi}, opt.edge_points);
    if (snap.boundary_leak > opt.boundary_tol)
      throw boundary_leak_error("probability " + num_text(snap.boundary_leak) +
                                " reached the grid edge at t=" + num_text(t) +
                                "; widen grid.x_max");
    out.snapshots.push_back(std::move(snap));
  };

  record(0.0, psi);
  fft.fwd(phik, psi);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t_mid = (static_cast<double>(s) + 0.5) * dt;
    const double v0 = drive.amplitude(t_mid);
    for (std::size_t j = 0; j < n; ++j) phik[j] *= half_kinetic[j];
    fft.inv(psi, phik);
    for (std::size_t j = 0; j < n; ++j) psi[j] *= std::polar(1.0, -dt * (harmonic[j] + v0 * lattice[j]));
    fft.fwd(phik, psi);
    for (std::size_t j = 0; j < n; ++j) phik[j] *= half_kinetic[j];
    if ((s + 1) % stride == 0 || s + 1 == steps) {
      fft.inv(psi, phik);
      record(static_cast<double>(s + 1) * dt, psi);
    }
  }
  return out;
}

// Final state only, no snapshot storage.
inline GridState propagate_grid_final(const GridState& initial, const TrapConfig& trap,
                                      const DriveConfig& drive, const GridConfig& cfg,
                                      PropagationOptions opt = {}) {
  opt.snapshot_stride = std::max<std::size_t>(1, detail::step_count(cfg.t_final, cfg.dt));
  return propagate_grid(initial, trap, drive, cfg, opt).final_state();
}

struct StepSizeAudit {
  double dt = 0.0;
  double fidelity_deficit = 0.0;  // 1 − |<ψ_dt|ψ_dt/2>|²
  double tolerance = 0.0;
  bool passed = false;
};

// Reruns with half the time step and compares the final states.
inline StepSizeAudit audit_step_size(const GridState& initial, const TrapConfig& trap,
                                     const DriveConfig& drive, const GridConfig& cfg, double tolerance,
                                     const PropagationOptions& opt = {}, bool enforce = true) {
  GridConfig half = cfg;
  half.dt = cfg.dt / 2.0;
  const GridState a = propagate_grid_final(initial, trap, drive, cfg, opt);
  const GridState b = propagate_grid_final(initial, trap, drive, half, opt);
  const complex ov = a.psi.dot(b.psi) * a.grid.dx();
  StepSizeAudit audit{cfg.dt, 1.0 - std::norm(ov) / (a.norm_squared() * b.norm_squared()), tolerance, false};
  audit.passed = audit.fidelity_deficit <= tolerance;
  if (enforce && !audit.passed)
    throw step_size_error("halving dt changes the final state by fidelity " +
                          num_text(audit.fidelity_deficit) + " > " + num_text(tolerance));
  return audit;
}

// Lowest eigenstate of ½ω_T p² + ½ω_T x² + v0 sin²(...) by imaginary-time
// split-operator relaxation.
inline GridState relax_ground_state(const PositionGrid& grid, const TrapConfig& trap, double v0,
                                    double tau = 0.01, double tol = 1e-14, std::size_t max_steps = 200000,
                                    LatticeModel model = LatticeModel::full) {
  trap.validate();
  const std::size_t n = grid.size();
  const auto xs = grid.xs();
  const auto ks = grid.wavenumbers();
  std::vector<double> half_k(n), pot(n);
  for (std::size_t j = 0; j < n; ++j) {
    half_k[j] = std::exp(-0.5 * tau * 0.5 * trap.omega_t * ks[j] * ks[j]);
    pot[j] = std::exp(-tau * (0.5 * trap.omega_t * xs[j] * xs[j] + v0 * lattice_profile(trap, xs[j], model)));
  }
  GridState g = oscillator_state(grid, 0);
  std::vector<complex> psi(g.psi.data(), g.psi.data() + n), phik(n), prev(psi);
  Eigen::FFT<double> fft;
  const double dx = grid.dx();
  for (std::size_t s = 0; s < max_steps; ++s) {
    fft.fwd(phik, psi);
    for (std::size_t j = 0; j < n; ++j) phik[j] *= half_k[j];
    fft.inv(psi, phik);
    for (std::size_t j = 0; j < n; ++j) psi[j] *= pot[j];
    fft.fwd(phik, psi);
    for (std::size_t j = 0; j < n; ++j) phik[j] *= half_k[j];
    fft.inv(psi, phik);
    double nrm = 0.0;
    for (const auto& v : psi) nrm += std::norm(v);
    nrm = std::sqrt(nrm * dx);
    double change = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      psi[j] /= nrm;
      change += std::norm(psi[j] - prev[j]);
    }
    prev = psi;
    if (change * dx < tol) break;
  }
  return GridState{grid, Eigen::Map<const cvec>(psi.data(), static_cast<Index>(n))};
}

// ---------------------------------------------------------------------------
// Fock-basis solver

struct FockStepConfig {
  double dt = 0.01;
  double t_final = 0.0;
  std::size_t snapshot_stride = 1;
};

struct FockSnapshot {
  double t = 0.0;
  cvec amplitudes;
  double norm_defect = 0.0;
  double tail_probability = 0.0;
};

struct FockEvolution {
  std::vector<FockSnapshot> snapshots;

  MotionalState state(std::size_t i) const { return MotionalState(snapshots.at(i).amplitudes); }
  MotionalState final_state() const { return MotionalState(snapshots.back().amplitudes); }
};

// Lattice profile as an operator in the g-oscillator number basis: the
// position operator is diagonalized, the profile applied to its eigenvalues,
// and the result rotated back.
inline Eigen::MatrixXd lattice_operator(const TrapConfig& trap, std::size_t dim,
                                        LatticeModel model = LatticeModel::full) {
  detail::require_dim(dim);
  const auto n = static_cast<Index>(dim);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (Index k = 0; k + 1 < n; ++k) sub(k) = std::sqrt(static_cast<double>(k + 1) / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  Eigen::VectorXd f(n);
  for (Index k = 0; k < n; ++k) f(k) = lattice_profile(trap, solver.eigenvalues()(k), model);
  return solver.eigenvectors() * f.asDiagonal() * solver.eigenvectors().transpose();
}

namespace detail {

// Classic RK4 on i dψ/dt = H(t) ψ with H(t) = H0 + V0(t) L, columns propagated together.
class FockStepper {
 public:
  FockStepper(const TrapConfig& trap, const DriveConfig& drive, std::size_t dim, LatticeModel model)
      : drive_(drive), h0_(static_cast<Index>(dim)), lattice_(lattice_operator(trap, dim, model)) {
    for (Index k = 0; k < h0_.size(); ++k) h0_(k) = trap.omega_t * (static_cast<double>(k) + 0.5);
  }

  void step(cmat& psi, double t, double dt) const {
    const cmat k1 = rhs(psi, t);
    const cmat k2 = rhs(psi + 0.5 * dt * k1, t + 0.5 * dt);
    const cmat k3 = rhs(psi + 0.5 * dt * k2, t + 0.5 * dt);
    const cmat k4 = rhs(psi + dt * k3, t + dt);
    psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

 private:
  // −i H(t) ψ. L is real symmetric, so each complex column is treated as a
  // 2×n real block (interleaved re/im) times L.
  cmat rhs(const cmat& psi, double t) const {
    const double v0 = drive_.amplitude(t);
    cmat h = h0_.asDiagonal() * psi;
    if (v0 != 0.0) {
      const Index n = psi.rows();
      for (Index c = 0; c < psi.cols(); ++c) {
        using RealBlock = Eigen::Map<const Eigen::Matrix<double, 2, Eigen::Dynamic>>;
        using RealBlockOut = Eigen::Map<Eigen::Matrix<double, 2, Eigen::Dynamic>>;
        const RealBlock in(reinterpret_cast<const double*>(psi.col(c).data()), 2, n);
        RealBlockOut out(reinterpret_cast<double*>(h.col(c).data()), 2, n);
        out.noalias() += v0 * (in * lattice_);
      }
    }
    return complex(0.0, -1.0) * h;
  }

  DriveConfig drive_;
  Eigen::VectorXd h0_;
  Eigen::MatrixXd lattice_;
};

inline double top_tail(const cmat& psi) {
  const Index count = std::max<Index>(1, static_cast<Index>(std::ceil(0.1 * static_cast<double>(psi.rows()))));
  return psi.bottomRows(count).squaredNorm();
}

}  // namespace detail

inline FockEvolution propagate_fock(const MotionalState& initial, const TrapConfig& trap,
                                    const DriveConfig& drive, const FockStepConfig& cfg,
                                    const PropagationOptions& opt = {}) {
  trap.validate();
  drive.validate();
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  const std::size_t steps = detail::step_count(cfg.t_final, cfg.dt);
  const double dt = steps > 0 ? cfg.t_final / static_cast<double>(steps) : 0.0;
  const std::size_t stride = std::max<std::size_t>(1, cfg.snapshot_stride);
  const detail::FockStepper stepper(trap, drive, initial.dim(), opt.model);

  cmat psi = initial.amplitudes();
  const double norm0 = psi.squaredNorm();
  FockEvolution out;
  auto record = [&](double t) {
    FockSnapshot snap{t, psi.col(0), std::abs(psi.squaredNorm() - norm0), detail::top_tail(psi)};
    if (snap.tail_probability > opt.tail_tol)
      throw tail_leak_error("Fock tail probability " + num_text(snap.tail_probability) +
                            " at t=" + num_text(t) + "; increase dim");
    out.snapshots.push_back(std::move(snap));
  };
  record(0.0);
  for (std::size_t s = 0; s < steps; ++s) {
    stepper.step(psi, static_cast<double>(s) * dt, dt);
    if ((s + 1) % stride == 0 || s + 1 == steps) record(static_cast<double>(s + 1) * dt);
  }
  return out;
}

// Propagates several columns at once; returns the final columns.
inline cmat propagate_fock_columns(const cmat& columns, const TrapConfig& trap, const DriveConfig& drive,
                                   double dt_target, double t_final, const PropagationOptions& opt = {}) {
  trap.validate();
  drive.validate();
  detail::require_dim(static_cast<std::size_t>(columns.rows()));
  const std::size_t steps = detail::step_count(t_final, dt_target);
  const double dt = steps > 0 ? t_final / static_cast<double>(steps) : 0.0;
  const detail::FockStepper stepper(trap, drive, static_cast<std::size_t>(columns.rows()), opt.model);
  cmat psi = columns;
  for (std::size_t s = 0; s < steps; ++s) stepper.step(psi, static_cast<double>(s) * dt, dt);
  const double tail = detail::top_tail(psi);
  if (tail > opt.tail_tol * static_cast<double>(columns.cols()))
    throw tail_leak_error("Fock tail probability " + num_text(tail) + "; increase dim");
  return psi;
}

// ---------------------------------------------------------------------------
// RWA and frame bookkeeping

// Interaction-picture RWA evolution for duration T at drive phase θ: S(G T/2 e^{iθ}).
inline FockOperator rwa_propagator(double g_rate, double duration, double theta, std::size_t dim) {
  return squeeze_op(SqueezeParam(0.5 * g_rate * duration, theta), dim);
}

// Converts g-oscillator number amplitudes to e-oscillator ones: |n_e> = S(ρ)|n_g>
// with ρ = ln(σ_g/σ_e), so c_e = S(ρ)† c_g.
inline MotionalState g_to_e_basis(const MotionalState& s, const DerivedParams& d) {
  if (d.dilation() == 0.0) return s;
  return squeeze_op(SqueezeParam(d.dilation(), pi), s.dim()).apply(s);
}

inline MotionalState e_to_g_basis(const MotionalState& s, const DerivedParams& d) {
  if (d.dilation() == 0.0) return s;
  return squeeze_op(SqueezeParam(d.dilation(), 0.0), s.dim()).apply(s);
}

// exp(+i ω (n + ½) t) applied to number amplitudes: lab frame -> interaction picture.
inline MotionalState to_interaction_picture(const MotionalState& s, double omega, double t) {
  cvec c = s.amplitudes();
  for (Index n = 0; n < c.size(); ++n) c(n) *= std::polar(1.0, omega * (static_cast<double>(n) + 0.5) * t);
  return MotionalState(std::move(c));
}

struct OverlapOptions {
  std::size_t dim = 128;   // e-oscillator basis size used for comparison
  std::size_t n_max = 10;  // populations reported per sample: P(0..n_max)
  double max_projection_loss = 1e-8;
};

struct OverlapSample {
  double t = 0.0;
  double fidelity = 0.0;
  std::vector<double> populations;
  double norm_defect = 0.0;
  double boundary_leak = 0.0;  // grid solver: edge probability; Fock solver: top-10% tail
};

struct OverlapSeries {
  std::string frame;  // reference Hamiltonian of the interaction picture
  std::vector<OverlapSample> samples;

  double min_fidelity() const {
    double m = 1.0;
    for (const auto& s : samples) m = std::min(m, s.fidelity);
    return m;
  }
};

namespace detail {

inline OverlapSample compare_with_ideal(const MotionalState& lab_e_basis, double t, const DerivedParams& d,
                                        double theta, const OverlapOptions& opt) {
  const MotionalState rotated = to_interaction_picture(lab_e_basis, d.omega_e, t);
  const MotionalState ideal = squeezed_state_analytic(SqueezeParam(0.5 * d.g_rate * t, theta), rotated.dim());
  OverlapSample s;
  s.t = t;
  s.fidelity = fidelity(ideal, rotated);
  s.populations.resize(std::min(opt.n_max + 1, rotated.dim()));
  for (std::size_t n = 0; n < s.populations.size(); ++n) s.populations[n] = std::norm(rotated[n]);
  return s;
}

}  // namespace detail

// F(t) = |<ξ(G t/2 e^{iθ})| e^{i H_e⁰ t} ψ(t)>|², ψ projected onto e-oscillator eigenfunctions.
inline OverlapSeries overlap_series(const GridEvolution& evo, const DerivedParams& d, double theta,
                                    const OverlapOptions& opt = {}) {
  OverlapSeries out{"interaction picture of H_e0 (omega_e, sigma_e basis)", {}};
  const auto xs = evo.grid.xs();
  const Eigen::MatrixXd basis = oscillator_functions(opt.dim, xs, d.sigma_ratio);
  const double dx = evo.grid.dx();
  for (const auto& snap : evo.snapshots) {
    cvec c = basis.transpose().cast<complex>() * snap.psi * dx;
    const double norm = snap.psi.squaredNorm() * dx;
    const double loss = 1.0 - c.squaredNorm() / norm;
    if (loss > opt.max_projection_loss)
      throw basis_conversion_error("projection onto " + std::to_string(opt.dim) +
                                   " e-oscillator states loses " + num_text(loss) +
                                   " at t=" + num_text(snap.t));
    OverlapSample s = detail::compare_with_ideal(MotionalState(std::move(c)), snap.t, d, theta, opt);
    s.norm_defect = snap.norm_defect;
    s.boundary_leak = snap.boundary_leak;
    out.samples.push_back(std::move(s));
  }
  return out;
}

inline OverlapSeries overlap_series(const FockEvolution& evo, const DerivedParams& d, double theta,
                                    const OverlapOptions& opt = {}) {
  OverlapSeries out{"interaction picture of H_e0 (omega_e, sigma_e basis)", {}};
  for (const auto& snap : evo.snapshots) {
    MotionalState e = g_to_e_basis(MotionalState(snap.amplitudes), d);
    if (e.dim() != opt.dim) e = e.resized(opt.dim);
    OverlapSample s = detail::compare_with_ideal(e, snap.t, d, theta, opt);
    s.norm_defect = snap.norm_defect;
    s.boundary_leak = snap.tail_probability;
    out.samples.push_back(std::move(s));
  }
  return out;
}

// Default grid layout for a run that reaches squeezing r_max: the wavepacket
// stretches by e^{r}, so the half-width scales with it.
inline GridConfig default_grid(const DriveConfig& drive, double r_max, double t_final) {
  GridConfig g;
  g.n_points = 1024;
  g.x_max = 10.0 * std::exp(r_max);
  g.dt = drive.omega_d > 0.0 ? (2.0 * pi / drive.omega_d) / 200.0 : 0.01;
  g.t_final = t_final;
  return g;
}

}  // namespace xsq
