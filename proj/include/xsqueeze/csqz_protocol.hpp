// csqz_protocol.hpp
// Controlled squeezing on qubit ⊗ motion and the six-step X-state preparation.
//
// Joint amplitudes are stored as (g-block, e-block), each an N-level motional
// vector. All states here live in the interaction picture of H_g⁰.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fock_core.hpp"
#include "lattice_dynamics.hpp"

namespace xsq {

enum class Branch { g, e };

inline const char* to_string(Branch b) { return b == Branch::g ? "g" : "e"; }

class JointState {
 public:
  explicit JointState(cvec amplitudes) : amps_(std::move(amplitudes)) {
    if (amps_.size() < 4 || amps_.size() % 2 != 0)
      throw invalid_dimension("joint state needs two motional blocks of dim >= 2");
  }

  static JointState from_blocks(const MotionalState& g, const MotionalState& e) {
    if (g.dim() != e.dim()) throw dimension_mismatch("joint blocks must share a dimension");
    cvec v(static_cast<Index>(2 * g.dim()));
    v << g.amplitudes(), e.amplitudes();
    return JointState(std::move(v));
  }

  std::size_t motional_dim() const { return static_cast<std::size_t>(amps_.size() / 2); }
  const cvec& amplitudes() const { return amps_; }

  MotionalState g_block() const { return MotionalState(amps_.head(amps_.size() / 2)); }
  MotionalState e_block() const { return MotionalState(amps_.tail(amps_.size() / 2)); }
  MotionalState block(Branch b) const { return b == Branch::g ? g_block() : e_block(); }

  double block_norm_squared(Branch b) const {
    const Index half = amps_.size() / 2;
    return b == Branch::g ? amps_.head(half).squaredNorm() : amps_.tail(half).squaredNorm();
  }
  double norm_squared() const { return amps_.squaredNorm(); }

 private:
  cvec amps_;
};

// Rotation by `angle` about the equatorial axis at azimuth `axis_phase`:
//   |g> -> cos(a/2)|g> + e^{iφ} sin(a/2)|e>
//   |e> -> −e^{−iφ} sin(a/2)|g> + cos(a/2)|e>
struct QubitRotation {
  double angle = 0.0;
  double axis_phase = 0.0;

  Eigen::Matrix2cd matrix() const {
    const double c = std::cos(angle / 2.0), s = std::sin(angle / 2.0);
    Eigen::Matrix2cd m;
    m << c, -std::polar(s, -axis_phase), std::polar(s, axis_phase), c;
    return m;
  }
};

// π pulse about x: |g> -> i|e>, |e> -> i|g>, a swap up to a global phase.
inline QubitRotation pi_swap() { return {pi, pi / 2}; }
// π/2 pulse about y: |g> -> (|g>+|e>)/√2, |e> -> (|e>−|g>)/√2.
inline QubitRotation half_pi() { return {pi / 2, 0.0}; }

inline JointState qubit_rotate(const JointState& s, const QubitRotation& rot) {
  const Eigen::Matrix2cd r = rot.matrix();
  const cvec g = s.g_block().amplitudes();
  const cvec e = s.e_block().amplitudes();
  cvec out(s.amplitudes().size());
  const Index half = g.size();
  out.head(half) = r(0, 0) * g + r(0, 1) * e;
  out.tail(half) = r(1, 0) * g + r(1, 1) * e;
  return JointState(std::move(out));
}

// |g><g| ⊗ g_op + |e><e| ⊗ e_op
struct ControlledOperator {
  FockOperator g_op;
  FockOperator e_op;

  JointState apply(const JointState& s) const {
    return JointState::from_blocks(g_op.apply(s.g_block()), e_op.apply(s.e_block()));
  }
};

// Data needed for U_ge = exp(+i H_g⁰ T) exp(−i H_e⁰ T).
struct FrameMap {
  double omega_t = 1.0;
  double omega_e = 1.0;
  double duration = 0.0;

  DerivedParams params() const {
    DerivedParams d;
    d.omega_e = omega_e;
    d.sigma_ratio = std::sqrt(omega_t / omega_e);
    return d;
  }
};

// exp(−i H_e⁰ T) in the g-oscillator number basis, H_e⁰ = ω_e (n_e + ½).
inline FockOperator e_oscillator_evolution(const FrameMap& f, std::size_t dim) {
  const DerivedParams d = f.params();
  cmat phases = cmat::Zero(static_cast<Index>(dim), static_cast<Index>(dim));
  for (Index n = 0; n < phases.rows(); ++n)
    phases(n, n) = std::polar(1.0, -f.omega_e * (static_cast<double>(n) + 0.5) * f.duration);
  const FockOperator dil = squeeze_op(SqueezeParam(d.dilation(), 0.0), dim);
  return FockOperator(dil.matrix() * phases * dil.matrix().adjoint());
}

inline FockOperator frame_map_operator(const FrameMap& f, std::size_t dim) {
  cmat g = cmat::Zero(static_cast<Index>(dim), static_cast<Index>(dim));
  for (Index n = 0; n < g.rows(); ++n)
    g(n, n) = std::polar(1.0, f.omega_t * (static_cast<double>(n) + 0.5) * f.duration);
  return FockOperator(g * e_oscillator_evolution(f, dim).matrix());
}

// Squeeze built from the e-oscillator ladder operators: D S(ξ) D†, D the g->e dilation.
inline FockOperator e_frame_squeeze(const SqueezeParam& xi, const FrameMap& f, std::size_t dim) {
  const FockOperator dil = squeeze_op(SqueezeParam(f.params().dilation(), 0.0), dim);
  return FockOperator(dil.matrix() * squeeze_op(xi, dim).matrix() * dil.matrix().adjoint());
}

// C-Sqz(r, θ) = |g><g| ⊗ I + |e><e| ⊗ U_ge S(ξ).
// Without a frame map U_ge is dropped and S uses the g-oscillator ladder
// operators. With one, U_ge is included and S is built from the e-oscillator
// ladder operators.
inline ControlledOperator csqz_ideal(const SqueezeParam& xi, std::size_t dim,
                                     const std::optional<FrameMap>& frame = std::nullopt) {
  if (!frame) return {FockOperator::identity(dim), squeeze_op(xi, dim)};
  return {FockOperator::identity(dim), frame_map_operator(*frame, dim) * e_frame_squeeze(xi, *frame, dim)};
}

// ---------------------------------------------------------------------------
// Numerical gate

struct PhysicalGateOptions {
  std::size_t dim = 128;
  std::size_t subspace = 4;  // motional levels per block entering the process fidelity
  double dt = 0.0;           // 0 -> drive period / 200
  LatticeModel model = LatticeModel::full;
};

struct PhysicalGateReport {
  double duration = 0.0;
  SqueezeParam target;
  DerivedParams derived;
  cmat g_columns;  // numerical propagator columns, H_g⁰ interaction picture
  cmat e_columns;
  double process_fidelity = 0.0;            // against csqz_ideal with frame map
  double process_fidelity_optimized = 0.0;  // after best block phase and e-block rotation
  double optimal_rotation = 0.0;
};

namespace detail {

inline cmat to_g_frame(cmat columns, double omega_t, double t) {
  for (Index n = 0; n < columns.rows(); ++n)
    columns.row(n) *= std::polar(1.0, omega_t * (static_cast<double>(n) + 0.5) * t);
  return columns;
}

inline double golden_maximize(const std::function<double(double)>& f, double lo, double hi, int iters = 80) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc > fd) {
      b = d; d = c; fd = fc; c = b - g * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd; d = a + g * (b - a); fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

// Runs the drive for `duration` on the e-block (full lattice) and the bare trap
// on the g-block, then compares with csqz_ideal(G T/2 e^{iθ}) on the first
// `subspace` motional levels of each block.
inline PhysicalGateReport csqz_physical(const TrapConfig& trap, const DriveConfig& drive, double duration,
                                        const PhysicalGateOptions& opt = {}) {
  const DerivedParams d = derive_params(trap, drive);
  const std::size_t dim = opt.dim;
  const auto k = static_cast<Index>(opt.subspace);
  if (opt.subspace == 0 || opt.subspace > dim) throw invalid_dimension("gate subspace outside truncation");
  const double dt = opt.dt > 0.0 ? opt.dt
                                 : (drive.omega_d > 0.0 ? (2.0 * pi / drive.omega_d) / 200.0 : 0.01);
  PropagationOptions popt;
  popt.model = opt.model;

  const cmat basis = cmat::Identity(static_cast<Index>(dim), k);
  DriveConfig off = drive;
  off.epsilon = 0.0;

  PhysicalGateReport rep;
  rep.duration = duration;
  rep.derived = d;
  rep.target = SqueezeParam(0.5 * d.g_rate * duration, drive.theta);
  rep.g_columns = detail::to_g_frame(propagate_fock_columns(basis, trap, off, dt, duration, popt),
                                     trap.omega_t, duration);
  rep.e_columns = detail::to_g_frame(propagate_fock_columns(basis, trap, drive, dt, duration, popt),
                                     trap.omega_t, duration);

  const ControlledOperator ideal =
      csqz_ideal(rep.target, dim, FrameMap{trap.omega_t, d.omega_e, duration});
  const complex tg = (ideal.g_op.matrix().leftCols(k).adjoint() * rep.g_columns).trace();
  const cmat ideal_e = ideal.e_op.matrix().leftCols(k);
  const double norm = static_cast<double>(2 * k);

  rep.process_fidelity = std::norm(tg + (ideal_e.adjoint() * rep.e_columns).trace()) / (norm * norm);

  // Best relative block phase is analytic (|t_g| + |t_e|); the e-block frame
  // rotation exp(−iφ n) is scanned then refined.
  auto score = [&](double phi) {
    cmat rotated = rep.e_columns;
    for (Index n = 0; n < rotated.rows(); ++n) rotated.row(n) *= std::polar(1.0, -phi * static_cast<double>(n));
    const double te = std::abs((ideal_e.adjoint() * rotated).trace());
    return std::pow((std::abs(tg) + te) / norm, 2);
  };
  double best_phi = 0.0, best = score(0.0);
  for (int i = -64; i <= 64; ++i) {
    const double phi = pi * i / 64.0;
    const double v = score(phi);
    if (v > best) { best = v; best_phi = phi; }
  }
  best_phi = detail::golden_maximize(score, best_phi - pi / 64, best_phi + pi / 64);
  rep.optimal_rotation = best_phi;
  rep.process_fidelity_optimized = std::max(best, score(best_phi));
  return rep;
}

// ---------------------------------------------------------------------------
// Measurement

// Seeded generator; split(k) gives an independent, reproducible child stream.
class ProtocolRng {
 public:
  explicit ProtocolRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  ProtocolRng split(std::uint64_t child) const { return ProtocolRng(seed_, stream_ * 0x9E3779B97F4A7C15ULL + child + 1); }

  // Uniform in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

struct ProtocolOutcome {
  Branch branch = Branch::g;
  double probability = 0.0;
  MotionalState post_state = MotionalState::vacuum(2);
  std::string frame_tag;
};

inline constexpr const char* kFrameHg = "interaction picture of H_g0";
inline constexpr const char* kFrameHe = "interaction picture of H_e0";

// Both outcomes with their exact probabilities, (g, e).
inline std::array<ProtocolOutcome, 2> measure_internal_both(const JointState& s,
                                                            const std::string& frame_tag = kFrameHg) {
  const double total = s.norm_squared();
  std::array<ProtocolOutcome, 2> out;
  for (Branch b : {Branch::g, Branch::e}) {
    auto& o = out[b == Branch::g ? 0 : 1];
    o.branch = b;
    o.probability = s.block_norm_squared(b) / total;
    const MotionalState block = s.block(b);
    o.post_state = o.probability > 0.0 ? block.normalized() : block;
    o.frame_tag = frame_tag;
  }
  return out;
}

inline ProtocolOutcome measure_internal(const JointState& s, ProtocolRng& rng,
                                        const std::string& frame_tag = kFrameHg) {
  auto both = measure_internal_both(s, frame_tag);
  return rng.uniform() < both[0].probability ? both[0] : both[1];
}

inline ProtocolOutcome measure_internal(const JointState& s, std::uint64_t seed,
                                        const std::string& frame_tag = kFrameHg) {
  ProtocolRng rng(seed);
  return measure_internal(s, rng, frame_tag);
}

// 1/(4 N±²): probability of the even (e) / odd (g) outcome.
inline double xstate_branch_probability(Parity parity, double r) {
  const double n = x_state_normalization(parity, r);
  return 1.0 / (4.0 * n * n);
}

// ---------------------------------------------------------------------------
// X-state preparation

enum class ProtocolMode { ideal, physical };

struct PhysicalSetup {
  TrapConfig trap;
  double epsilon = 1.0;
  double resonance_ratio = 2.0;  // ω_d / ω_e
  PhysicalGateOptions gate;
};

struct ProtocolStep {
  std::string label;
  double norm_g = 0.0;
  double norm_e = 0.0;
  std::vector<std::pair<std::size_t, double>> top_populations;  // (n, P) summed over blocks
};

struct XStateRun {
  double r = 0.0;
  ProtocolMode mode = ProtocolMode::ideal;
  std::vector<ProtocolStep> steps;
  std::array<ProtocolOutcome, 2> branches;  // (g -> X−, e -> X+)
  std::array<double, 2> fidelity_to_analytic{};
  ProtocolOutcome sampled;
  double sampled_fidelity = 0.0;
};

namespace detail {

inline ProtocolStep summarize(const std::string& label, const JointState& s, std::size_t top = 10) {
  ProtocolStep step;
  step.label = label;
  step.norm_g = s.block_norm_squared(Branch::g);
  step.norm_e = s.block_norm_squared(Branch::e);
  const auto pg = phonon_distribution(s.g_block());
  const auto pe = phonon_distribution(s.e_block());
  std::vector<std::pair<std::size_t, double>> all;
  for (std::size_t n = 0; n < pg.size(); ++n) all.emplace_back(n, pg[n] + pe[n]);
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  all.resize(std::min(top, all.size()));
  step.top_populations = std::move(all);
  return step;
}

// One controlled-squeeze segment executed numerically: e-block under the
// modulated lattice, g-block under the bare trap, both mapped to the H_g⁰ frame.
inline JointState physical_segment(const JointState& s, const PhysicalSetup& setup, double theta, double duration) {
  DriveConfig drive;
  drive.epsilon = setup.epsilon;
  drive.theta = theta;
  const DerivedParams d = derive_params(setup.trap, drive);
  drive.omega_d = setup.resonance_ratio * d.omega_e;
  const double dt = setup.gate.dt > 0.0 ? setup.gate.dt : (2.0 * pi / drive.omega_d) / 200.0;
  PropagationOptions popt;
  popt.model = setup.gate.model;
  DriveConfig off = drive;
  off.epsilon = 0.0;
  const cmat g = to_g_frame(propagate_fock_columns(s.g_block().amplitudes(), setup.trap, off, dt, duration, popt),
                            setup.trap.omega_t, duration);
  const cmat e = to_g_frame(propagate_fock_columns(s.e_block().amplitudes(), setup.trap, drive, dt, duration, popt),
                            setup.trap.omega_t, duration);
  return JointState::from_blocks(MotionalState(g.col(0)), MotionalState(e.col(0)));
}

}  // namespace detail

// Six steps at θ = 0:
//  (i) (|g>+|e>)/√2 ⊗ |0>  (ii) C-Sqz(r,0)  (iii) π swap  (iv) C-Sqz(r,π)
//  (v) π/2 rotation  (vi) measurement. Outcome e carries |X+>, outcome g |X−>.
// Ideal mode drops U_ge. Physical mode integrates both segments numerically and
// removes U_ge from the post-measurement states, leaving them in the
// interaction picture of H_e⁰.
inline XStateRun prepare_xstate(double r, std::size_t dim, ProtocolMode mode, std::uint64_t seed,
                                const std::optional<PhysicalSetup>& setup = std::nullopt) {
  if (!(r >= 0.0)) throw std::invalid_argument("prepare_xstate: r must be >= 0");
  if (mode == ProtocolMode::physical && !setup) throw std::invalid_argument("physical mode needs a PhysicalSetup");
  XStateRun run;
  run.r = r;
  run.mode = mode;

  const MotionalState vac = MotionalState::vacuum(dim);
  const double h = 1.0 / std::sqrt(2.0);
  JointState s = JointState::from_blocks(MotionalState(h * vac.amplitudes()), MotionalState(h * vac.amplitudes()));
  run.steps.push_back(detail::summarize("i: balanced superposition", s));

  std::optional<FrameMap> frame;
  double duration = 0.0;
  if (mode == ProtocolMode::physical) {
    DriveConfig drive{setup->epsilon, 0.0, 0.0};
    const DerivedParams d = derive_params(setup->trap, drive);
    duration = time_for_squeezing(d, r);
    frame = FrameMap{setup->trap.omega_t, d.omega_e, duration};
  }

  auto controlled = [&](double theta) {
    if (mode == ProtocolMode::ideal) return csqz_ideal(SqueezeParam(r, theta), dim).apply(s);
    return detail::physical_segment(s, *setup, theta, duration);
  };

  s = controlled(0.0);
  run.steps.push_back(detail::summarize("ii: C-Sqz(r,0)", s));
  s = qubit_rotate(s, pi_swap());
  run.steps.push_back(detail::summarize("iii: pi rotation", s));
  s = controlled(pi);
  run.steps.push_back(detail::summarize("iv: C-Sqz(r,pi)", s));
  s = qubit_rotate(s, half_pi());
  run.steps.push_back(detail::summarize("v: pi/2 rotation", s));

  const char* tag = kFrameHe;
  if (frame) {
    // Both blocks carry U_ge; undo it before comparing with |X±>.
    const FockOperator undo = frame_map_operator(*frame, dim).adjoint();
    s = ControlledOperator{undo, undo}.apply(s);
  }
  run.branches = measure_internal_both(s, tag);
  run.steps.push_back(detail::summarize("vi: measurement", s));

  const MotionalState x_minus = r > 0.0 ? x_state(Parity::odd, r, dim) : MotionalState::vacuum(dim);
  const MotionalState x_plus = x_state(Parity::even, r, dim);
  run.fidelity_to_analytic[0] = r > 0.0 ? fidelity(x_minus, run.branches[0].post_state) : 0.0;
  run.fidelity_to_analytic[1] = fidelity(x_plus, run.branches[1].post_state);

  ProtocolRng rng(seed);
  run.sampled = rng.uniform() < run.branches[0].probability ? run.branches[0] : run.branches[1];
  run.sampled_fidelity = run.fidelity_to_analytic[run.sampled.branch == Branch::g ? 0 : 1];
  return run;
}

}  // namespace xsq
