#include <gtest/gtest.h>

#include <xsqueeze/lattice_dynamics.hpp>

#include "test_support.hpp"

using namespace xsq;

namespace {

struct Resonant {
  TrapConfig trap{1.0, 0.02, 0.0};
  DriveConfig drive{1.0, 0.0, 0.0};
  DerivedParams d;

  explicit Resonant(double phi = 0.0, double theta = 0.0) {
    trap.phi = phi;
    drive.theta = theta;
    d = derive_params(trap, drive);
    drive.omega_d = 2.0 * d.omega_e;
  }

  double period() const { return 2.0 * pi / drive.omega_d; }
};

double grid_overlap(const GridState& a, const GridState& b) {
  return std::norm(a.psi.dot(b.psi) * a.grid.dx());
}

double grid_distance(const GridState& a, const GridState& b) {
  return std::sqrt((a.psi - b.psi).squaredNorm() * a.grid.dx());
}

}  // namespace

// ---------------------------------------------------------------------------
// derived parameters

TEST(DeriveParams, LatticeOff) {
  const DerivedParams d = derive_params({1.0, 0.02, 0.0}, {0.0, 0.0, 0.0});
  EXPECT_EQ(d.omega_e, 1.0);
  EXPECT_EQ(d.eta_e, 0.02);
  EXPECT_EQ(d.g_rate, 0.0);
  EXPECT_EQ(d.sigma_ratio, 1.0);
  EXPECT_THROW(time_for_squeezing(d, 1.0), std::invalid_argument);
}

TEST(DeriveParams, ReferenceDrive) {
  const DerivedParams d = derive_params({1.0, 0.02, 0.0}, {1.0, 0.0, 0.0});
  EXPECT_NEAR(d.omega_e, std::sqrt(1.04), 1e-15);
  EXPECT_NEAR(d.omega_e, 1.019804, 5e-7);
  EXPECT_NEAR(d.g_rate, 0.019612, 5e-7);
  EXPECT_NEAR(d.sigma_ratio, std::pow(1.04, -0.25), 1e-15);
  EXPECT_EQ(d.g_rate, 1.0 * d.eta_e);
  const double t = time_for_squeezing(d, 1.0);
  EXPECT_NEAR(t, 101.98039027185571, 1e-9);
  EXPECT_NEAR(t / (2.0 * pi), 16.23, 0.01);  // trap periods
}

TEST(DeriveParams, Invariants) {
  for (double omega_t : {0.5, 1.0, 3.0})
    for (double eta : {0.001, 0.02, 0.3})
      for (double eps : {0.0, 0.4, 2.0}) {
        const DerivedParams d = derive_params({omega_t, eta, 0.0}, {eps, 0.0, 0.0});
        EXPECT_GE(d.omega_e, omega_t);
        EXPECT_LE(d.eta_e, eta);
        EXPECT_EQ(d.g_rate, eps * d.eta_e);
        EXPECT_NEAR(d.omega_e * d.omega_e, omega_t * omega_t + 2.0 * eta * eps * omega_t, 1e-13);
        EXPECT_NEAR(d.sigma_ratio, std::sqrt(omega_t / d.omega_e), 1e-15);
      }
}

TEST(DeriveParams, Validation) {
  EXPECT_THROW(derive_params({1.0, 0.0, 0.0}, {}), std::invalid_argument);
  EXPECT_THROW(derive_params({1.0, 1.0, 0.0}, {}), std::invalid_argument);
  EXPECT_THROW(derive_params({0.0, 0.02, 0.0}, {}), std::invalid_argument);
  EXPECT_THROW(derive_params({1.0, 0.02, 0.0}, {-1.0, 0.0, 0.0}), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// potential

TEST(Potential, LatticeOffIsHarmonic) {
  const auto v = potential_full({1.0, 0.02, 0.3}, {0.0, 2.0, 0.0}, 1.7);
  for (double x : {-3.0, 0.0, 0.5, 2.0}) EXPECT_DOUBLE_EQ(v(x), 0.5 * x * x);
}

TEST(Potential, QuadraticCoefficient) {
  const TrapConfig trap{1.0, 0.02, 0.0};
  const DriveConfig drive{1.0, 2.04, 0.4};
  for (double t : {0.0, 0.9, 2.3}) {
    const auto v = potential_full(trap, drive, t);
    const double h = 1e-3;
    const double curvature = (v(h) - 2.0 * v(0.0) + v(-h)) / (h * h);
    const double expected = 0.5 + trap.eta_g * drive.epsilon * (1.0 - std::sin(drive.omega_d * t - drive.theta));
    EXPECT_NEAR(0.5 * curvature, expected, 1e-7) << "t=" << t;
  }
}

TEST(Potential, CrestAtQuarterPhase) {
  const TrapConfig trap{1.0, 0.02, pi / 2};
  EXPECT_DOUBLE_EQ(lattice_profile(trap, 0.0), 1.0);
  EXPECT_LT(lattice_profile(trap, 0.3), 1.0);
  EXPECT_LT(lattice_profile(trap, -0.3), 1.0);
}

TEST(Potential, QuadraticModelIsTaylorPolynomial) {
  const TrapConfig trap{1.0, 0.02, 0.1};
  for (double x : {-0.2, 0.05, 0.3}) {
    const double full = lattice_profile(trap, x);
    const double quad = lattice_profile(trap, x, LatticeModel::quadratic);
    EXPECT_NEAR(full, quad, std::pow(std::sqrt(trap.eta_g) * std::abs(x), 3));
  }
}

TEST(Potential, StaticHoldAmplitude) {
  const DriveConfig hold{0.7, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(hold.amplitude(0.0), 0.7);
  EXPECT_DOUBLE_EQ(hold.amplitude(123.0), 0.7);
}

// ---------------------------------------------------------------------------
// grid propagation

TEST(GridPropagation, GroundStateStationaryWithoutLattice) {
  const TrapConfig trap{1.0, 0.02, 0.0};
  const DriveConfig off{0.0, 0.0, 0.0};
  GridConfig cfg{512, 10.0, 2.0 * pi / 400.0, 2.0 * pi};
  const PositionGrid pg(cfg.n_points, cfg.x_max);
  const GridState g0 = oscillator_state(pg, 0);
  const GridEvolution evo = propagate_grid(g0, trap, off, cfg);
  EXPECT_GE(grid_overlap(g0, evo.final_state()), 1.0 - 1e-8);
  for (const auto& s : evo.snapshots) EXPECT_LT(s.norm_defect, 1e-10);
}

TEST(GridPropagation, DressedGroundStationaryUnderStaticLattice) {
  const TrapConfig trap{1.0, 0.02, 0.0};
  const DriveConfig hold{1.0, 0.0, 0.0};
  const PositionGrid pg(512, 10.0);
  const GridState ground = relax_ground_state(pg, trap, hold.amplitude(0.0));
  PropagationOptions opt;
  opt.snapshot_stride = 1000000;
  const GridConfig cfg{512, 10.0, 0.01, 10 * 2.0 * pi};
  const GridState out = propagate_grid_final(ground, trap, hold, cfg, opt);
  EXPECT_GE(grid_overlap(ground, out), 1.0 - 1e-6);
  // The dressed ground state is close to the e-oscillator ground state.
  const DerivedParams d = derive_params(trap, hold);
  EXPECT_GE(grid_overlap(ground, oscillator_state(pg, 0, d.sigma_ratio)), 0.999);
}

TEST(GridPropagation, NormConservedUnderResonantDrive) {
  const Resonant s;
  GridConfig cfg = default_grid(s.drive, 0.5, 20.0 * s.period());
  const PositionGrid pg(cfg.n_points, cfg.x_max);
  const GridEvolution evo = propagate_grid(oscillator_state(pg, 0, s.d.sigma_ratio), s.trap, s.drive, cfg);
  const double steps = static_cast<double>(evo.snapshots.size() - 1);
  EXPECT_LT(evo.snapshots.back().norm_defect, 1e-10 * steps);
  for (std::size_t i = 1; i < evo.snapshots.size(); ++i)
    EXPECT_LT(std::abs(evo.snapshots[i].norm_defect - evo.snapshots[i - 1].norm_defect), 1e-10);
}

TEST(GridPropagation, SecondOrderConvergence) {
  const Resonant s;
  const double t_final = 5.0 * s.period();
  const PositionGrid pg(512, 12.0);
  const GridState g0 = oscillator_state(pg, 0, s.d.sigma_ratio);
  PropagationOptions opt;
  opt.snapshot_stride = 1u << 30;
  auto run = [&](double dt) { return propagate_grid_final(g0, s.trap, s.drive, {512, 12.0, dt, t_final}, opt); };
  const GridState ref = run(s.period() / 1600.0);
  const double e1 = grid_distance(run(s.period() / 25.0), ref);
  const double e2 = grid_distance(run(s.period() / 50.0), ref);
  EXPECT_GT(e1 / e2, 3.5);
  EXPECT_LT(e1 / e2, 4.5);
}

TEST(GridPropagation, BoundaryLeakDetected) {
  const TrapConfig trap{1.0, 0.02, 0.0};
  const GridConfig cfg{128, 3.0, 0.01, 0.1};
  const PositionGrid pg(cfg.n_points, cfg.x_max);
  EXPECT_THROW(propagate_grid(oscillator_state(pg, 0), trap, {}, cfg), boundary_leak_error);
}

TEST(GridPropagation, ConfigValidation) {
  const PositionGrid pg(128, 10.0);
  const GridState g0 = oscillator_state(pg, 0);
  EXPECT_THROW(propagate_grid(g0, {}, {}, {100, 10.0, 0.01, 1.0}), std::invalid_argument);
  EXPECT_THROW(propagate_grid(g0, {}, {}, {128, 10.0, 0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(propagate_grid(g0, {}, {}, {256, 10.0, 0.01, 1.0}), dimension_mismatch);
}

TEST(GridPropagation, StepSizeAudit) {
  const Resonant s;
  GridConfig cfg = default_grid(s.drive, 0.3, 10.0 * s.period());
  const PositionGrid pg(cfg.n_points, cfg.x_max);
  const GridState g0 = oscillator_state(pg, 0, s.d.sigma_ratio);
  const StepSizeAudit ok = audit_step_size(g0, s.trap, s.drive, cfg, 1e-6);
  EXPECT_TRUE(ok.passed);
  EXPECT_LT(ok.fidelity_deficit, 1e-6);
  cfg.dt = s.period() / 4.0;
  EXPECT_THROW(audit_step_size(g0, s.trap, s.drive, cfg, 1e-12), step_size_error);
  const StepSizeAudit lax = audit_step_size(g0, s.trap, s.drive, cfg, 1e-12, {}, false);
  EXPECT_FALSE(lax.passed);
}

// ---------------------------------------------------------------------------
// Fock propagation

TEST(FockPropagation, FourthOrderConvergence) {
  const Resonant s;
  const double t_final = 3.0 * s.period();
  const MotionalState v = e_to_g_basis(MotionalState::vacuum(48), s.d);
  auto run = [&](double dt) {
    FockStepConfig cfg{dt, t_final, 1u << 30};
    return propagate_fock(v, s.trap, s.drive, cfg).final_state();
  };
  const MotionalState ref = run(0.0025);
  const double e1 = (run(0.04).amplitudes() - ref.amplitudes()).norm();
  const double e2 = (run(0.02).amplitudes() - ref.amplitudes()).norm();
  EXPECT_GT(e1 / e2, 13.0);
  EXPECT_LT(e1 / e2, 19.0);
}

TEST(FockPropagation, GroundInvariantWithoutLattice) {
  const TrapConfig trap{1.0, 0.02, 0.0};
  const FockEvolution evo = propagate_fock(MotionalState::vacuum(24), trap, {}, {0.01, 2.0 * pi, 50});
  for (const auto& snap : evo.snapshots) EXPECT_NEAR(std::abs(snap.amplitudes(0)), 1.0, 1e-10);
}

TEST(FockPropagation, AgreesWithGridSolver) {
  const Resonant s;
  const double t_final = time_for_squeezing(s.d, 0.5);
  GridConfig cfg = default_grid(s.drive, 0.5, t_final);
  cfg.dt = s.period() / 600.0;
  const PositionGrid pg(cfg.n_points, cfg.x_max);
  PropagationOptions opt;
  opt.snapshot_stride = 1u << 30;
  const GridState grid_final = propagate_grid_final(oscillator_state(pg, 0, s.d.sigma_ratio), s.trap, s.drive, cfg, opt);
  const std::size_t dim = 96;
  const MotionalState fock_final =
      propagate_fock(e_to_g_basis(MotionalState::vacuum(dim), s.d), s.trap, s.drive, {cfg.dt, t_final, 1u << 30})
          .final_state();
  const MotionalState projected = fock_from_grid(grid_final, dim);
  EXPECT_GT(fidelity(projected, fock_final), 1.0 - 1e-6);
}

TEST(FockPropagation, QuadraticLatticeFollowsRwa) {
  const Resonant s;
  const double t_final = time_for_squeezing(s.d, 1.0);
  PropagationOptions opt;
  opt.model = LatticeModel::quadratic;
  const FockEvolution evo = propagate_fock(e_to_g_basis(MotionalState::vacuum(128), s.d), s.trap, s.drive,
                                           {s.period() / 200.0, t_final, 100}, opt);
  const OverlapSeries series = overlap_series(evo, s.d, 0.0);
  EXPECT_GT(series.min_fidelity(), 0.999);
  // Stroboscopic end point against the RWA propagator itself.
  const MotionalState ideal = rwa_propagator(s.d.g_rate, t_final, 0.0, 128).apply(MotionalState::vacuum(128));
  const MotionalState numeric = to_interaction_picture(g_to_e_basis(evo.final_state(), s.d), s.d.omega_e, t_final);
  EXPECT_GT(fidelity(ideal, numeric), 0.999);
}

TEST(FockPropagation, OffResonanceAccumulatesNothing) {
  TrapConfig trap{1.0, 0.02, 0.0};
  DriveConfig drive{1.0, 0.0, 0.0};
  const DerivedParams d = derive_params(trap, drive);
  drive.omega_d = 0.5 * d.omega_e;
  const double t_final = 100.0 * 2.0 * pi / drive.omega_d;
  const FockEvolution evo =
      propagate_fock(e_to_g_basis(MotionalState::vacuum(40), d), trap, drive, {0.02, t_final, 200});
  double worst = 1.0;
  for (std::size_t i = 0; i < evo.snapshots.size(); ++i)
    worst = std::min(worst, std::norm(g_to_e_basis(evo.state(i), d)[0]));
  EXPECT_GE(worst, 0.99);
}

TEST(FockPropagation, TailLeakDetected) {
  const Resonant s;
  EXPECT_THROW(propagate_fock(MotionalState::vacuum(12), s.trap, s.drive,
                              {s.period() / 100.0, time_for_squeezing(s.d, 1.5), 10}),
               tail_leak_error);
}

TEST(LatticeOperator, GroundExpectation) {
  // <0| sin²(k x) |0> = (1 − e^{−η}) / 2 for the g-oscillator ground state.
  const TrapConfig trap{1.0, 0.02, 0.0};
  const Eigen::MatrixXd l = lattice_operator(trap, 64);
  EXPECT_NEAR(l(0, 0), 0.5 * (1.0 - std::exp(-trap.eta_g)), 1e-13);
  EXPECT_LT((l - l.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  // Φ = π/2 swaps sin² for cos².
  const Eigen::MatrixXd c = lattice_operator({1.0, 0.02, pi / 2}, 64);
  EXPECT_NEAR(c(0, 0), 0.5 * (1.0 + std::exp(-trap.eta_g)), 1e-13);
}

// ---------------------------------------------------------------------------
// RWA propagator and frames

TEST(RwaPropagator, ZeroDurationIsIdentity) {
  EXPECT_LT((rwa_propagator(0.02, 0.0, 0.3, 16).matrix() - cmat::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RwaPropagator, ReferenceSqueeze) {
  const FockOperator u = rwa_propagator(0.02, 100.0, 0.0, 64);
  EXPECT_LT((u.matrix() - squeeze_op(SqueezeParam(1.0, 0.0), 64).matrix()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(RwaPropagator, InversionByShiftedPhase) {
  const std::size_t dim = 96;
  const MotionalState v = MotionalState::vacuum(dim);
  for (double theta : {0.0, 0.4, pi / 2, 2.0}) {
    // θ + π always undoes the squeeze.
    const FockOperator fwd = rwa_propagator(0.02, 50.0, theta, dim);
    const FockOperator back = rwa_propagator(0.02, 50.0, theta + pi, dim);
    EXPECT_NEAR(fidelity(v, (back * fwd).apply(v)), 1.0, 1e-8) << "theta=" << theta;
    // π − θ coincides with θ + π only on the real axis.
    const FockOperator mirrored = rwa_propagator(0.02, 50.0, pi - theta, dim);
    const double f = fidelity(v, (mirrored * fwd).apply(v));
    if (theta == 0.0) EXPECT_NEAR(f, 1.0, 1e-8);
    else EXPECT_LT(f, 0.99) << "theta=" << theta;
  }
}

TEST(Frames, BasisChangesAreInverse) {
  const DerivedParams d = derive_params({1.0, 0.02, 0.0}, {1.0, 0.0, 0.0});
  const MotionalState s = x_state(Parity::even, 0.5, 64);
  const MotionalState round = e_to_g_basis(g_to_e_basis(s, d), d);
  EXPECT_LT((round.amplitudes() - s.amplitudes()).norm(), 1e-12);
}

TEST(Frames, EOscillatorGroundFromGrid) {
  const DerivedParams d = derive_params({1.0, 0.02, 0.0}, {1.0, 0.0, 0.0});
  const PositionGrid pg(512, 10.0);
  const MotionalState g_basis = fock_from_grid(oscillator_state(pg, 0, d.sigma_ratio), 40);
  EXPECT_GT(std::norm(g_to_e_basis(g_basis, d)[0]), 1.0 - 1e-12);
  const MotionalState e_basis = fock_from_grid(oscillator_state(pg, 3, d.sigma_ratio), 40, d.sigma_ratio);
  EXPECT_GT(std::norm(e_basis[3]), 1.0 - 1e-12);
}

TEST(Frames, InteractionPicturePhases) {
  const MotionalState s = MotionalState::fock(2, 4);
  const MotionalState r = to_interaction_picture(s, 2.0, 0.25);
  EXPECT_NEAR(std::arg(r[2]), 2.0 * 2.5 * 0.25, 1e-15);
}

TEST(Frames, ScaleMismatchCostsOrderEta) {
  // A squeezed state built on e-oscillator operators vs. one built on
  // g-oscillator operators: the deficit stays below η and shrinks with it.
  double prev = 1.0;
  for (double eta : {0.02, 0.01, 0.005}) {
    const DerivedParams d = derive_params({1.0, eta, 0.0}, {1.0, 0.0, 0.0});
    const MotionalState g_frame = squeezed_state_analytic(SqueezeParam(1.0, 0.0), 160);
    const MotionalState e_frame = e_to_g_basis(g_frame, d);
    const double deficit = 1.0 - fidelity(g_frame, e_frame);
    EXPECT_LT(deficit, eta);
    EXPECT_LT(deficit, prev);
    prev = deficit;
  }
}

TEST(Frames, ProjectionLossReported) {
  const PositionGrid pg(512, 20.0);
  EXPECT_THROW(fock_from_grid(oscillator_state(pg, 0, 3.0), 4), basis_conversion_error);
}

// ---------------------------------------------------------------------------
// overlap series

TEST(OverlapSeries, StartsAtUnity) {
  const Resonant s;
  GridConfig cfg = default_grid(s.drive, 0.2, 2.0 * s.period());
  const PositionGrid pg(cfg.n_points, cfg.x_max);
  const GridEvolution evo = propagate_grid(oscillator_state(pg, 0, s.d.sigma_ratio), s.trap, s.drive, cfg);
  const OverlapSeries series = overlap_series(evo, s.d, 0.0);
  EXPECT_NEAR(series.samples.front().fidelity, 1.0, 1e-12);
  EXPECT_EQ(series.samples.size(), evo.snapshots.size());
  EXPECT_NE(series.frame.find("H_e0"), std::string::npos);
  EXPECT_EQ(series.samples.front().populations.size(), 11u);
}

TEST(OverlapSeries, LatticeOffStaysInGround) {
  const TrapConfig trap{1.0, 0.02, 0.0};
  const DriveConfig off{0.0, 0.0, 0.0};
  const DerivedParams d = derive_params(trap, off);
  const GridConfig cfg{512, 10.0, 0.02, 20.0};
  const PositionGrid pg(cfg.n_points, cfg.x_max);
  const OverlapSeries series = overlap_series(propagate_grid(oscillator_state(pg, 0), trap, off, cfg), d, 0.0);
  for (const auto& s : series.samples) EXPECT_NEAR(s.fidelity, 1.0, 1e-8);
}

TEST(OverlapSeries, ResonantDriveRegression) {
  // Frozen from the default grid layout (1024 points, period/200 steps).
  const Resonant s;
  const double t_final = time_for_squeezing(s.d, 1.0);
  const GridConfig cfg = default_grid(s.drive, 1.0, t_final);
  const PositionGrid pg(cfg.n_points, cfg.x_max);
  const OverlapSeries series =
      overlap_series(propagate_grid(oscillator_state(pg, 0, s.d.sigma_ratio), s.trap, s.drive, cfg), s.d, 0.0);
  EXPECT_NEAR(series.min_fidelity(), 0.9796258126, 1e-8);
  EXPECT_NEAR(series.samples.back().fidelity, 0.9861871125, 1e-8);
}

TEST(OverlapSeries, PhaseErrorDegradesMonotonically) {
  // Frozen minima for Φ = {0.01, 0.02}·2π on the default grid.
  const double frozen[] = {0.9765996446, 0.9663271308};
  double prev = 0.9796258126;
  int i = 0;
  for (double phi : {0.02 * pi, 0.04 * pi}) {
    const Resonant s(phi);
    const double t_final = time_for_squeezing(s.d, 1.0);
    const GridConfig cfg = default_grid(s.drive, 1.0, t_final);
    const PositionGrid pg(cfg.n_points, cfg.x_max);
    const double min_f =
        overlap_series(propagate_grid(oscillator_state(pg, 0, s.d.sigma_ratio), s.trap, s.drive, cfg), s.d, 0.0)
            .min_fidelity();
    EXPECT_NEAR(min_f, frozen[i++], 1e-8) << "phi=" << phi;
    EXPECT_LT(min_f, prev);
    prev = min_f;
  }
}

TEST(DefaultGrid, Layout) {
  const DriveConfig drive{1.0, 2.0, 0.0};
  const GridConfig g = default_grid(drive, 1.0, 50.0);
  EXPECT_EQ(g.n_points, 1024u);
  EXPECT_NEAR(g.x_max, 10.0 * std::exp(1.0), 1e-12);
  EXPECT_NEAR(g.dt, pi / 200.0, 1e-15);
  EXPECT_EQ(g.t_final, 50.0);
}
