#include <gtest/gtest.h>

#include <xsqueeze/csqz_protocol.hpp>

#include <set>

#include "test_support.hpp"

using namespace xsq;
using xsq_test::expm;

namespace {

const complex kI(0.0, 1.0);

JointState basis_joint(Branch b, std::size_t n, std::size_t dim) {
  const MotionalState zero(cvec::Zero(static_cast<Index>(dim)));
  return b == Branch::g ? JointState::from_blocks(MotionalState::fock(n, dim), zero)
                        : JointState::from_blocks(zero, MotionalState::fock(n, dim));
}

double joint_distance(const JointState& a, const JointState& b) {
  return (a.amplitudes() - b.amplitudes()).norm();
}

struct ResonantGate {
  TrapConfig trap{1.0, 0.02, 0.0};
  DriveConfig drive{1.0, 0.0, 0.0};
  DerivedParams d;

  explicit ResonantGate(double phi = 0.0) {
    trap.phi = phi;
    d = derive_params(trap, drive);
    drive.omega_d = 2.0 * d.omega_e;
  }
};

// H_e⁰ = p²/2 + ω_e² x²/2 in the g-oscillator number basis (ω_T = 1).
cmat e_hamiltonian(double omega_e, std::size_t dim) {
  const cmat a = xsq_test::lowering(dim);
  const cmat x = (a + a.adjoint()) / std::sqrt(2.0);
  const cmat p = kI * (a.adjoint() - a) / std::sqrt(2.0);
  return 0.5 * p * p + 0.5 * omega_e * omega_e * x * x;
}

}  // namespace

// ---------------------------------------------------------------------------
// qubit rotations

TEST(QubitRotation, MatricesAreUnitary) {
  for (const QubitRotation& r : {pi_swap(), half_pi(), QubitRotation{0.7, 2.1}}) {
    const Eigen::Matrix2cd m = r.matrix();
    EXPECT_LT((m.adjoint() * m - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(QubitRotation, PiPulseSwapsLevels) {
  const JointState out = qubit_rotate(basis_joint(Branch::g, 0, 4), pi_swap());
  EXPECT_NEAR(out.block_norm_squared(Branch::e), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(out.e_block()[0] - kI), 0.0, 1e-15);
  const JointState back = qubit_rotate(basis_joint(Branch::e, 0, 4), pi_swap());
  EXPECT_NEAR(std::abs(back.g_block()[0] - kI), 0.0, 1e-15);
}

TEST(QubitRotation, HalfPiConvention) {
  const double h = 1.0 / std::sqrt(2.0);
  const JointState g = qubit_rotate(basis_joint(Branch::g, 0, 4), half_pi());
  EXPECT_NEAR(g.g_block()[0].real(), h, 1e-15);
  EXPECT_NEAR(g.e_block()[0].real(), h, 1e-15);
  const JointState e = qubit_rotate(basis_joint(Branch::e, 0, 4), half_pi());
  EXPECT_NEAR(e.g_block()[0].real(), -h, 1e-15);
  EXPECT_NEAR(e.e_block()[0].real(), h, 1e-15);
}

TEST(QubitRotation, TwoHalfPulsesMakeAPiPulse) {
  const Eigen::Matrix2cd twice = half_pi().matrix() * half_pi().matrix();
  const Eigen::Matrix2cd full = QubitRotation{pi, 0.0}.matrix();
  EXPECT_LT((twice - full).cwiseAbs().maxCoeff(), 1e-15);
  // Same population transfer as the protocol's π pulse.
  const Eigen::Matrix2cd swap = pi_swap().matrix();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(std::abs(twice(i, j)), std::abs(swap(i, j)), 1e-15);
}

TEST(QubitRotation, StepFiveAlgebra) {
  const double r = 0.8;
  const std::size_t dim = recommended_dim(r, 1e-16);
  const MotionalState plus = squeezed_state_analytic(SqueezeParam(r, 0.0), dim);
  const MotionalState minus = squeezed_state_analytic(SqueezeParam(r, pi), dim);
  const double h = 1.0 / std::sqrt(2.0);
  const JointState in = JointState::from_blocks(MotionalState(h * plus.amplitudes()), MotionalState(h * minus.amplitudes()));
  const JointState out = qubit_rotate(in, half_pi());
  const cvec e_ref = 0.5 * (plus.amplitudes() + minus.amplitudes());
  const cvec g_ref = 0.5 * (plus.amplitudes() - minus.amplitudes());
  EXPECT_LT((out.e_block().amplitudes() - e_ref).norm(), 1e-14);
  EXPECT_LT((out.g_block().amplitudes() - g_ref).norm(), 1e-14);
  // ½ N±⁻¹ |X±>
  const MotionalState xp = x_state(Parity::even, r, dim);
  const MotionalState xm = x_state(Parity::odd, r, dim);
  EXPECT_LT((e_ref - 0.5 / x_state_normalization(Parity::even, r) * xp.amplitudes()).norm(), 1e-12);
  EXPECT_LT((g_ref - 0.5 / x_state_normalization(Parity::odd, r) * xm.amplitudes()).norm(), 1e-12);
}

TEST(JointStateType, BlocksAndErrors) {
  EXPECT_THROW(JointState(cvec::Zero(3)), invalid_dimension);
  EXPECT_THROW(JointState::from_blocks(MotionalState::vacuum(3), MotionalState::vacuum(4)), dimension_mismatch);
  const JointState s = basis_joint(Branch::e, 2, 5);
  EXPECT_EQ(s.motional_dim(), 5u);
  EXPECT_EQ(s.e_block()[2], complex(1.0));
  EXPECT_EQ(s.block_norm_squared(Branch::g), 0.0);
}

// ---------------------------------------------------------------------------
// ideal gate

TEST(CsqzIdeal, ZeroSqueezeIsIdentity) {
  const ControlledOperator u = csqz_ideal(SqueezeParam(0.0, 0.0), 16);
  EXPECT_LT((u.e_op.matrix() - cmat::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-15);
  const ControlledOperator f = csqz_ideal(SqueezeParam(0.0, 0.0), 16, FrameMap{1.0, 1.02, 0.0});
  EXPECT_LT((f.e_op.matrix() - cmat::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((f.g_op.matrix() - cmat::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CsqzIdeal, ControlledSqueezeOfSuperposition) {
  const double r = 0.7;
  const std::size_t dim = 128;
  const double h = 1.0 / std::sqrt(2.0);
  const MotionalState vac = MotionalState::vacuum(dim);
  const JointState in = JointState::from_blocks(MotionalState(h * vac.amplitudes()), MotionalState(h * vac.amplitudes()));
  const JointState out = csqz_ideal(SqueezeParam(r, 0.0), dim).apply(in);
  EXPECT_LT((out.g_block().amplitudes() - h * vac.amplitudes()).norm(), 1e-15);
  const MotionalState xi = squeezed_state_analytic(SqueezeParam(r, 0.0), dim);
  EXPECT_LT((out.e_block().amplitudes() - h * xi.amplitudes()).norm(), 1e-9);
}

TEST(CsqzIdeal, OppositeGateInverts) {
  const std::size_t dim = 128;
  const JointState in = basis_joint(Branch::e, 0, dim);
  const JointState out =
      csqz_ideal(SqueezeParam(1.0, pi), dim).apply(csqz_ideal(SqueezeParam(1.0, 0.0), dim).apply(in));
  EXPECT_LT(joint_distance(in, out), 1e-8);
}

TEST(CsqzIdeal, BlockNormsPreserved) {
  const std::size_t dim = 96;
  cvec v = cvec::Zero(2 * dim);
  v(0) = 0.6;
  v(static_cast<Index>(dim) + 1) = complex(0.0, 0.8);
  const JointState in(v);
  const FrameMap frame{1.0, 1.0198, 40.0};
  for (const auto& u : {csqz_ideal(SqueezeParam(0.6, 0.3), dim), csqz_ideal(SqueezeParam(0.6, 0.3), dim, frame)}) {
    const JointState out = u.apply(in);
    EXPECT_NEAR(out.block_norm_squared(Branch::g), 0.36, 1e-12);
    EXPECT_NEAR(out.block_norm_squared(Branch::e), 0.64, 1e-10);
  }
}

TEST(FrameMapOperator, MatchesDirectExponentials) {
  const std::size_t dim = 120, k = 10;
  const FrameMap f{1.0, 1.0198039, 5.0};
  const cmat he = e_hamiltonian(f.omega_e, dim);
  cmat hg = cmat::Zero(dim, dim);
  for (std::size_t n = 0; n < dim; ++n) hg(static_cast<Index>(n), static_cast<Index>(n)) = static_cast<double>(n) + 0.5;
  const cmat ref = expm(kI * f.duration * hg) * expm(-kI * f.duration * he);
  const cmat got = frame_map_operator(f, dim).matrix();
  EXPECT_LT((got - ref).topLeftCorner(k, k).cwiseAbs().maxCoeff(), 1e-8);
  const cmat evo = e_oscillator_evolution(f, dim).matrix();
  EXPECT_LT((evo - expm(-kI * f.duration * he)).topLeftCorner(k, k).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FrameMapOperator, EFrameSqueezeUsesDressedLadder) {
  // a_e = sqrt(ω_e/2) x + i p / sqrt(2 ω_e)
  const std::size_t dim = 160, k = 8;
  const FrameMap f{1.0, 1.0198039, 0.0};
  const cmat a = xsq_test::lowering(dim);
  const cmat x = (a + a.adjoint()) / std::sqrt(2.0);
  const cmat p = kI * (a.adjoint() - a) / std::sqrt(2.0);
  const cmat ae = std::sqrt(f.omega_e / 2.0) * x + kI * p / std::sqrt(2.0 * f.omega_e);
  const complex xi = std::polar(0.5, 0.4);
  const cmat ref = expm(0.5 * (std::conj(xi) * ae * ae - xi * ae.adjoint() * ae.adjoint()));
  const cmat got = e_frame_squeeze(SqueezeParam(0.5, 0.4), f, dim).matrix();
  EXPECT_LT((got - ref).topLeftCorner(k, k).cwiseAbs().maxCoeff(), 1e-8);
}

// ---------------------------------------------------------------------------
// numerical gate

TEST(CsqzPhysical, DriveOffIsIdentity) {
  const TrapConfig trap{1.0, 0.02, 0.0};
  const DriveConfig off{0.0, 2.0, 0.0};
  PhysicalGateOptions opt;
  opt.dim = 32;
  opt.dt = 0.01;
  const PhysicalGateReport rep = csqz_physical(trap, off, 12.0, opt);
  EXPECT_NEAR(rep.process_fidelity, 1.0, 1e-8);
  EXPECT_NEAR(rep.process_fidelity_optimized, 1.0, 1e-8);
  EXPECT_EQ(rep.target.r, 0.0);
}

TEST(CsqzPhysical, ResonantGateRegression) {
  // Frozen baselines at r = 1 (dim 128, drive period / 200).
  const ResonantGate s;
  const double t = time_for_squeezing(s.d, 1.0);
  PhysicalGateOptions opt;
  opt.subspace = 1;
  const PhysicalGateReport one = csqz_physical(s.trap, s.drive, t, opt);
  EXPECT_NEAR(one.process_fidelity, 0.9930459471, 1e-7);
  EXPECT_NEAR(one.process_fidelity_optimized, 0.9978812226, 1e-7);
  EXPECT_GE(one.process_fidelity, 0.99);
  EXPECT_NEAR(one.target.r, 1.0, 1e-12);
  opt.subspace = 4;
  const PhysicalGateReport four = csqz_physical(s.trap, s.drive, t, opt);
  EXPECT_NEAR(four.process_fidelity, 0.8149755359, 1e-7);
  EXPECT_NEAR(four.process_fidelity_optimized, 0.9557766091, 1e-7);
  EXPECT_GE(four.process_fidelity_optimized, four.process_fidelity);
}

TEST(CsqzPhysical, QuadraticLatticeReachesIdealGate) {
  const ResonantGate s;
  PhysicalGateOptions opt;
  opt.model = LatticeModel::quadratic;
  const PhysicalGateReport rep = csqz_physical(s.trap, s.drive, time_for_squeezing(s.d, 1.0), opt);
  EXPECT_NEAR(rep.process_fidelity, 0.9969992106, 1e-7);
  EXPECT_GE(rep.process_fidelity, 0.99);
}

TEST(CsqzPhysical, PhaseErrorDegradation) {
  // Optimized fidelity falls monotonically with |Φ|; values frozen at r = 0.5, dim 64.
  const double frozen[] = {0.9983296876, 0.9980103850, 0.9968027761};
  double prev = 1.0;
  int i = 0;
  for (double phi : {0.0, 0.02 * pi, 0.04 * pi}) {
    const ResonantGate s(phi);
    PhysicalGateOptions opt;
    opt.dim = 64;
    const PhysicalGateReport rep = csqz_physical(s.trap, s.drive, time_for_squeezing(s.d, 0.5), opt);
    EXPECT_NEAR(rep.process_fidelity_optimized, frozen[i++], 1e-7) << "phi=" << phi;
    EXPECT_LT(rep.process_fidelity_optimized, prev);
    prev = rep.process_fidelity_optimized;
  }
}

TEST(CsqzPhysical, SubspaceValidation) {
  const ResonantGate s;
  PhysicalGateOptions opt;
  opt.dim = 16;
  opt.subspace = 0;
  EXPECT_THROW(csqz_physical(s.trap, s.drive, 1.0, opt), invalid_dimension);
  opt.subspace = 17;
  EXPECT_THROW(csqz_physical(s.trap, s.drive, 1.0, opt), invalid_dimension);
}

// ---------------------------------------------------------------------------
// measurement

TEST(Measurement, PureBlockIsCertain) {
  const JointState s = basis_joint(Branch::g, 3, 8);
  const ProtocolOutcome o = measure_internal(s, 12345);
  EXPECT_EQ(o.branch, Branch::g);
  EXPECT_EQ(o.probability, 1.0);
  EXPECT_EQ(o.post_state[3], complex(1.0));
  const auto both = measure_internal_both(s);
  EXPECT_EQ(both[1].probability, 0.0);
}

TEST(Measurement, BothBranchesSumToOne) {
  cvec v = cvec::Random(20);
  v.normalize();
  const auto both = measure_internal_both(JointState(v), kFrameHe);
  EXPECT_NEAR(both[0].probability + both[1].probability, 1.0, 1e-14);
  EXPECT_NEAR(both[0].post_state.norm(), 1.0, 1e-14);
  EXPECT_NEAR(both[1].post_state.norm(), 1.0, 1e-14);
  EXPECT_EQ(both[0].frame_tag, kFrameHe);
}

TEST(Measurement, SeededAndReproducible) {
  const double h = 1.0 / std::sqrt(2.0);
  const JointState s = JointState::from_blocks(MotionalState(h * MotionalState::vacuum(4).amplitudes()),
                                               MotionalState(h * MotionalState::vacuum(4).amplitudes()));
  std::set<Branch> seen;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const ProtocolOutcome a = measure_internal(s, seed);
    const ProtocolOutcome b = measure_internal(s, seed);
    EXPECT_EQ(a.branch, b.branch);
    seen.insert(a.branch);
  }
  EXPECT_EQ(seen.size(), 2u);
}

TEST(ProtocolRngType, StreamsAreReproducibleAndDistinct) {
  ProtocolRng a(99), b(99);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  ProtocolRng root(7);
  ProtocolRng c1 = root.split(1), c1_again = root.split(1), c2 = root.split(2);
  const double u1 = c1.uniform();
  EXPECT_EQ(u1, c1_again.uniform());
  EXPECT_NE(u1, c2.uniform());
}

TEST(BranchProbability, MatchesNormalizationAndSumsToOne) {
  for (double r = 0.0; r <= 3.0; r += 0.125) {
    const double pe = xstate_branch_probability(Parity::even, r);
    const double c = 1.0 / std::sqrt(std::cosh(2.0 * r));
    EXPECT_NEAR(pe, (1.0 + c) / 2.0, 1e-12);
    if (r > 0.0) {
      const double pg = xstate_branch_probability(Parity::odd, r);
      EXPECT_NEAR(pg, (1.0 - c) / 2.0, 1e-12);
      EXPECT_NEAR(pe + pg, 1.0, 1e-10);
      // (2 ± 2c)/8 only accounts for half of the probability.
      EXPECT_NEAR((2.0 + 2.0 * c) / 8.0 + (2.0 - 2.0 * c) / 8.0, 0.5, 1e-15);
    }
  }
}

TEST(BranchProbability, LargeSqueezingEqualizesBranches) {
  EXPECT_NEAR(xstate_branch_probability(Parity::even, 8.0), 0.5, 1e-3);
  EXPECT_NEAR(xstate_branch_probability(Parity::odd, 8.0), 0.5, 1e-3);
}

TEST(BranchProbability, MonteCarloFrequency) {
  const double r = 1.0;
  const double p = xstate_branch_probability(Parity::odd, r);
  const std::size_t trials = 10000;
  ProtocolRng root(20240601);
  std::size_t count = 0;
  for (std::size_t k = 0; k < trials; ++k) {
    ProtocolRng rng = root.split(k);
    if (rng.uniform() < p) ++count;
  }
  const double sigma = std::sqrt(trials * p * (1.0 - p));
  EXPECT_LT(std::abs(static_cast<double>(count) - trials * p), 3.0 * sigma);
}

// ---------------------------------------------------------------------------
// X-state preparation

TEST(PrepareXState, IdealBranchesAreXStates) {
  const double r = 1.0;
  const std::size_t dim = 128;
  const XStateRun run = prepare_xstate(r, dim, ProtocolMode::ideal, 1);
  EXPECT_GE(run.fidelity_to_analytic[1], 1.0 - 1e-9);
  EXPECT_GE(run.fidelity_to_analytic[0], 1.0 - 1e-9);
  EXPECT_LT(std::abs(run.branches[0].post_state[0]), 1e-10);
  EXPECT_NEAR(run.branches[1].probability, xstate_branch_probability(Parity::even, r), 1e-10);
  EXPECT_NEAR(run.branches[0].probability, xstate_branch_probability(Parity::odd, r), 1e-10);
  EXPECT_EQ(run.branches[0].branch, Branch::g);
  EXPECT_EQ(run.branches[1].branch, Branch::e);
  EXPECT_EQ(run.branches[1].frame_tag, kFrameHe);
}

TEST(PrepareXState, TranscriptSteps) {
  const XStateRun run = prepare_xstate(0.5, 64, ProtocolMode::ideal, 3);
  ASSERT_EQ(run.steps.size(), 6u);
  EXPECT_EQ(run.steps.front().label.substr(0, 2), "i:");
  EXPECT_EQ(run.steps.back().label.substr(0, 3), "vi:");
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(run.steps[i].norm_g, 0.5, 1e-12) << run.steps[i].label;
    EXPECT_NEAR(run.steps[i].norm_e, 0.5, 1e-12) << run.steps[i].label;
  }
  EXPECT_LE(run.steps[1].top_populations.size(), 10u);
}

TEST(PrepareXState, ParitySupport) {
  const XStateRun run = prepare_xstate(1.5, 256, ProtocolMode::ideal, 0);
  for (std::size_t n = 0; n < 256; ++n) {
    if (n % 4 != 2) EXPECT_LT(std::abs(run.branches[0].post_state[n]), 1e-10) << "n=" << n;
    if (n % 4 != 0) EXPECT_LT(std::abs(run.branches[1].post_state[n]), 1e-10) << "n=" << n;
  }
}

TEST(PrepareXState, WeakSqueezingFavoursEvenBranch) {
  const XStateRun run = prepare_xstate(0.25, 48, ProtocolMode::ideal, 0);
  const double c = 1.0 / std::sqrt(std::cosh(0.5));
  EXPECT_NEAR(run.branches[0].probability, (1.0 - c) / 2.0, 1e-10);
  EXPECT_LT(run.branches[0].probability, 0.05);
  EXPECT_GT(run.branches[1].probability, 0.95);
}

TEST(PrepareXState, SampledBranchFollowsSeed) {
  const XStateRun a = prepare_xstate(1.0, 128, ProtocolMode::ideal, 42);
  const XStateRun b = prepare_xstate(1.0, 128, ProtocolMode::ideal, 42);
  EXPECT_EQ(a.sampled.branch, b.sampled.branch);
  ProtocolRng rng(42);
  EXPECT_EQ(a.sampled.branch, rng.uniform() < a.branches[0].probability ? Branch::g : Branch::e);
}

TEST(PrepareXState, PhysicalModeRegression) {
  // Frozen: full lattice, η = 0.02, ε = 1, resonant drive, dim 128.
  PhysicalSetup setup;
  setup.trap = TrapConfig{1.0, 0.02, 0.0};
  setup.gate.dim = 128;
  const XStateRun half = prepare_xstate(0.5, 128, ProtocolMode::physical, 5, setup);
  EXPECT_NEAR(half.branches[0].probability, 0.0948724993, 1e-7);
  EXPECT_NEAR(half.fidelity_to_analytic[0], 0.9981817871, 1e-7);
  EXPECT_NEAR(half.fidelity_to_analytic[1], 0.9997443028, 1e-7);
  EXPECT_NEAR(half.branches[0].probability + half.branches[1].probability, 1.0, 1e-10);
  const XStateRun one = prepare_xstate(1.0, 128, ProtocolMode::physical, 5, setup);
  EXPECT_NEAR(one.fidelity_to_analytic[0], 0.9673758371, 1e-7);
  EXPECT_NEAR(one.fidelity_to_analytic[1], 0.9873040684, 1e-7);
  // The quadratic lattice isolates the non-linearity.
  setup.gate.model = LatticeModel::quadratic;
  const XStateRun quad = prepare_xstate(1.0, 128, ProtocolMode::physical, 5, setup);
  EXPECT_GT(quad.fidelity_to_analytic[0], 0.998);
  EXPECT_GT(quad.fidelity_to_analytic[1], 0.999);
}

TEST(PrepareXState, Validation) {
  EXPECT_THROW(prepare_xstate(-0.1, 32, ProtocolMode::ideal, 0), std::invalid_argument);
  EXPECT_THROW(prepare_xstate(0.5, 32, ProtocolMode::physical, 0), std::invalid_argument);
}
