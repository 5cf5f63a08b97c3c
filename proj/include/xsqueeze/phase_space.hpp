// phase_space.hpp
// Characteristic and Wigner functions of motional states, the closed-form
// X-state characteristic function, and its zero / decay structure.
//
// Convention: alpha = x + i p, D(alpha) = exp(alpha a† − alpha* a),
// C(alpha) = <psi|D(alpha)|psi>. Quadratures are dimensionless: the
// position operator is X = (a + a†)/√2 in units of the ground-trap length.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fock_core.hpp"
#include "hermite.hpp"

namespace xsq {

// values(i, j) = C(x_values[i], p_values[j]).
struct PhaseGrid {
  std::vector<double> x_values;
  std::vector<double> p_values;
  cmat values;
  bool complex_valued = false;
  std::vector<std::string> warnings;

  std::size_t nx() const { return x_values.size(); }
  std::size_t np() const { return p_values.size(); }
  Eigen::MatrixXd real() const { return values.real(); }
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) throw std::invalid_argument("linspace: need at least one point");
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + step * static_cast<double>(i);
  v[n - 1] = hi;
  return v;
}

inline PhaseGrid make_phase_grid(double half_width, std::size_t points) {
  if (!(half_width > 0.0) || points < 2) throw std::invalid_argument("phase grid needs width > 0 and >= 2 points");
  PhaseGrid g;
  g.x_values = linspace(-half_width, half_width, points);
  g.p_values = g.x_values;
  return g;
}

// Default square grids for the X-state portraits: wide enough for the
// e^{r}-stretched lobes.
inline PhaseGrid default_phase_grid(double r) {
  return r > 1.5 ? make_phase_grid(8.0, 801) : make_phase_grid(4.0, 401);
}

namespace detail {

inline void require_monotone(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string("phase grid: empty ") + what);
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) throw std::invalid_argument(std::string("phase grid: ") + what + " not increasing");
}

}  // namespace detail

// `parity` labels the branch: even = X+ (n = 0, 4, 8, ...), odd = X- (n = 2, 6,
// 10, ...), i.e. the eigenvalue of exp(i pi n / 2). Both branches have even
// photon-number parity.
struct XStateSpec {
  Parity parity = Parity::even;
  double r = 0.0;

  XStateSpec() = default;
  XStateSpec(Parity p, double r_) : parity(p), r(r_) { validate(); }

  void validate() const {
    if (!(r >= 0.0)) throw std::invalid_argument("XStateSpec: r must be >= 0");
    if (parity == Parity::odd && !(r > 0.0)) throw std::invalid_argument("XStateSpec: odd parity requires r > 0");
  }

  double sign() const { return parity == Parity::even ? 1.0 : -1.0; }
  Parity photon_parity() const { return Parity::even; }
};

// ---------------------------------------------------------------------------
// Closed form

// C±(x,p) = 2N±² ( e^{−A}cosh B ± e^{−(x²+p²)/(2 cosh 2r)} cos(xp tanh 2r) / √cosh 2r )
// with A = (x²+p²) cosh(2r)/2, B = (x²−p²) sinh(2r)/2. e^{−A}cosh B is
// evaluated as (e^{B−A} + e^{−B−A})/2 so large r neither overflows nor cancels.
inline double char_function_closed_form(const XStateSpec& spec, double x, double p) {
  const double c = std::cosh(2.0 * spec.r);
  const double s = std::sinh(2.0 * spec.r);
  const double n = x_state_normalization(spec.parity, spec.r);
  const double rho = x * x + p * p;
  const double a = 0.5 * rho * c;
  const double b = 0.5 * (x * x - p * p) * s;
  const double diag = 0.5 * (std::exp(b - a) + std::exp(-b - a));
  const double cross = std::exp(-rho / (2.0 * c)) * std::cos(x * p * std::tanh(2.0 * spec.r)) / std::sqrt(c);
  return 2.0 * n * n * (diag + spec.sign() * cross);
}

inline PhaseGrid char_function_closed_form(const XStateSpec& spec, PhaseGrid grid) {
  spec.validate();
  detail::require_monotone(grid.x_values, "x");
  detail::require_monotone(grid.p_values, "p");
  grid.values.resize(static_cast<Index>(grid.nx()), static_cast<Index>(grid.np()));
  for (std::size_t i = 0; i < grid.nx(); ++i)
    for (std::size_t j = 0; j < grid.np(); ++j)
      grid.values(static_cast<Index>(i), static_cast<Index>(j)) =
          char_function_closed_form(spec, grid.x_values[i], grid.p_values[j]);
  grid.complex_valued = false;
  return grid;
}

// ---------------------------------------------------------------------------
// Numeric characteristic function

// Fock-matrix route for single points: D(alpha) is built in the truncated
// space, so the top-tail leak of D|psi> is reported alongside.
struct FockCharValue {
  complex value;
  double tail_leak = 0.0;
};

inline FockCharValue char_function_fock(const MotionalState& s, const PhasePoint& alpha, double leak_fraction = 0.1) {
  const MotionalState shifted = displacement_op(alpha, s.dim()).apply(s);
  return {inner_product(s, shifted), top_tail_probability(shifted, leak_fraction)};
}

struct CharFunctionOptions {
  double tail_amplitude = 1e-13;  // |psi(q)| below this (relative to max) is dropped
  double max_q_step = 0.05;
};

// Position-representation route:
//   C(x,p) = e^{−ixp} ∫ psi*(q) psi(q − √2 x) e^{i√2 p q} dq
// on a uniform q grid commensurate with the x grid, so every shift is an
// integer number of q steps. The trapezoid rule is spectrally accurate here;
// the step resolves the state's largest momentum. The x grid must be uniform;
// the p grid is arbitrary. Hermitian symmetry C(−alpha) = C(alpha)* fills the
// mirrored half of a symmetric x grid.
inline PhaseGrid char_function_numeric(const MotionalState& s, PhaseGrid grid, const CharFunctionOptions& opt = {}) {
  detail::require_monotone(grid.x_values, "x");
  detail::require_monotone(grid.p_values, "p");
  if (std::abs(s.norm() - 1.0) > 1e-9) throw std::invalid_argument("char_function_numeric: state not normalized");
  const std::size_t nx = grid.nx(), np = grid.np();

  double dx = 0.0;
  if (nx > 1) {
    dx = (grid.x_values.back() - grid.x_values.front()) / static_cast<double>(nx - 1);
    for (std::size_t i = 1; i < nx; ++i)
      if (std::abs(grid.x_values[i] - grid.x_values[i - 1] - dx) > 1e-9 * std::max(1.0, std::abs(dx)))
        throw std::invalid_argument("char_function_numeric: x grid must be uniform");
  }

  // Effective bandwidth: the highest populated level sets the momentum and
  // position extents of psi.
  std::size_t n_eff = 0;
  for (std::size_t n = 0; n < s.dim(); ++n)
    if (std::abs(s[n]) > opt.tail_amplitude) n_eff = n;
  const double k_eff = std::sqrt(2.0 * static_cast<double>(n_eff) + 1.0);
  double p_abs = 0.0;
  for (double p : grid.p_values) p_abs = std::max(p_abs, std::abs(p));
  const double h_limit = std::min(opt.max_q_step, pi / (2.0 * k_eff + std::sqrt(2.0) * p_abs + 8.0));

  std::size_t sub = 1;
  double h = h_limit;
  if (nx > 1) {
    const double base = std::sqrt(2.0) * dx;
    sub = static_cast<std::size_t>(std::ceil(base / h_limit));
    h = base / static_cast<double>(sub);
  }

  // Support of psi: beyond the classical turning point plus a margin, then
  // trimmed to where |psi| is still above the tail threshold.
  const double q_edge = k_eff + 10.0;
  const auto half = static_cast<long long>(std::ceil(q_edge / h));
  std::vector<double> qs;
  qs.reserve(static_cast<std::size_t>(2 * half + 1));
  for (long long k = -half; k <= half; ++k) qs.push_back(static_cast<double>(k) * h);
  // psi(q_k − √2 x_i) = psi(m h − √2 x_0) with m = k − half − i·sub; only the
  // m whose argument lies inside the support window are sampled.
  const double shift0 = std::sqrt(2.0) * grid.x_values.front();
  const auto m_lo = static_cast<long long>(std::floor((shift0 - q_edge) / h));
  const auto m_hi = static_cast<long long>(std::ceil((shift0 + q_edge) / h));
  std::vector<double> qs_shifted;
  qs_shifted.reserve(static_cast<std::size_t>(m_hi - m_lo + 1));
  for (long long m = m_lo; m <= m_hi; ++m) qs_shifted.push_back(static_cast<double>(m) * h - shift0);

  std::vector<complex> psi = oscillator_expansion(s.amplitudes(), qs);
  std::vector<complex> psi_shift = oscillator_expansion(s.amplitudes(), qs_shifted);

  double peak = 0.0;
  for (const auto& v : psi) peak = std::max(peak, std::abs(v));
  std::size_t lo = 0, hi = psi.size();
  while (lo < hi && std::abs(psi[lo]) < opt.tail_amplitude * peak) ++lo;
  while (hi > lo && std::abs(psi[hi - 1]) < opt.tail_amplitude * peak) --hi;
  if (lo == 0 || hi == psi.size())
    grid.warnings.push_back("position support reaches the quadrature window edge");
  const auto nq = static_cast<Index>(hi - lo);

  // Only x_i with a mirror partner −x_i need computing once.
  std::vector<std::optional<std::size_t>> mirror(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    const double target = -grid.x_values[i];
    const auto it = std::lower_bound(grid.x_values.begin(), grid.x_values.end(), target - 1e-12);
    if (it != grid.x_values.end() && std::abs(*it - target) <= 1e-12 * std::max(1.0, std::abs(target)))
      mirror[i] = static_cast<std::size_t>(it - grid.x_values.begin());
  }
  bool p_symmetric = true;
  for (std::size_t j = 0; j < np; ++j)
    if (std::abs(grid.p_values[j] + grid.p_values[np - 1 - j]) > 1e-12 * std::max(1.0, std::abs(grid.p_values[j])))
      p_symmetric = false;

  std::vector<std::size_t> work;
  for (std::size_t i = 0; i < nx; ++i)
    if (!p_symmetric || !mirror[i] || *mirror[i] >= i) work.push_back(i);

  // F(q, column) = psi*(q) psi(q − √2 x_i)
  cmat f(nq, static_cast<Index>(work.size()));
  for (std::size_t w = 0; w < work.size(); ++w) {
    const long long offset = static_cast<long long>(work[w] * sub);
    for (Index k = 0; k < nq; ++k) {
      const long long idx = static_cast<long long>(lo) + k - half - offset - m_lo;
      const complex shifted = idx >= 0 && idx < static_cast<long long>(psi_shift.size())
                                  ? psi_shift[static_cast<std::size_t>(idx)]
                                  : complex(0.0);
      f(k, static_cast<Index>(w)) = std::conj(psi[lo + static_cast<std::size_t>(k)]) * shifted;
    }
  }

  // E(p, q) = h e^{i√2 p q}, applied in row blocks to bound memory.
  cmat result(static_cast<Index>(np), static_cast<Index>(work.size()));
  const Index block = 256;
  for (Index j0 = 0; j0 < static_cast<Index>(np); j0 += block) {
    const Index rows = std::min<Index>(block, static_cast<Index>(np) - j0);
    cmat e(rows, nq);
    for (Index j = 0; j < rows; ++j) {
      const double w = std::sqrt(2.0) * grid.p_values[static_cast<std::size_t>(j0 + j)];
      for (Index k = 0; k < nq; ++k) e(j, k) = h * std::polar(1.0, w * qs[lo + static_cast<std::size_t>(k)]);
    }
    result.middleRows(j0, rows).noalias() = e * f;
  }

  grid.values.resize(static_cast<Index>(nx), static_cast<Index>(np));
  for (std::size_t w = 0; w < work.size(); ++w) {
    const std::size_t i = work[w];
    const double x = grid.x_values[i];
    for (std::size_t j = 0; j < np; ++j) {
      const complex v = std::polar(1.0, -x * grid.p_values[j]) * result(static_cast<Index>(j), static_cast<Index>(w));
      grid.values(static_cast<Index>(i), static_cast<Index>(j)) = v;
      if (p_symmetric && mirror[i] && *mirror[i] != i)
        grid.values(static_cast<Index>(*mirror[i]), static_cast<Index>(np - 1 - j)) = std::conj(v);
    }
  }
  grid.complex_valued = true;
  if (std::abs(grid.values.cwiseAbs().maxCoeff()) > 1.0 + 1e-9)
    grid.warnings.push_back("|C| exceeds 1: quadrature under-resolved");
  return grid;
}

// ---------------------------------------------------------------------------
// Wigner function

// For a photon-number parity eigenstate, W(alpha) = ±(2/pi) C(2 alpha) with the
// sign of (-1)^n. The 2/pi makes ∫W dx dp = 1 with measure dx dp, alpha = x + i p.
inline constexpr const char* kWignerConvention =
    "W(x,p) = (2/pi) * photon_parity * C(2x, 2p); integral of W over dx dp equals 1";

inline double wigner_prefactor(Parity parity) { return (parity == Parity::even ? 2.0 : -2.0) / pi; }

// (2/pi) sum_n (-1)^n P(n): the origin value for any state.
inline double wigner_origin(const MotionalState& s) {
  double acc = 0.0;
  for (std::size_t n = 0; n < s.dim(); ++n) acc += (n % 2 == 0 ? 1.0 : -1.0) * std::norm(s[n]);
  return 2.0 / pi * acc;
}

inline Parity require_parity(const MotionalState& s, double tol = 1e-10) {
  const auto parity = parity_of(s, tol);
  if (!parity) throw parity_violation("state is not a parity eigenstate (both sectors above " + num_text(tol) + ")");
  return *parity;
}

namespace detail {

inline PhaseGrid doubled(const PhaseGrid& g) {
  PhaseGrid d;
  for (double x : g.x_values) d.x_values.push_back(2.0 * x);
  for (double p : g.p_values) d.p_values.push_back(2.0 * p);
  return d;
}

inline PhaseGrid halved_back(const PhaseGrid& src, PhaseGrid c2, double prefactor) {
  c2.x_values = src.x_values;
  c2.p_values = src.p_values;
  c2.values *= prefactor;
  return c2;
}

}  // namespace detail

inline PhaseGrid wigner_from_parity(const MotionalState& s, const PhaseGrid& grid, const CharFunctionOptions& opt = {}) {
  const Parity parity = require_parity(s);
  return detail::halved_back(grid, char_function_numeric(s, detail::doubled(grid), opt), wigner_prefactor(parity));
}

inline PhaseGrid wigner_from_parity(const XStateSpec& spec, const PhaseGrid& grid) {
  return detail::halved_back(grid, char_function_closed_form(spec, detail::doubled(grid)), wigner_prefactor(spec.photon_parity()));
}

inline double wigner_point(const XStateSpec& spec, double x, double p) {
  return wigner_prefactor(spec.photon_parity()) * char_function_closed_form(spec, 2.0 * x, 2.0 * p);
}

// ---------------------------------------------------------------------------
// Diagonal zeros

// On x² = p² = u: C± = 0  ⇔  √cosh2r · e^{−u sinh²2r / cosh2r} = ∓cos(u tanh2r).
inline double diagonal_zero_function(const XStateSpec& spec, double u) {
  const double c = std::cosh(2.0 * spec.r);
  const double s = std::sinh(2.0 * spec.r);
  return std::sqrt(c) * std::exp(-u * s * s / c) + spec.sign() * std::cos(u * std::tanh(2.0 * spec.r));
}

struct ZeroSearch {
  double u_max = 25.0;
  double du = 1e-4;
};

// Every sign change of the zero function in u ∈ (0, u_max], refined by
// bisection to adjacent doubles; returned as x = √u (the diagonal point (x, ±x)).
inline std::vector<double> diagonal_zeros(const XStateSpec& spec, const ZeroSearch& range = {}) {
  spec.validate();
  if (!(range.u_max > 0.0) || !(range.du > 0.0)) throw std::invalid_argument("diagonal_zeros: bad search range");
  std::vector<double> roots;
  auto g = [&](double u) { return diagonal_zero_function(spec, u); };
  const auto steps = static_cast<std::size_t>(std::ceil(range.u_max / range.du));
  double a = range.du * 1e-3;
  double ga = g(a);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double b = std::min(range.u_max, static_cast<double>(k) * range.du);
    const double gb = g(b);
    if (gb == 0.0) {
      roots.push_back(std::sqrt(b));
    } else if ((ga < 0.0) != (gb < 0.0) && ga != 0.0) {
      double lo = a, hi = b, glo = ga;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double gm = g(mid);
        if ((gm < 0.0) == (glo < 0.0)) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(std::sqrt(0.5 * (lo + hi)));
    }
    a = b;
    ga = gb;
  }
  return roots;
}

// ---------------------------------------------------------------------------
// On-axis decay

enum class Axis { x, p };

struct DecayProfile {
  double origin = 0.0;    // C(0)
  double plateau = 0.0;   // C at unit distance when a plateau window exists, else 0
  double level = 0.5;     // crossing level (origin + plateau)/2
  double crossing = 0.0;  // first axis point where C drops below `level`
  double window_lo = 0.0;  // plateau window [3e^{−r}, e^{r}/3], empty for r < ln 3
  double window_hi = 0.0;
  double plateau_variation = 0.0;  // (max − min)/max of C over the window
};

inline double on_axis(const XStateSpec& spec, Axis axis, double t) {
  return axis == Axis::x ? char_function_closed_form(spec, t, 0.0) : char_function_closed_form(spec, 0.0, t);
}

inline DecayProfile quadrature_decay_profile(const XStateSpec& spec, Axis axis) {
  spec.validate();
  DecayProfile prof;
  prof.origin = on_axis(spec, axis, 0.0);
  prof.window_lo = 3.0 * std::exp(-spec.r);
  prof.window_hi = std::exp(spec.r) / 3.0;
  if (prof.window_hi > prof.window_lo) {
    prof.plateau = on_axis(spec, axis, 1.0);
    double mn = prof.plateau, mx = prof.plateau;
    const std::size_t samples = 2000;
    for (std::size_t k = 0; k <= samples; ++k) {
      const double t = prof.window_lo * std::pow(prof.window_hi / prof.window_lo, static_cast<double>(k) / samples);
      const double v = on_axis(spec, axis, t);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    prof.plateau_variation = (mx - mn) / mx;
  } else {
    prof.window_lo = prof.window_hi = 0.0;
  }
  prof.level = 0.5 * (prof.origin + prof.plateau);

  const double step = std::min(1.0, std::exp(-spec.r)) / 200.0;
  const double limit = 20.0 * std::max(1.0, std::exp(spec.r));
  double a = 0.0;
  double fa = prof.origin - prof.level;
  for (double b = step; b <= limit; b += step) {
    const double fb = on_axis(spec, axis, b) - prof.level;
    if (fb < 0.0 && fa >= 0.0) {
      double lo = a, hi = b;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (on_axis(spec, axis, mid) - prof.level >= 0.0) lo = mid;
        else hi = mid;
      }
      prof.crossing = 0.5 * (lo + hi);
      return prof;
    }
    a = b;
    fa = fb;
  }
  throw std::runtime_error("quadrature_decay_profile: no crossing found");
}

}  // namespace xsq
