// fock_core.hpp
// Truncated Fock-space states and operators: ladder operators, squeezing and
// displacement, and the closed-form squeezed / X-state expansions.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace xsq {

using complex = std::complex<double>;
using cvec = Eigen::VectorXcd;
using cmat = Eigen::MatrixXcd;
using Index = Eigen::Index;

inline constexpr double pi = std::numbers::pi;

enum class Parity { even, odd };

inline const char* to_string(Parity p) { return p == Parity::even ? "even" : "odd"; }

// xi = r e^{i theta}
struct SqueezeParam {
  double r = 0.0;
  double theta = 0.0;

  SqueezeParam() = default;
  SqueezeParam(double r_, double theta_) : r(r_), theta(theta_) {
    if (!(r >= 0.0)) throw std::invalid_argument("SqueezeParam: r must be >= 0");
  }

  complex xi() const { return std::polar(r, theta); }
};

// alpha = x + i p
struct PhasePoint {
  double x = 0.0;
  double p = 0.0;

  complex alpha() const { return {x, p}; }
};

namespace detail {

inline void require_dim(std::size_t dim) {
  if (dim < 2) throw invalid_dimension("Fock truncation must be >= 2, got " + std::to_string(dim));
}

// e^{i theta}, exact on quarter turns so that phase powers stay exact.
inline complex unit_phase(double theta) {
  const double quarter = theta / (pi / 2);
  const double k = std::round(quarter);
  if (std::abs(quarter - k) < 1e-14) {
    switch (((static_cast<long long>(k) % 4) + 4) % 4) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, 1.0};
      case 2: return {-1.0, 0.0};
      default: return {0.0, -1.0};
    }
  }
  return std::polar(1.0, theta);
}

// exp(K) for an anti-Hermitian tridiagonal generator with zero diagonal,
// K(k,k+1) = upper[k], K(k+1,k) = -conj(upper[k]).
// iK is Hermitian; a diagonal phase similarity makes it real symmetric, so the
// exponential comes from one real tridiagonal eigendecomposition and is
// unitary to rounding.
inline cmat exp_skew_tridiagonal(std::span<const complex> upper) {
  const Index n = static_cast<Index>(upper.size()) + 1;
  if (n == 1) return cmat::Identity(1, 1);

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  std::vector<complex> phase(static_cast<std::size_t>(n));
  phase[0] = 1.0;
  for (Index k = 0; k + 1 < n; ++k) {
    const complex h = complex(0.0, 1.0) * upper[static_cast<std::size_t>(k)];
    const double mag = std::abs(h);
    sub(k) = mag;
    phase[static_cast<std::size_t>(k + 1)] =
        mag > 0.0 ? std::conj(h / mag) * phase[static_cast<std::size_t>(k)]
                  : phase[static_cast<std::size_t>(k)];
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  const Eigen::MatrixXd& v = solver.eigenvectors();
  const Eigen::VectorXd& lambda = solver.eigenvalues();

  // exp(-i T) = V (cos L - i sin L) V^T
  const Eigen::MatrixXd c = v * lambda.array().cos().matrix().asDiagonal() * v.transpose();
  const Eigen::MatrixXd s = v * lambda.array().sin().matrix().asDiagonal() * v.transpose();

  cmat out(n, n);
  for (Index j = 0; j < n; ++j) {
    const complex pj = std::conj(phase[static_cast<std::size_t>(j)]);
    for (Index i = 0; i < n; ++i) {
      out(i, j) = phase[static_cast<std::size_t>(i)] * complex(c(i, j), -s(i, j)) * pj;
    }
  }
  return out;
}

// log of sqrt((2m)!) / (m! 2^m)
inline double log_even_coefficient(std::size_t m) {
  const double md = static_cast<double>(m);
  return 0.5 * std::lgamma(2.0 * md + 1.0) - std::lgamma(md + 1.0) - md * std::log(2.0);
}

}  // namespace detail

class MotionalState {
 public:
  explicit MotionalState(cvec amplitudes) : amps_(std::move(amplitudes)) {
    detail::require_dim(static_cast<std::size_t>(amps_.size()));
  }

  static MotionalState fock(std::size_t n, std::size_t dim) {
    detail::require_dim(dim);
    if (n >= dim) throw invalid_dimension("Fock level outside truncation");
    cvec v = cvec::Zero(static_cast<Index>(dim));
    v(static_cast<Index>(n)) = 1.0;
    return MotionalState(std::move(v));
  }

  static MotionalState vacuum(std::size_t dim) { return fock(0, dim); }

  const cvec& amplitudes() const { return amps_; }
  std::size_t dim() const { return static_cast<std::size_t>(amps_.size()); }
  complex operator[](std::size_t n) const { return amps_(static_cast<Index>(n)); }
  double norm() const { return amps_.norm(); }

  MotionalState normalized() const {
    const double nrm = norm();
    if (nrm == 0.0) throw std::invalid_argument("cannot normalize the zero vector");
    return MotionalState(amps_ / nrm);
  }

  // Zero-pads or truncates to a new dimension.
  MotionalState resized(std::size_t dim) const {
    detail::require_dim(dim);
    cvec v = cvec::Zero(static_cast<Index>(dim));
    const Index keep = std::min<Index>(v.size(), amps_.size());
    v.head(keep) = amps_.head(keep);
    return MotionalState(std::move(v));
  }

 private:
  cvec amps_;
};

class FockOperator {
 public:
  explicit FockOperator(cmat matrix) : m_(std::move(matrix)) {
    if (m_.rows() != m_.cols()) throw invalid_dimension("FockOperator must be square");
    detail::require_dim(static_cast<std::size_t>(m_.rows()));
  }

  static FockOperator identity(std::size_t dim) {
    detail::require_dim(dim);
    return FockOperator(cmat::Identity(static_cast<Index>(dim), static_cast<Index>(dim)));
  }

  const cmat& matrix() const { return m_; }
  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  complex operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Index>(i), static_cast<Index>(j));
  }

  FockOperator adjoint() const { return FockOperator(m_.adjoint()); }

  MotionalState apply(const MotionalState& s) const {
    if (s.dim() != dim()) throw dimension_mismatch("operator/state dimension mismatch");
    return MotionalState(m_ * s.amplitudes());
  }

  friend FockOperator operator*(const FockOperator& a, const FockOperator& b) {
    if (a.dim() != b.dim()) throw dimension_mismatch("operator dimension mismatch");
    return FockOperator(a.m_ * b.m_);
  }

 private:
  cmat m_;
};

// Rows/columns below this index form the block that unitarity checks use;
// the top 10% sits against the truncation boundary.
inline std::size_t protected_extent(std::size_t dim) {
  return static_cast<std::size_t>(std::floor(0.9 * static_cast<double>(dim)));
}

inline std::pair<FockOperator, FockOperator> ladder_ops(std::size_t dim) {
  detail::require_dim(dim);
  const Index n = static_cast<Index>(dim);
  cmat a = cmat::Zero(n, n);
  for (Index k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  cmat ad = a.adjoint();
  return {FockOperator(std::move(a)), FockOperator(std::move(ad))};
}

inline FockOperator number_op(std::size_t dim) {
  detail::require_dim(dim);
  cmat m = cmat::Zero(static_cast<Index>(dim), static_cast<Index>(dim));
  for (Index k = 0; k < m.rows(); ++k) m(k, k) = static_cast<double>(k);
  return FockOperator(std::move(m));
}

// Quadratures X = (a + a†)/√2 and P = i(a† − a)/√2.
inline FockOperator position_op(std::size_t dim) {
  auto [a, ad] = ladder_ops(dim);
  return FockOperator((a.matrix() + ad.matrix()) / std::sqrt(2.0));
}

inline FockOperator momentum_op(std::size_t dim) {
  auto [a, ad] = ladder_ops(dim);
  return FockOperator(complex(0.0, 1.0) * (ad.matrix() - a.matrix()) / std::sqrt(2.0));
}

// S(xi) = exp((xi* a² − xi a†²)/2) on the truncated space. The generator only
// links n and n±2, so each parity sector is an independent tridiagonal block.
inline FockOperator squeeze_op(const SqueezeParam& xi, std::size_t dim) {
  detail::require_dim(dim);
  const complex z = xi.r * detail::unit_phase(xi.theta);
  const Index n = static_cast<Index>(dim);
  cmat out = cmat::Zero(n, n);
  for (Index parity = 0; parity < 2; ++parity) {
    const Index size = (n - parity + 1) / 2;
    if (size == 0) continue;
    std::vector<complex> upper;
    upper.reserve(static_cast<std::size_t>(std::max<Index>(size - 1, 0)));
    for (Index j = 0; j + 1 < size; ++j) {
      const double lo = static_cast<double>(2 * j + parity);
      upper.push_back(0.5 * std::conj(z) * std::sqrt((lo + 1.0) * (lo + 2.0)));
    }
    const cmat block = detail::exp_skew_tridiagonal(upper);
    for (Index j = 0; j < size; ++j)
      for (Index i = 0; i < size; ++i) out(2 * i + parity, 2 * j + parity) = block(i, j);
  }
  return FockOperator(std::move(out));
}

// D(alpha) = exp(alpha a† − alpha* a)
inline FockOperator displacement_op(const PhasePoint& alpha, std::size_t dim) {
  detail::require_dim(dim);
  const complex a = alpha.alpha();
  std::vector<complex> upper(dim - 1);
  for (std::size_t k = 0; k + 1 < dim; ++k)
    upper[k] = -std::conj(a) * std::sqrt(static_cast<double>(k + 1));
  return FockOperator(detail::exp_skew_tridiagonal(upper));
}

// |c_{2m}|² of the squeezed vacuum.
inline double squeezed_population(double r, std::size_t m) {
  if (r == 0.0) return m == 0 ? 1.0 : 0.0;
  const double t = std::tanh(r);
  const double md = static_cast<double>(m);
  return std::exp(2.0 * detail::log_even_coefficient(m) + 2.0 * md * std::log(t) -
                  std::log(std::cosh(r)));
}

// Probability the exact squeezed vacuum puts on levels n >= dim.
inline double squeezed_tail_probability(double r, std::size_t dim) {
  if (r == 0.0) return dim >= 1 ? 0.0 : 1.0;
  std::size_t m = (dim + 1) / 2;
  const double t2 = std::tanh(r) * std::tanh(r);
  double term = squeezed_population(r, m);
  double total = 0.0;
  // term ratio (2m+1)/(2m+2) t² < 1
  while (term > 0.0) {
    total += term;
    if (term < total * 1e-17) break;
    const double md = static_cast<double>(m);
    term *= (2.0 * md + 1.0) / (2.0 * md + 2.0) * t2;
    ++m;
  }
  return total;
}

// Smallest dimension whose squeezed-vacuum tail is below tail_tol.
inline std::size_t recommended_dim(double r, double tail_tol = 1e-10) {
  if (r < 0.0) throw std::invalid_argument("recommended_dim: r must be >= 0");
  std::size_t lo = 2, hi = 4;
  while (squeezed_tail_probability(r, hi) >= tail_tol) {
    lo = hi;
    hi *= 2;
    if (hi > (std::size_t{1} << 22)) throw truncation_error("squeezing too large to truncate");
  }
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (squeezed_tail_probability(r, mid) < tail_tol) hi = mid;
    else lo = mid + 1;
  }
  return std::max<std::size_t>(lo, 2);
}

// Top `fraction` of the basis must carry less than `tol` probability.
inline double top_tail_probability(const MotionalState& s, double fraction) {
  const std::size_t dim = s.dim();
  const std::size_t count =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(dim))));
  return s.amplitudes().tail(static_cast<Index>(count)).squaredNorm();
}

inline void check_truncation_health(const MotionalState& s, double fraction = 0.05, double tol = 1e-8) {
  const double top = top_tail_probability(s, fraction);
  if (top >= tol)
    throw truncation_error("truncation health: top " + num_text(fraction * 100) +
                           "% of Fock levels carry probability " + num_text(top));
}

namespace detail {

// Unnormalized closed-form coefficients of |xi>, tail check included.
inline cvec squeezed_coefficients(const SqueezeParam& xi, std::size_t dim) {
  require_dim(dim);
  const double tail = squeezed_tail_probability(xi.r, dim);
  if (tail > 1e-10)
    throw truncation_error("squeezed state r=" + num_text(xi.r) + " loses " +
                           num_text(tail) + " probability beyond dim=" + std::to_string(dim));
  cvec c = cvec::Zero(static_cast<Index>(dim));
  const double t = std::tanh(xi.r);
  const double lead = 1.0 / std::sqrt(std::cosh(xi.r));
  const complex step = -unit_phase(xi.theta);
  complex phase = 1.0;
  for (std::size_t m = 0; 2 * m < dim; ++m) {
    double mag;
    if (m == 0) mag = lead;
    else if (t == 0.0) mag = 0.0;
    else mag = lead * std::exp(log_even_coefficient(m) + static_cast<double>(m) * std::log(t));
    c(static_cast<Index>(2 * m)) = mag * phase;
    phase *= step;
  }
  return c;
}

}  // namespace detail

// Closed-form |xi> in the number basis; odd levels are exactly zero.
inline MotionalState squeezed_state_analytic(const SqueezeParam& xi, std::size_t dim) {
  cvec c = detail::squeezed_coefficients(xi, dim);
  c /= c.norm();
  MotionalState s(std::move(c));
  check_truncation_health(s);
  return s;
}

// |X±> = N±(|xi> ± |xi e^{i pi}>) with xi = r e^{i theta}.
inline MotionalState x_state(Parity parity, double r, std::size_t dim, double theta = 0.0) {
  if (parity == Parity::odd && !(r > 0.0))
    throw std::invalid_argument("odd X-state requires r > 0");
  const cvec plus = detail::squeezed_coefficients(SqueezeParam(r, theta), dim);
  const cvec minus = detail::squeezed_coefficients(SqueezeParam(r, theta + pi), dim);
  cvec c = parity == Parity::even ? cvec(plus + minus) : cvec(plus - minus);
  c /= c.norm();
  MotionalState s(std::move(c));
  check_truncation_health(s);
  return s;
}

// N± = 1 / sqrt(2 ± 2/sqrt(cosh 2r))
inline double x_state_normalization(Parity parity, double r) {
  const double overlap = 1.0 / std::sqrt(std::cosh(2.0 * r));
  const double sign = parity == Parity::even ? 1.0 : -1.0;
  return 1.0 / std::sqrt(2.0 + sign * 2.0 * overlap);
}

inline complex inner_product(const MotionalState& a, const MotionalState& b) {
  if (a.dim() != b.dim()) throw dimension_mismatch("inner_product: dimension mismatch");
  return a.amplitudes().dot(b.amplitudes());  // Eigen conjugates the left operand
}

inline double fidelity(const MotionalState& a, const MotionalState& b) {
  return std::norm(inner_product(a, b));
}

inline std::vector<double> phonon_distribution(const MotionalState& s) {
  std::vector<double> p(s.dim());
  for (std::size_t n = 0; n < s.dim(); ++n) p[n] = std::norm(s[n]);
  return p;
}

inline complex expectation(const FockOperator& op, const MotionalState& s) {
  return s.amplitudes().dot(op.matrix() * s.amplitudes());
}

// Which parity sector the state lives in, if any (amplitudes below tol count as zero).
inline std::optional<Parity> parity_of(const MotionalState& s, double tol = 1e-10) {
  double even = 0.0, odd = 0.0;
  for (std::size_t n = 0; n < s.dim(); ++n) {
    double& slot = n % 2 == 0 ? even : odd;
    slot = std::max(slot, std::abs(s[n]));
  }
  if (odd <= tol && even > tol) return Parity::even;
  if (even <= tol && odd > tol) return Parity::odd;
  return std::nullopt;
}

}  // namespace xsq
