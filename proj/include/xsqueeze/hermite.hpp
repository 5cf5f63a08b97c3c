// hermite.hpp
// Harmonic-oscillator eigenfunctions sampled on a set of points.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace xsq {

// Column n holds phi_n(x) = s^{-1/2} h_n(x/s), where h_n is the normalized
// Hermite function and s the oscillator length in the grid's units.
// The three-term recurrence runs on rescaled values with a tracked log-scale,
// so high orders far from the origin neither overflow nor flush to zero early.
inline Eigen::MatrixXd oscillator_functions(std::size_t count, std::span<const double> xs,
                                            double scale = 1.0) {
  const auto npts = static_cast<Eigen::Index>(xs.size());
  const auto nfun = static_cast<Eigen::Index>(count);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(npts, nfun);
  if (nfun == 0) return out;

  const double log_pref = -0.25 * std::log(std::numbers::pi) - 0.5 * std::log(scale);
  constexpr double big = 1e150;
  const double log_big = std::log(big);

  for (Eigen::Index i = 0; i < npts; ++i) {
    const double y = xs[static_cast<std::size_t>(i)] / scale;
    double log_scale = log_pref - 0.5 * y * y;
    double prev = 0.0;
    double cur = 1.0;
    out(i, 0) = std::exp(log_scale);
    for (Eigen::Index n = 1; n < nfun; ++n) {
      const double nd = static_cast<double>(n);
      const double next = std::sqrt(2.0 / nd) * y * cur - std::sqrt((nd - 1.0) / nd) * prev;
      prev = cur;
      cur = next;
      if (std::abs(cur) > big) {
        cur /= big;
        prev /= big;
        log_scale += log_big;
      }
      out(i, n) = cur == 0.0 ? 0.0 : std::copysign(std::exp(std::log(std::abs(cur)) + log_scale), cur);
    }
  }
  return out;
}

// psi(x) = sum_n c_n phi_n(x) at each point, without storing the basis.
inline std::vector<std::complex<double>> oscillator_expansion(const Eigen::VectorXcd& coeffs,
                                                              std::span<const double> xs,
                                                              double scale = 1.0) {
  std::vector<std::complex<double>> out(xs.size());
  const Eigen::Index nfun = coeffs.size();
  if (nfun == 0) return out;

  const double log_pref = -0.25 * std::log(std::numbers::pi) - 0.5 * std::log(scale);
  constexpr double big = 1e150;
  const double log_big = std::log(big);

  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double y = xs[i] / scale;
    double log_scale = log_pref - 0.5 * y * y;
    double prev = 0.0;
    double cur = 1.0;
    // Partial sums are kept in the running scale too, so they rescale with it.
    std::complex<double> acc = coeffs(0);
    for (Eigen::Index n = 1; n < nfun; ++n) {
      const double nd = static_cast<double>(n);
      const double next = std::sqrt(2.0 / nd) * y * cur - std::sqrt((nd - 1.0) / nd) * prev;
      prev = cur;
      cur = next;
      if (std::abs(cur) > big) {
        cur /= big;
        prev /= big;
        acc /= big;
        log_scale += log_big;
      }
      acc += coeffs(n) * cur;
    }
    out[i] = acc == 0.0 ? acc : acc * std::exp(log_scale);
  }
  return out;
}

}  // namespace xsq
