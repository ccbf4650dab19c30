#pragma once

// Shared aliases and small numeric helpers used across the library.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace phaselim {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

inline constexpr double pi = 3.14159265358979323846;

// sinh(x)/x, continuous through x = 0.
inline double sinch(double x) {
  if (std::abs(x) < 1e-6) {
    double x2 = x * x;
    return 1.0 + x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sinh(x) / x;
}

// log(n!) for non-negative integer n.
inline double log_factorial(long long n) {
  if (n < 0) throw std::domain_error("log_factorial: negative argument");
  return std::lgamma(static_cast<double>(n) + 1.0);
}

// log of the binomial coefficient C(n, k).
inline double log_choose(long long n, long long k) {
  if (k < 0 || k > n) throw std::domain_error("log_choose: k outside [0, n]");
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void require_finite(double x, const std::string& name) {
  if (!std::isfinite(x)) throw std::invalid_argument(name + " must be finite");
}

inline void require_nonneg(double x, const std::string& name) {
  require_finite(x, name);
  if (x < 0.0) throw std::invalid_argument(name + " must be non-negative");
}

// True when 2*x is an integer to within rounding noise (spin quantum numbers
// are integers or half-integers).
inline bool is_half_integer(double x) {
  return std::abs(2.0 * x - std::llround(2.0 * x)) < 1e-9;
}

}  // namespace detail

}  // namespace phaselim
