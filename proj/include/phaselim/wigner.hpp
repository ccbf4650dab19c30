#pragma once

// Wigner small-d rotation matrix elements d^S_{m,mp}(beta) for spin S up to
// a few hundred.
//
// The textbook alternating factorial sum cancels catastrophically already
// around S ~ 30, so the element is evaluated through the Jacobi-polynomial
// representation instead:
//
//   d^j_{a,b}(beta) = xi * sqrt( s! (s+mu+nu)! / ((s+mu)! (s+nu)!) )
//                        * sin(beta/2)^mu * cos(beta/2)^nu * P_s^{(mu,nu)}(cos beta)
//
// with mu = |a-b|, nu = |a+b|, s = j - (mu+nu)/2 and xi = (-1)^{a-b} when
// a > b, else 1.  The square-root prefactor is accumulated in log space so
// nothing overflows for N up to at least 400, and the three-term Jacobi
// recurrence is forward-stable on [-1, 1].

#include <cmath>
#include <cstdlib>

#include "phaselim/common.hpp"

namespace phaselim {

namespace detail {

// P_n^{(a,b)}(x) by the standard three-term recurrence.
inline double jacobi_poly(int n, int a, int b, double x) {
  if (n == 0) return 1.0;
  double p0 = 1.0;
  double p1 = 0.5 * (a - b + (a + b + 2.0) * x);
  for (int k = 2; k <= n; ++k) {
    double c = 2.0 * k + a + b;
    double a1 = 2.0 * k * (k + a + b) * (c - 2.0);
    double a2 = (c - 1.0) * (c * (c - 2.0) * x + static_cast<double>(a) * a - static_cast<double>(b) * b);
    double a3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * c;
    double p2 = (a2 * p1 - a3 * p0) / a1;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

}  // namespace detail

inline double wigner_small_d(double S, double m, double mp, double beta) {
  using detail::is_half_integer;
  if (S < 0.0 || !is_half_integer(S) || !is_half_integer(m) || !is_half_integer(mp))
    throw std::domain_error("wigner_small_d: quantum numbers must be integer or half-integer");
  long long twoS = std::llround(2.0 * S);
  long long twoM = std::llround(2.0 * m);
  long long twoMp = std::llround(2.0 * mp);
  if (std::llabs(twoM) > twoS || std::llabs(twoMp) > twoS)
    throw std::domain_error("wigner_small_d: |m| and |mp| must not exceed S");
  if ((twoS - twoM) % 2 != 0 || (twoS - twoMp) % 2 != 0)
    throw std::domain_error("wigner_small_d: m, mp must differ from S by integers");

  long long mu2 = std::llabs(twoM - twoMp);
  long long nu2 = std::llabs(twoM + twoMp);
  long long mu = mu2 / 2;
  long long nu = nu2 / 2;
  long long s = (twoS - mu - nu) / 2;  // mu2+nu2 is always even and <= 2S

  double sign = 1.0;
  if (twoM > twoMp && ((twoM - twoMp) / 2) % 2 != 0) sign = -1.0;

  double half = 0.5 * beta;
  double sb = std::sin(half);
  double cb = std::cos(half);

  // log |sin|^mu |cos|^nu, keeping signs separately; a zero base with a
  // positive exponent makes the whole element zero.
  double log_trig = 0.0;
  double trig_sign = 1.0;
  if (mu > 0) {
    if (sb == 0.0) return 0.0;
    log_trig += mu * std::log(std::abs(sb));
    if (sb < 0.0 && mu % 2 != 0) trig_sign = -trig_sign;
  }
  if (nu > 0) {
    if (cb == 0.0) return 0.0;
    log_trig += nu * std::log(std::abs(cb));
    if (cb < 0.0 && nu % 2 != 0) trig_sign = -trig_sign;
  }

  double log_pref = 0.5 * (log_factorial(s) + log_factorial(s + mu + nu) -
                           log_factorial(s + mu) - log_factorial(s + nu));
  double p = detail::jacobi_poly(static_cast<int>(s), static_cast<int>(mu),
                                 static_cast<int>(nu), std::cos(beta));
  if (p == 0.0) return 0.0;
  double log_mag = log_pref + log_trig + std::log(std::abs(p));
  double psign = p < 0.0 ? -1.0 : 1.0;
  return sign * trig_sign * psign * std::exp(log_mag);
}

}  // namespace phaselim
