#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "qnest/errors.hpp"

namespace qnest {

// Two-sided Hoelder constant of the qs test family. The family admits power
// laws with exponent in [1/gamma, gamma] and piecewise-linear maps with slope
// ratio at most gamma; both satisfy the inequality with gamma^2.
inline double k_of_gamma(double gamma) {
  if (!(gamma >= 1.0)) throw Error(ErrorKind::GammaOutOfRange, "gamma must be >= 1");
  return gamma * gamma;
}

enum class Profile { Practical, Faithful };

inline std::string to_string(Profile p) { return p == Profile::Practical ? "practical" : "faithful"; }

// Exponent constants shared by the statistics and classification code.
//
// The faithful profile uses the asymptotic recipe; b overflows to +inf for any
// admissible b_tilde, so a = 1/b is 0 and every threshold degenerates the way
// the asymptotic statements predict. The practical profile sets the four
// exponents directly.
struct ExponentConstants {
  Profile profile = Profile::Practical;
  double gamma = 1.1;
  double gamma0 = 1.0;
  double k = 1.21;
  double b_tilde = 2.0;
  double a_tilde = 0.5;
  double b = 2.0;
  double a = 0.5;

  static ExponentConstants practical(double a = 0.5, double b = 2.0, double a_tilde = 0.5,
                                  double b_tilde = 2.0, double gamma = 1.1, double gamma0 = 1.0) {
    if (!(a > 0 && b > 0 && a_tilde > 0 && b_tilde > 0)) {
      throw Error(ErrorKind::ConfigError, "practical exponents must be positive");
    }
    if (std::fabs(a_tilde * b_tilde - 1.0) > 1e-12) {
      throw Error(ErrorKind::ConfigError, "a_tilde must equal 1/b_tilde");
    }
    if (std::fabs(a * b - 1.0) > 1e-12) throw Error(ErrorKind::ConfigError, "a must equal 1/b");
    if (gamma < gamma0 || gamma0 < 1.0) throw Error(ErrorKind::GammaOutOfRange, "need 1 <= gamma0 <= gamma");
    ExponentConstants c;
    c.profile = Profile::Practical;
    c.gamma = gamma;
    c.gamma0 = gamma0;
    c.k = k_of_gamma(gamma);
    c.a = a;
    c.b = b;
    c.a_tilde = a_tilde;
    c.b_tilde = b_tilde;
    return c;
  }

  // b_tilde defaults to 10 times the stated lower bound 1000 k(2 gamma - 1)^1000.
  static ExponentConstants faithful(double gamma = 1.001, double gamma0 = 1.0, double b_tilde = 0.0) {
    if (gamma < gamma0 || gamma0 < 1.0) throw Error(ErrorKind::GammaOutOfRange, "need 1 <= gamma0 <= gamma");
    const double floor_bt = 1000.0 * std::pow(k_of_gamma(2 * gamma - 1), 1000.0);
    if (b_tilde == 0.0) b_tilde = 10.0 * floor_bt;
    if (!(b_tilde > floor_bt)) throw Error(ErrorKind::ConfigError, "b_tilde below 1000 k(2gamma-1)^1000");
    ExponentConstants c;
    c.profile = Profile::Faithful;
    c.gamma = gamma;
    c.gamma0 = gamma0;
    c.k = k_of_gamma(gamma);
    c.b_tilde = b_tilde;
    c.a_tilde = 1.0 / b_tilde;
    c.b = std::pow(b_tilde, 1000.0 * b_tilde);  // +inf in double
    c.a = 1.0 / c.b;
    return c;
  }

  static double rho(int n) { return (n + 1.0) / n; }
  static double rho_tilde(int n) { return (2.0 * n + 3.0) / (2.0 * n + 1.0); }
  double gamma_n(int n) const { return gamma * rho(n); }
  double gamma_tilde_n(int n) const { return gamma * rho_tilde(n); }
};

}  // namespace qnest
