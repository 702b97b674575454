#pragma once

#include <string>
#include <utility>
#include <vector>

#include "berglab/geometry.hpp"

namespace berglab {

struct RankDeficient : std::runtime_error {
  explicit RankDeficient(const std::string& m) : std::runtime_error(m) {}
};
struct DegenerateData : std::runtime_error {
  explicit DegenerateData(const std::string& m) : std::runtime_error(m) {}
};

struct ExpansionSample {
  int p = 0;
  double A = 0.0;
  double P = 0.0;  // Bergman function value at the probe point
};

struct ExpansionFit {
  std::vector<ExpansionSample> samples;
  std::vector<double> coeffs;  // bhat_0 .. bhat_k
  double residual = 0.0;
  double predicted_b0 = 0.0;
  double predicted_b1 = 0.0;
};

/// Least squares of P/A^n against {1, A^{-1}, ..., A^{-k}}, deterministic
/// normal equations with unit-norm column scaling.
ExpansionFit fit_expansion(const std::vector<ExpansionSample>& samples, int k,
                           int n = 1);

/// (b0, b1) = (omega^n/theta^n, b0 * r_omega / 8pi) at x0. r_omega is taken
/// from the conformal scaling law r_{c theta} = r_theta / c, valid for the
/// shipped sequences where omega is a constant multiple of the reference form.
std::pair<double, double> predicted_coefficients(const KahlerModel& model,
                                                 const TwoForm& omega,
                                                 const ChartPoint& x0);

struct RateFit {
  double C1 = 0.0;   // coefficient of log A / A
  double C2 = 0.0;   // coefficient of A^{-a}
  double a_hat = 0.0;
  double r2 = 0.0;
  bool exact = false;  // every input value below 1e-12
  std::vector<std::pair<double, double>> loss_profile;  // (a, sse)
};

/// Fit |value| ~ C1 log A/A + C2 A^{-a} by profiling the loss over
/// a in [0.05, 3] (dense grid plus golden-section refinement; linear solve
/// for C1, C2 at each a). Input order does not affect the result.
RateFit fit_rate(std::vector<std::pair<double, double>> records);

/// Least-squares slope of log(value) against log(A); values must be > 0.
double log_slope(const std::vector<std::pair<double, double>>& records);

}  // namespace berglab
