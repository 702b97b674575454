#pragma once

#include <functional>
#include <string>
#include <vector>

#include "berglab/bergman.hpp"
#include "berglab/geometry.hpp"

namespace berglab {

struct WindowTooLarge : std::runtime_error {
  explicit WindowTooLarge(const std::string& m) : std::runtime_error(m) {}
};

/// Local data of the flat model at a base point: curvature eigenvalues a_j,
/// the chart scales lambda_j that turn chart displacements into coordinates
/// orthonormal for the reference metric, and the volume distortion kappa
/// (kappa(0) = 1).
struct ModelFrame {
  std::vector<double> a;
  ChartPoint x0;
  std::vector<double> lambda;
  std::function<double(const Cvec&)> kappa;
};

/// Frame at x0 for the form omega (a_j from the 2pi-normalized generalized
/// eigenvalues of omega against the reference form).
ModelFrame make_frame(const KahlerModel& model, const TwoForm& omega,
                      const ChartPoint& x0);

/// P(Z,Z') = prod_j (a_j/2pi) * exp(-1/4 sum_j a_j(|z_j|^2+|z'_j|^2-2 z_j conj(z'_j))).
Complex model_kernel(const ModelFrame& frame, const Cvec& Z, const Cvec& Zp);

/// sum_j |(2 d/dzbar_j + a_j z_j / 2) P(., Z')| at Z, with the dzbar
/// derivative of the explicit exponential taken analytically. Zero to
/// round-off for the true kernel.
double annihilation_residual(const ModelFrame& frame, const Cvec& Z,
                             const Cvec& Zp);

/// Same residual for an arbitrary kernel (dzbar by central differences);
/// lets tests feed corrupted kernels.
double annihilation_residual(
    const ModelFrame& frame, const Cvec& Z, const Cvec& Zp,
    const std::function<Complex(const Cvec&, const Cvec&)>& kernel);

/// Certified bound on sup |int P(Z,W)P(W,Z') d^2W - P(Z,Z')| over test pairs
/// with |Z|,|Z'| <= 1, integrating W over the box [-R,R]^{2n} and adding the
/// analytic Gaussian tail of the truncation. The integral factors over
/// coordinates, so cost is linear in n.
double reproducing_defect(const ModelFrame& frame, double box_radius,
                          int nodes_per_axis = 80);

/// sup over a 9x9 grid per argument, |Z|,|Z'| <= q, of
/// |A^{-n} P2(x0 + lam Z/sqrt(A), x0 + lam Z'/sqrt(A)) sqrt(kappa kappa')
///  - |P(Z,Z')||, with A = A_p = p.
double rescaled_comparison(const OrthonormalBasis& onb, const ModelFrame& frame,
                           int p, double window_radius);

}  // namespace berglab
