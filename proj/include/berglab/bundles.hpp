#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "berglab/geometry.hpp"

namespace berglab {

struct PositivityLost : std::runtime_error {
  explicit PositivityLost(const std::string& m) : std::runtime_error(m) {}
};
struct NonPositiveRay : std::runtime_error {
  explicit NonPositiveRay(const std::string& m) : std::runtime_error(m) {}
};

/// Smooth real weight perturbation with closed-form complex Hessian,
/// given in every chart of its model.
struct PsiFunction {
  std::string id;
  std::function<double(const ChartPoint&)> value;
  std::function<Cmat(const ChartPoint&)> hessian;  // psi_{z_a zbar_b}
};

const PsiFunction& psi_catalog(const KahlerModel& model, const std::string& id);
std::vector<std::string> psi_catalog_ids();

/// (L, h): degree data plus an optional weight perturbation. The pointwise
/// squared norm of the chart frame is exp(-phi0 - eps*psi) where phi0 is the
/// reference weight of the degree (Fubini-Study or theta-polarization).
class HermitianLineBundle {
 public:
  HermitianLineBundle(KahlerModel model, std::vector<int> degrees,
                      std::string psi_id = "psi-zero", double eps = 0.0);

  const KahlerModel& model() const { return model_; }
  const std::vector<int>& degrees() const { return degrees_; }
  int max_degree() const;
  double perturbation_scale() const { return eps_; }
  const std::string& psi_id() const { return psi_id_; }

  /// log of the squared h-norm of the chart frame at x.
  double log_weight(const ChartPoint& x) const;
  double psi_value(const ChartPoint& x) const;

  /// Curvature (1,1)-form coefficient matrix at x (H-convention).
  Cmat chern_curvature(const ChartPoint& x) const;
  TwoForm chern_form() const;

  /// Throws PositivityLost unless the curvature is positive definite at
  /// every node of the grid.
  void check_positivity(const QuadratureRule& grid) const;

 private:
  KahlerModel model_;
  std::vector<int> degrees_;
  std::string psi_id_;
  double eps_;
};

struct RayApproximation {
  struct Entry {
    long p;
    std::vector<long> m;
  };
  std::vector<Entry> entries;
  std::vector<double> rays;
  /// max over entries of max_j |m_j/p - r_j| * p^2.
  double bound = 0.0;
};

/// Integer approximants m_{j,p} of the ray (r_1..r_k) with
/// |m_j/p - r_j| <= bound/p^2 on the listed denominators.
RayApproximation diophantine_ray(const std::vector<double>& rays, int depth);

enum class SequenceKind { PowerRay, MultiRay, PerturbedPower };

/// Rule p -> (L_p, h_p) together with the limit form omega, the
/// normalization A_p and the declared approximation exponent a.
class BundleSequence {
 public:
  static BundleSequence power_ray(const KahlerModel& model);
  static BundleSequence perturbed_power(const KahlerModel& model,
                                        const std::string& psi_id, double a);
  /// ProjectiveLine multi-ray: factors F_j = O(d_j) with Fubini-Study
  /// metrics, exponents from the ray approximation.
  static BundleSequence multi_ray(const KahlerModel& model,
                                  const std::vector<int>& factor_degrees,
                                  const RayApproximation& ray);

  SequenceKind kind() const { return kind_; }
  const KahlerModel& model() const { return model_; }
  double exponent_a() const { return a_; }
  double A(int p) const { return static_cast<double>(p); }
  TwoForm omega() const;
  double omega_scale() const { return omega_scale_; }
  HermitianLineBundle bundle_at(int p) const;
  const RayApproximation& ray() const { return ray_; }
  const std::string& psi_id() const { return psi_id_; }

 private:
  SequenceKind kind_ = SequenceKind::PowerRay;
  KahlerModel model_ = KahlerModel::projective_line();
  std::string psi_id_ = "psi-zero";
  double a_ = 1e9;            // PowerRay: exact, any exponent holds
  double omega_scale_ = 1.0;  // omega = omega_scale * theta
  std::vector<int> factor_degrees_;
  RayApproximation ray_;
};

/// Max over grid nodes of the theta-relative operator norm of
/// A_p^{-1} c1(L_p,h_p) - omega.
double approximation_defect(const BundleSequence& seq, int p,
                            const QuadratureRule& grid);

/// Min over grid nodes of the smallest 2pi-normalized curvature eigenvalue
/// relative to the reference metric (the bound a_L of the spectral gap).
double curvature_lower_bound(const HermitianLineBundle& bundle,
                             const QuadratureRule& grid);

}  // namespace berglab
