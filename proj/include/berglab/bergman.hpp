#pragma once

#include <memory>
#include <string>
#include <vector>

#include "berglab/bundles.hpp"
#include "berglab/geometry.hpp"

namespace berglab {

struct IllConditioned : std::runtime_error {
  explicit IllConditioned(const std::string& m) : std::runtime_error(m) {}
};
struct ZeroSection : std::runtime_error {
  explicit ZeroSection(const std::string& m) : std::runtime_error(m) {}
};

/// Canonical basis of H^0(X, L): normalized monomials z^j (ProjectiveLine),
/// bi-monomials z^j w^k (ProjectiveProduct), level-d theta functions
/// (FlatTorus). Values are always returned with the pointwise sqrt h-weight
/// folded in, which keeps every entry O(sqrt(d_p)) at any point.
class SectionBasis {
 public:
  explicit SectionBasis(HermitianLineBundle bundle);

  const HermitianLineBundle& bundle() const { return bundle_; }
  int dimension() const { return dim_; }

  /// Monomial normalization constant c_j (basis function is c_j * z^j);
  /// log is returned since c_j overflows double for large degree.
  double log_normalization(int j) const;

  /// v_j = f_j(x) * sqrt(weight(x)).
  Cvec weighted_values(const ChartPoint& x) const;
  /// Same scalar factor on values and on the holomorphic derivatives
  /// d f_j / d z_a (weight is not differentiated).
  void weighted_jet(const ChartPoint& x, Cvec& values,
                    std::vector<Cvec>& derivs) const;

 private:
  HermitianLineBundle bundle_;
  int dim_;
};

SectionBasis raw_basis(const HermitianLineBundle& bundle);
int dimension(const HermitianLineBundle& bundle);

struct GramMatrix {
  Cmat G;
  double condition = 0.0;
  double min_eigenvalue = 0.0;
  double richardson_error = 0.0;  // 0 for exactly-integrated (unperturbed) Grams
  int rule_degree = 0;
};

/// G_jk = <f_j, f_k>_p by quadrature. ProjectiveLine bundles use a separated
/// radial x angular assembly; perturbed weights are integrated on doubled
/// node counts with the coarse/fine difference reported as the error
/// estimate. Throws NotPositive / IllConditioned per the Gram contract.
GramMatrix gram_matrix(const SectionBasis& basis, const QuadratureRule& rule);

class OrthonormalBasis {
 public:
  enum class Method { Cholesky, Svd };
  OrthonormalBasis(SectionBasis basis, Cmat transform, Method method)
      : basis_(std::move(basis)), T_(std::move(transform)), method_(method) {}

  const SectionBasis& basis() const { return basis_; }
  const Cmat& transform() const { return T_; }
  Method method() const { return method_; }
  int dimension() const { return basis_.dimension(); }

  /// Weighted orthonormal section values: r_j = S_j(x) * sqrt(weight).
  Cvec values(const ChartPoint& x) const;
  void jet(const ChartPoint& x, Cvec& values, std::vector<Cvec>& derivs) const;

 private:
  SectionBasis basis_;
  Cmat T_;
  Method method_;
};

/// Whitening transform with T^* G T = I. Cholesky when cond(G) < 1e6,
/// SVD whitening otherwise.
OrthonormalBasis orthonormalize(const SectionBasis& basis, const GramMatrix& G);

/// Convenience: basis + default-rule Gram + whitening.
OrthonormalBasis orthonormal_basis(const HermitianLineBundle& bundle);

/// P_p(x) = sum_j |S_j(x)|^2_h.
double bergman_function(const OrthonormalBasis& onb, const ChartPoint& x);

/// |P_p(x,y)| with pointwise h-norms at both arguments.
double bergman_kernel2(const OrthonormalBasis& onb, const ChartPoint& x,
                       const ChartPoint& y);

/// Coefficient matrix of the Fubini-Study current gamma_p at x, from
/// analytic first derivatives of the basis.
Cmat fubini_study_current(const OrthonormalBasis& onb, const ChartPoint& x);

}  // namespace berglab
