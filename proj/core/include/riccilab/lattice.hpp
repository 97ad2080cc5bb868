#pragma once

#include <cstddef>
#include <vector>

#include "riccilab/types.hpp"

namespace riccilab {

using IntMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// A lattice vector given by integer coordinates in the original basis.
struct LatticeVector {
  IntVec coeffs;
  Vec vector;
  double length = 0.0;
};

/// Full-rank lattice in R^n with basis vectors stored as columns.
class DeckLattice {
 public:
  explicit DeckLattice(const Mat& basis);

  static DeckLattice integer(int n) { return DeckLattice(Mat::Identity(n, n)); }

  int dim() const { return static_cast<int>(basis_.cols()); }
  const Mat& basis() const { return basis_; }
  const Mat& gram() const { return gram_; }
  const Mat& inverse() const { return inverse_; }
  /// LLL-reduced basis (columns) and the unimodular U with reduced = basis * U.
  const Mat& reduced_basis() const { return reduced_; }
  const IntMat& reduction() const { return unimodular_; }
  double covolume() const { return std::abs(basis_.determinant()); }

  Vec point(const IntVec& coeffs) const;

  /// Length of a shortest nonzero lattice vector.
  double shortest_length() const { return lambda1_; }

  /// All nonzero lattice vectors of length <= radius, sorted by length and
  /// then lexicographically by coefficients. Raises
  /// enumeration_budget_exceeded when the search box exceeds `budget`.
  std::vector<LatticeVector> vectors_within(double radius, std::size_t budget = 2'000'000) const;

  /// Representative of x in the fundamental parallelotope B [0,1)^n.
  Vec reduce(const Vec& x) const;

  /// Lattice vectors w minimizing |x - w|, together with every w whose
  /// distance is within (1 + rel_tol) of the minimum. Sorted like
  /// vectors_within. Exact: the candidate set is enumerated, not guessed.
  std::vector<LatticeVector> closest_translates(const Vec& x, double rel_tol = 0.0) const;

  /// x - w for one closest lattice vector w (ties resolved by the ordering above).
  Vec closest_difference(const Vec& x) const;

 private:
  template <typename Visit>
  std::size_t enumerate_box(const Vec& center_coeffs, double radius, std::size_t budget,
                            Visit&& visit) const;

  Mat basis_;
  Mat gram_;
  Mat inverse_;
  Mat reduced_;
  Mat reduced_inverse_;
  IntMat unimodular_;
  double lambda1_ = 0.0;
};

/// LLL reduction (delta = 0.99) of the columns of `basis`. Returns the
/// reduced basis; `unimodular` receives U with reduced = basis * U.
Mat lll_reduce(const Mat& basis, IntMat& unimodular);

}  // namespace riccilab
