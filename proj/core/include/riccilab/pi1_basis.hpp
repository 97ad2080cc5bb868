#pragma once

#include <optional>
#include <string>
#include <vector>

#include "riccilab/lattice.hpp"

namespace riccilab {

/// Length of the shortest closed geodesic in the free homotopy class v of the
/// flat torus R^n / L.
double loop_length(const DeckLattice& lattice, const IntVec& v);

struct ShortBasis {
  std::vector<LatticeVector> elements;
  /// True when the elements generate the whole lattice (false only when the
  /// length cap stopped the selection early).
  bool generates = false;
  /// Index of the generated sublattice in L (0 while it is not of full rank).
  std::int64_t index = 0;
};

/// Exact membership of v in the integer span of `generators`.
bool in_sublattice(const std::vector<IntVec>& generators, const IntVec& v);

/// |det| of the generated sublattice relative to Z^n, or 0 when rank < n.
std::int64_t sublattice_index(const std::vector<IntVec>& generators, int n);

/// Greedy selection: repeatedly take the shortest lattice vector outside the
/// span of those already chosen. Among equal lengths the sign is fixed so the
/// first nonzero coefficient is positive and the lexicographically largest
/// coefficient vector wins. Stops once the lattice is generated, or before the
/// first candidate of length >= length_cap.
ShortBasis short_basis(const DeckLattice& lattice, std::optional<double> length_cap = std::nullopt,
                       std::size_t budget = 2'000'000);

struct BasisViolation {
  std::string property;  ///< "le", "ge" or "cap"
  int i = 0;
  int j = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  std::string describe() const;
};

struct BasisReport {
  bool pass = true;
  std::optional<BasisViolation> violation;  ///< first violation found
};

/// Checks |a_1| <= |a_2| <= ..., |a_i -+ a_j| >= max(|a_i|, |a_j|), and
/// |a_i| < 2 r1 when r1 is given.
BasisReport verify_basis_properties(const ShortBasis& basis, std::optional<double> r1 = std::nullopt);

std::string basis_csv_header(int n);
std::string basis_csv_row(const LatticeVector& element);

}  // namespace riccilab
