#include "riccilab/pi1_basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "riccilab/error.hpp"

namespace riccilab {

namespace {

using Int = std::int64_t;

Int checked_sub_mul(Int a, Int q, Int b) {
  Int prod = 0;
  Int out = 0;
  if (__builtin_mul_overflow(q, b, &prod) || __builtin_sub_overflow(a, prod, &out)) {
    fail(ErrorCode::enumeration_budget_exceeded, "integer overflow in sublattice arithmetic");
  }
  return out;
}

// row -= q * pivot
void axpy(std::vector<Int>& row, Int q, const std::vector<Int>& pivot) {
  for (std::size_t c = 0; c < row.size(); ++c) row[c] = checked_sub_mul(row[c], q, pivot[c]);
}

// Integer row echelon form of the generators: pivots strictly increase and
// are positive. Rows of zeros are dropped.
std::vector<std::vector<Int>> echelon(const std::vector<IntVec>& generators, int n) {
  std::vector<std::vector<Int>> rows;
  for (const auto& g : generators) {
    if (g.size() != n) fail(ErrorCode::invalid_argument, "generator dimension mismatch");
    rows.emplace_back(g.begin(), g.end());
  }
  std::vector<std::vector<Int>> out;
  for (int c = 0; c < n && !rows.empty(); ++c) {
    // Euclid on column c until at most one row has a nonzero entry there.
    for (;;) {
      int best = -1;
      for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
        if (rows[r][c] != 0 && (best < 0 || std::abs(rows[r][c]) < std::abs(rows[best][c]))) best = r;
      }
      if (best < 0) break;
      bool reduced = false;
      for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
        if (r == best || rows[r][c] == 0) continue;
        axpy(rows[r], rows[r][c] / rows[best][c], rows[best]);
        reduced = true;
      }
      if (!reduced) {
        auto pivot = rows[best];
        if (pivot[c] < 0) {
          for (auto& x : pivot) x = -x;
        }
        out.push_back(std::move(pivot));
        rows.erase(rows.begin() + best);
        break;
      }
    }
    std::erase_if(rows, [](const std::vector<Int>& r) {
      return std::all_of(r.begin(), r.end(), [](Int x) { return x == 0; });
    });
  }
  return out;
}

int leading(const std::vector<Int>& row) {
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (row[c] != 0) return static_cast<int>(c);
  }
  return -1;
}

bool member(const std::vector<std::vector<Int>>& ech, const IntVec& v) {
  std::vector<Int> x(v.begin(), v.end());
  for (const auto& row : ech) {
    const int c = leading(row);
    for (int k = 0; k < c; ++k) {
      if (x[k] != 0) return false;
    }
    if (x[c] % row[c] != 0) return false;
    axpy(x, x[c] / row[c], row);
  }
  return std::all_of(x.begin(), x.end(), [](Int a) { return a == 0; });
}

Int index_of(const std::vector<std::vector<Int>>& ech, int n) {
  if (static_cast<int>(ech.size()) < n) return 0;
  Int det = 1;
  for (int r = 0; r < n; ++r) {
    if (__builtin_mul_overflow(det, ech[r][r], &det)) {
      fail(ErrorCode::enumeration_budget_exceeded, "integer overflow in sublattice index");
    }
  }
  return det;
}

// Sign with first nonzero coefficient positive.
LatticeVector canonical(LatticeVector v) {
  for (auto c : v.coeffs) {
    if (c == 0) continue;
    if (c < 0) {
      v.coeffs = -v.coeffs;
      v.vector = -v.vector;
    }
    break;
  }
  return v;
}

bool shorter(const LatticeVector& a, const LatticeVector& b) {
  const double tol = 1e-12 * std::max({1.0, a.length, b.length});
  if (std::abs(a.length - b.length) > tol) return a.length < b.length;
  return std::lexicographical_compare(b.coeffs.begin(), b.coeffs.end(), a.coeffs.begin(), a.coeffs.end());
}

}  // namespace

double loop_length(const DeckLattice& lattice, const IntVec& v) {
  if (v.size() != lattice.dim()) fail(ErrorCode::invalid_argument, "class dimension mismatch");
  return lattice.point(v).norm();
}

bool in_sublattice(const std::vector<IntVec>& generators, const IntVec& v) {
  return member(echelon(generators, static_cast<int>(v.size())), v);
}

std::int64_t sublattice_index(const std::vector<IntVec>& generators, int n) {
  return index_of(echelon(generators, n), n);
}

ShortBasis short_basis(const DeckLattice& lattice, std::optional<double> length_cap, std::size_t budget) {
  const int n = lattice.dim();
  ShortBasis out;
  std::vector<IntVec> chosen;
  std::vector<std::vector<Int>> ech;

  double shortest_basis = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) shortest_basis = std::min(shortest_basis, lattice.basis().col(j).norm());
  double radius = 2.0 * shortest_basis;

  for (;;) {
    std::vector<LatticeVector> cands;
    for (auto& v : lattice.vectors_within(radius, budget)) {
      auto c = canonical(std::move(v));
      // keep one of each +-pair
      if (std::find_if(cands.begin(), cands.end(), [&](const LatticeVector& w) { return w.coeffs == c.coeffs; }) ==
          cands.end()) {
        cands.push_back(std::move(c));
      }
    }
    std::sort(cands.begin(), cands.end(), shorter);
    for (const auto& c : cands) {
      if (length_cap && c.length >= *length_cap) {
        out.index = index_of(ech, n);
        return out;
      }
      if (member(ech, c.coeffs)) continue;
      chosen.push_back(c.coeffs);
      out.elements.push_back(c);
      ech = echelon(chosen, n);
      out.index = index_of(ech, n);
      if (out.index == 1) {
        out.generates = true;
        return out;
      }
    }
    radius *= 2.0;
  }
}

std::string BasisViolation::describe() const {
  if (property == "le") return fmt::format("le: |a_{}| = {:.17g} > |a_{}| = {:.17g}", i + 1, lhs, j + 1, rhs);
  if (property == "cap") return fmt::format("cap: |a_{}| = {:.17g} >= 2 r1 = {:.17g}", i + 1, lhs, rhs);
  return fmt::format("ge: |a_{} -+ a_{}| = {:.17g} < max length {:.17g}", i + 1, j + 1, lhs, rhs);
}

BasisReport verify_basis_properties(const ShortBasis& basis, std::optional<double> r1) {
  BasisReport rep;
  const auto& e = basis.elements;
  const int s = static_cast<int>(e.size());
  auto report = [&](std::string prop, int i, int j, double lhs, double rhs) {
    rep.pass = false;
    rep.violation = BasisViolation{std::move(prop), i, j, lhs, rhs};
    return rep;
  };
  for (int i = 0; i + 1 < s; ++i) {
    if (e[i].length > e[i + 1].length * (1.0 + 1e-12)) return report("le", i, i + 1, e[i].length, e[i + 1].length);
  }
  for (int i = 0; i < s; ++i) {
    for (int j = i + 1; j < s; ++j) {
      const double m = std::max(e[i].length, e[j].length);
      const double diff = (e[i].vector - e[j].vector).norm();
      const double sum = (e[i].vector + e[j].vector).norm();
      const double worst = std::min(diff, sum);
      if (worst < m * (1.0 - 1e-12)) return report("ge", i, j, worst, m);
    }
  }
  if (r1) {
    for (int i = 0; i < s; ++i) {
      if (!(e[i].length < 2.0 * *r1)) return report("cap", i, i, e[i].length, 2.0 * *r1);
    }
  }
  return rep;
}

std::string basis_csv_header(int n) {
  std::string h;
  for (int i = 0; i < n; ++i) h += fmt::format("c{},", i);
  return h + "length";
}

std::string basis_csv_row(const LatticeVector& element) {
  std::string r;
  for (auto c : element.coeffs) r += fmt::format("{},", c);
  return r + fmt::format("{:.17g}", element.length);
}

}  // namespace riccilab
