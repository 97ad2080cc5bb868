#include "riccilab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "riccilab/error.hpp"

namespace riccilab {

namespace {

bool lex_less(const IntVec& a, const IntVec& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

bool lattice_order(const LatticeVector& a, const LatticeVector& b) {
  // Lengths that agree to rounding are ties, so the order does not depend on
  // the last bit of a floating-point norm.
  const double scale = std::max({1.0, a.length, b.length});
  if (std::abs(a.length - b.length) > 1e-12 * scale) return a.length < b.length;
  return lex_less(a.coeffs, b.coeffs);
}

}  // namespace

Mat lll_reduce(const Mat& basis, IntMat& unimodular) {
  const int n = static_cast<int>(basis.cols());
  Mat b = basis;
  unimodular = IntMat::Identity(n, n);
  constexpr double delta = 0.99;

  auto gram_schmidt = [&](Mat& bstar, Mat& mu) {
    bstar = b;
    mu = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < i; ++j) {
        mu(i, j) = b.col(i).dot(bstar.col(j)) / bstar.col(j).squaredNorm();
        bstar.col(i) -= mu(i, j) * bstar.col(j);
      }
    }
  };

  Mat bstar, mu;
  gram_schmidt(bstar, mu);
  int k = 1;
  int guard = 0;
  while (k < n) {
    if (++guard > 100000) fail(ErrorCode::enumeration_budget_exceeded, "LLL did not terminate");
    for (int j = k - 1; j >= 0; --j) {
      const double q = std::round(mu(k, j));
      if (q != 0.0) {
        b.col(k) -= q * b.col(j);
        unimodular.col(k) -= static_cast<std::int64_t>(q) * unimodular.col(j);
        gram_schmidt(bstar, mu);
      }
    }
    if (bstar.col(k).squaredNorm() >= (delta - mu(k, k - 1) * mu(k, k - 1)) * bstar.col(k - 1).squaredNorm()) {
      ++k;
    } else {
      b.col(k).swap(b.col(k - 1));
      unimodular.col(k).swap(unimodular.col(k - 1));
      gram_schmidt(bstar, mu);
      k = std::max(k - 1, 1);
    }
  }
  return b;
}

DeckLattice::DeckLattice(const Mat& basis) : basis_(basis) {
  const int n = static_cast<int>(basis.cols());
  if (n < 1 || n > kMaxDim || basis.rows() != n) {
    fail(ErrorCode::invalid_argument, fmt::format("lattice basis must be square with 1 <= n <= {}", kMaxDim));
  }
  if (!basis.allFinite()) fail(ErrorCode::invalid_argument, "lattice basis has non-finite entries");
  const double det = basis.determinant();
  const double scale = basis.colwise().norm().prod();
  if (!(std::abs(det) > 1e-12 * scale)) fail(ErrorCode::invalid_argument, "lattice basis is not full rank");
  gram_ = basis_.transpose() * basis_;
  inverse_ = basis_.inverse();
  reduced_ = lll_reduce(basis_, unimodular_);
  reduced_inverse_ = reduced_.inverse();

  lambda1_ = reduced_.colwise().norm().minCoeff();
  const Vec zero = Vec::Zero(n);
  enumerate_box(zero, lambda1_, std::numeric_limits<std::size_t>::max(), [&](const IntVec& c, const Vec& v) {
    if (c.cwiseAbs().sum() != 0) lambda1_ = std::min(lambda1_, v.norm());
  });
}

template <typename Visit>
std::size_t DeckLattice::enumerate_box(const Vec& center_coeffs, double radius, std::size_t budget,
                                       Visit&& visit) const {
  // Every y with |y| <= radius has reduced coordinates bounded by
  // radius * |row_i(R^{-1})|, so the box below contains all candidates.
  const int n = dim();
  IntVec lo(n), hi(n);
  double count = 1.0;
  for (int i = 0; i < n; ++i) {
    const double half = radius * reduced_inverse_.row(i).norm();
    lo[i] = static_cast<std::int64_t>(std::ceil(center_coeffs[i] - half - 1e-9));
    hi[i] = static_cast<std::int64_t>(std::floor(center_coeffs[i] + half + 1e-9));
    count *= static_cast<double>(hi[i] - lo[i] + 1);
  }
  if (count > static_cast<double>(budget)) {
    fail(ErrorCode::enumeration_budget_exceeded,
         fmt::format("lattice enumeration box of {:.3g} points exceeds budget {}", count, budget));
  }
  IntVec c = lo;
  Vec v(n);
  std::size_t visited = 0;
  while (true) {
    for (int i = 0; i < n; ++i) v[i] = 0.0;
    for (int j = 0; j < n; ++j) v += static_cast<double>(c[j]) * reduced_.col(j);
    visit(c, v);
    ++visited;
    int i = 0;
    while (i < n && c[i] == hi[i]) {
      c[i] = lo[i];
      ++i;
    }
    if (i == n) break;
    ++c[i];
  }
  return visited;
}

Vec DeckLattice::point(const IntVec& coeffs) const {
  Vec v = Vec::Zero(dim());
  for (int j = 0; j < dim(); ++j) v += static_cast<double>(coeffs[j]) * basis_.col(j);
  return v;
}

std::vector<LatticeVector> DeckLattice::vectors_within(double radius, std::size_t budget) const {
  if (!(radius >= 0.0) || !std::isfinite(radius)) fail(ErrorCode::invalid_argument, "enumeration radius must be finite and >= 0");
  std::vector<LatticeVector> out;
  const Vec zero = Vec::Zero(dim());
  const double r2 = radius * radius * (1.0 + 1e-12);
  enumerate_box(zero, radius, budget, [&](const IntVec& c, const Vec& v) {
    if (c.cwiseAbs().sum() == 0) return;
    const double len2 = v.squaredNorm();
    if (len2 <= r2) out.push_back({unimodular_ * c, v, std::sqrt(len2)});
  });
  std::sort(out.begin(), out.end(), lattice_order);
  return out;
}

Vec DeckLattice::reduce(const Vec& x) const {
  Vec c = inverse_ * x;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    c[i] -= std::floor(c[i]);
    if (c[i] >= 1.0) c[i] = 0.0;
  }
  return basis_ * c;
}

std::vector<LatticeVector> DeckLattice::closest_translates(const Vec& x, double rel_tol) const {
  const int n = dim();
  const Vec center = reduced_inverse_ * x;
  // Upper bound on the minimum from the rounded reduced coordinates.
  Vec rounded(n);
  for (int i = 0; i < n; ++i) rounded[i] = std::round(center[i]);
  const double bound = (x - reduced_ * rounded).norm();
  const double radius = bound * (1.0 + rel_tol) + 1e-12;

  std::vector<LatticeVector> out;
  double best = std::numeric_limits<double>::infinity();
  enumerate_box(center, radius, 10'000'000, [&](const IntVec& c, const Vec& v) {
    const double d = (x - v).norm();
    if (d <= radius) {
      out.push_back({unimodular_ * c, v, d});
      best = std::min(best, d);
    }
  });
  const double keep = best * (1.0 + rel_tol) + 1e-12 * std::max(1.0, best);
  std::erase_if(out, [&](const LatticeVector& t) { return t.length > keep; });
  std::sort(out.begin(), out.end(), lattice_order);
  return out;
}

Vec DeckLattice::closest_difference(const Vec& x) const {
  // Fast path: the best of the 3^n neighbours of the rounded point is exact
  // once it lies within half the shortest vector.
  const int n = dim();
  const Vec center = reduced_inverse_ * x;
  Vec base(n);
  for (int i = 0; i < n; ++i) base[i] = std::round(center[i]);
  const Vec y0 = x - reduced_ * base;
  Vec best = y0;
  double best2 = y0.squaredNorm();
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (int code = 0; code < total; ++code) {
    int m = code;
    Vec shift(n);
    for (int i = 0; i < n; ++i) {
      shift[i] = static_cast<double>(m % 3 - 1);
      m /= 3;
    }
    const Vec y = y0 - reduced_ * shift;
    const double d2 = y.squaredNorm();
    if (d2 < best2) {
      best2 = d2;
      best = y;
    }
  }
  if (4.0 * best2 <= lambda1_ * lambda1_) return best;
  const auto all = closest_translates(x);
  return x - all.front().vector;
}

}  // namespace riccilab
