#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Dense>

namespace riccilab {

// Largest manifold dimension handled by the geodesic machinery. Vectors and
// matrices are dynamically sized but never heap-allocate.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using IntVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1, 0, kMaxDim, 1>;

/// Christoffel symbols of the second kind, Gamma^k_{ij}.
class Christoffel {
 public:
  explicit Christoffel(int n = 0) : n_(n) { data_.fill(0.0); }

  int dim() const { return n_; }
  double& operator()(int k, int i, int j) { return data_[(k * n_ + i) * n_ + j]; }
  double operator()(int k, int i, int j) const { return data_[(k * n_ + i) * n_ + j]; }

  /// Gamma^k_{ij} u^i w^j for each k.
  Vec contract(const Vec& u, const Vec& w) const {
    Vec out = Vec::Zero(n_);
    for (int k = 0; k < n_; ++k)
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) out[k] += (*this)(k, i, j) * u[i] * w[j];
    return out;
  }

 private:
  int n_;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> data_;
};

/// Partial derivatives d_l Gamma^k_{ij}, indexed (l, k, i, j).
class ChristoffelDerivative {
 public:
  explicit ChristoffelDerivative(int n = 0) : n_(n) { data_.fill(0.0); }

  int dim() const { return n_; }
  double& operator()(int l, int k, int i, int j) {
    return data_[((l * n_ + k) * n_ + i) * n_ + j];
  }
  double operator()(int l, int k, int i, int j) const {
    return data_[((l * n_ + k) * n_ + i) * n_ + j];
  }

 private:
  int n_;
  std::array<double, kMaxDim * kMaxDim * kMaxDim * kMaxDim> data_;
};

/// Riemann tensor R^l_{ijk}, with R(d_i, d_j) d_k = R^l_{ijk} d_l and
/// R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z.
class Curvature {
 public:
  explicit Curvature(int n = 0) : n_(n) { data_.fill(0.0); }

  int dim() const { return n_; }
  double& operator()(int l, int i, int j, int k) {
    return data_[((l * n_ + i) * n_ + j) * n_ + k];
  }
  double operator()(int l, int i, int j, int k) const {
    return data_[((l * n_ + i) * n_ + j) * n_ + k];
  }

  /// R(x, y) z as a vector.
  Vec apply(const Vec& x, const Vec& y, const Vec& z) const {
    Vec out = Vec::Zero(n_);
    for (int l = 0; l < n_; ++l)
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
          for (int k = 0; k < n_; ++k) out[l] += (*this)(l, i, j, k) * x[i] * y[j] * z[k];
    return out;
  }

 private:
  int n_;
  std::array<double, kMaxDim * kMaxDim * kMaxDim * kMaxDim> data_;
};

}  // namespace riccilab
