#pragma once

#include <vector>

#include "riccilab/geodesic.hpp"

namespace riccilab::detail {

bool has_closed_form(const Manifold& m);

struct Connection {
  double length = 0.0;
  Vec direction;  // unit chart velocity at p
};

/// Closed-form minimal connections p -> q within (1 + tol_extra) of the
/// shortest, sorted by length.
std::vector<Connection> closed_form_connections(const Manifold& m, const Vec& p, const Vec& q, double tol_extra);

/// Position and velocity at arc length t along the geodesic from p with unit
/// chart velocity v.
void closed_form_flow(const Manifold& m, const Vec& p, const Vec& v, double t, Vec& x, Vec& vel);

/// Orthonormal coordinates of a tangent vector at p (g = L L^T, returns L^T w).
Vec to_orthonormal(const Manifold& m, const Vec& p, const Vec& w);

/// Ordering used for every set of geodesics: by length (ties within 1e-9
/// relative), then lexicographically by direction in orthonormal coordinates.
bool path_order(double la, const Vec& da, double lb, const Vec& db);

}  // namespace riccilab::detail
