#pragma once

#include <vector>

#include "croftonkit/geometry.hpp"

namespace croftonkit {

struct Hit {
  Vec point;
  /// Line parameter: point = line.point + s * line.direction.
  double s = 0.0;
  bool tangential = false;
};

/// Boundary crossings of a line, ordered along its direction.
struct HitRecord {
  std::vector<Hit> hits;

  std::size_t size() const { return hits.size(); }
  bool empty() const { return hits.empty(); }
  bool has_tangential() const;
  std::size_t transversal_count() const;
};

HitRecord intersect_sphere(const DirectedLine& line, double radius);
HitRecord intersect_sphere(const DirectedLine& line, const Sphere& sphere);
HitRecord intersect_ellipsoid(const DirectedLine& line, const Vec& semi_axes);

/// Grid scan of g along the line on [-R, R] followed by bisection.
/// Throws NonConvexityDetected for more than two sign changes.
HitRecord intersect_implicit(const DirectedLine& line, const ImplicitConvex& body, int grid_nodes = 64);

/// Watertight line/triangle crossing count. Crossings through shared edges
/// and vertices are owned by the lowest-index incident face.
HitRecord intersect_mesh(const DirectedLine& line, const TriangleMesh& mesh);

HitRecord intersect(const DirectedLine& line, const ConvexBody& body);

/// Number of crossings in `hits` that belong to `patch`.
int count_in_patch(const HitRecord& hits, const SurfacePatch& patch);

/// n_l(A): crossings of the line with the patch. Throws TangentialContact
/// when the line touches the patch's body tangentially.
int count_patch_hits(const DirectedLine& line, const SurfacePatch& patch);

}  // namespace croftonkit
