#include "croftonkit/intersect.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

namespace croftonkit {

bool HitRecord::has_tangential() const {
  return std::any_of(hits.begin(), hits.end(), [](const Hit& h) { return h.tangential; });
}

std::size_t HitRecord::transversal_count() const {
  return static_cast<std::size_t>(std::count_if(hits.begin(), hits.end(), [](const Hit& h) { return !h.tangential; }));
}

namespace {

// Roots of |p + s d|^2 = 1 where d need not be unit length. `offset` is the
// distance of the (rescaled) line from the origin.
HitRecord unit_quadric(const DirectedLine& line, const Vec& p, const Vec& d) {
  const double dd = d.squaredNorm();
  const double pd = p.dot(d);
  const double offset2 = p.squaredNorm() - pd * pd / dd;
  const double offset = std::sqrt(std::max(offset2, 0.0));
  HitRecord out;
  if (std::abs(offset - 1.0) < kTangentTolerance) {
    const double s = -pd / dd;
    out.hits.push_back(Hit{line.at(s), s, true});
    return out;
  }
  if (offset > 1.0) return out;
  const double half_chord = std::sqrt((1.0 - offset2) / dd);
  const double mid = -pd / dd;
  for (const double s : {mid - half_chord, mid + half_chord}) out.hits.push_back(Hit{line.at(s), s, false});
  return out;
}

}  // namespace

HitRecord intersect_sphere(const DirectedLine& line, double radius) {
  if (!(radius > 0.0)) throw DomainError("sphere radius must be positive");
  return unit_quadric(line, line.point / radius, line.direction / radius);
}

HitRecord intersect_sphere(const DirectedLine& line, const Sphere& sphere) {
  if (line.dim() != sphere.center.size()) throw DomainError("line and sphere differ in dimension");
  return unit_quadric(line, (line.point - sphere.center) / sphere.radius, line.direction / sphere.radius);
}

HitRecord intersect_ellipsoid(const DirectedLine& line, const Vec& semi_axes) {
  if (line.dim() != semi_axes.size()) throw DomainError("line and ellipsoid differ in dimension");
  const Vec p = (line.point.array() / semi_axes.array()).matrix();
  const Vec d = (line.direction.array() / semi_axes.array()).matrix();
  HitRecord out = unit_quadric(line, p, d);
  // Tangency is judged in rescaled coordinates; the hit points themselves are
  // recomputed in the original frame by line.at(s).
  return out;
}

HitRecord intersect_implicit(const DirectedLine& line, const ImplicitConvex& body, int grid_nodes) {
  if (line.dim() != body.dim) throw DomainError("line and implicit body differ in dimension");
  if (grid_nodes < 3) throw DomainError("grid scan needs at least 3 nodes");
  const double radius = body.bounding_radius;
  const double tol = 1e-12 * radius;
  auto g = [&](double s) { return body.value(line.at(s)); };

  std::vector<double> nodes(grid_nodes), values(grid_nodes);
  for (int i = 0; i < grid_nodes; ++i) {
    nodes[i] = -radius + 2.0 * radius * i / (grid_nodes - 1);
    values[i] = g(nodes[i]);
  }

  auto bisect = [&](double lo, double hi) {
    // g(lo) and g(hi) have opposite signs (inside means g < 0).
    const bool lo_inside = g(lo) < 0.0;
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      if ((g(mid) < 0.0) == lo_inside) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };

  std::vector<std::pair<double, double>> brackets;
  for (int i = 0; i + 1 < grid_nodes; ++i) {
    if ((values[i] < 0.0) != (values[i + 1] < 0.0)) brackets.emplace_back(nodes[i], nodes[i + 1]);
  }
  if (brackets.size() > 2) throw NonConvexityDetected("level function changes sign more than twice along a line");
  if (brackets.size() == 1) throw DomainError("implicit body extends beyond its bounding radius");

  HitRecord out;
  if (brackets.empty()) {
    // A short chord can fall between grid nodes. g is convex along the line, so
    // its minimum lies within one node of the smallest sampled value.
    const auto it = std::min_element(values.begin(), values.end());
    const auto i = static_cast<int>(it - values.begin());
    double lo = nodes[std::max(i - 1, 0)], hi = nodes[std::min(i + 1, grid_nodes - 1)];
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = hi - inv_phi * (hi - lo), b = lo + inv_phi * (hi - lo);
    double ga = g(a), gb = g(b);
    while (hi - lo > tol) {
      if (ga < 0.0 || gb < 0.0) break;
      if (ga < gb) {
        hi = b;
        b = a;
        gb = ga;
        a = hi - inv_phi * (hi - lo);
        ga = g(a);
      } else {
        lo = a;
        a = b;
        ga = gb;
        b = lo + inv_phi * (hi - lo);
        gb = g(b);
      }
    }
    if (!(ga < 0.0 || gb < 0.0)) return out;
    const double inside = ga < gb ? a : b;
    brackets.emplace_back(nodes[std::max(i - 1, 0)], inside);
    brackets.emplace_back(inside, nodes[std::min(i + 1, grid_nodes - 1)]);
  }

  const double s0 = bisect(brackets[0].first, brackets[0].second);
  const double s1 = bisect(brackets[1].first, brackets[1].second);
  // Same chord-length threshold a sphere of radius R gets from its tangency test.
  const double tangent_chord = 2.0 * std::sqrt(2.0 * kTangentTolerance) * radius;
  if (s1 - s0 < tangent_chord) {
    const double s = 0.5 * (s0 + s1);
    out.hits.push_back(Hit{line.at(s), s, true});
    return out;
  }
  out.hits.push_back(Hit{line.at(s0), s0, false});
  out.hits.push_back(Hit{line.at(s1), s1, false});
  return out;
}

HitRecord intersect_mesh(const DirectedLine& line, const TriangleMesh& mesh) {
  if (line.dim() != 3) throw DomainError("meshes live in R^3");
  const Eigen::Vector3d org = line.point;
  const Eigen::Vector3d dir = line.direction;

  // Watertight ray/triangle test (Woop, Benthin, Wald 2013), applied to the full line.
  int kz = 0;
  dir.cwiseAbs().maxCoeff(&kz);
  int kx = (kz + 1) % 3, ky = (kx + 1) % 3;
  if (dir(kz) < 0.0) std::swap(kx, ky);
  const double sx = dir(kx) / dir(kz), sy = dir(ky) / dir(kz), sz = 1.0 / dir(kz);

  struct Crossing {
    double s;
    Eigen::Index face;
  };
  // Key: sorted vertex ids of the simplex hit (3 ids for interior hits, 2 for
  // edges, 1 for vertices). The first face reaching a key owns the crossing.
  std::map<std::array<int, 3>, Crossing> owned;
  const auto& V = mesh.vertices();
  const auto& F = mesh.faces();
  for (Eigen::Index f = 0; f < F.cols(); ++f) {
    const Eigen::Vector3d a = V.col(F(0, f)) - org, b = V.col(F(1, f)) - org, c = V.col(F(2, f)) - org;
    const double ax = a(kx) - sx * a(kz), ay = a(ky) - sy * a(kz);
    const double bx = b(kx) - sx * b(kz), by = b(ky) - sy * b(kz);
    const double cx = c(kx) - sx * c(kz), cy = c(ky) - sy * c(kz);
    const double u = cx * by - cy * bx;
    const double v = ax * cy - ay * cx;
    const double w = bx * ay - by * ax;
    if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0)) continue;
    const double det = u + v + w;
    if (det == 0.0) continue;
    const double t = (u * sz * a(kz) + v * sz * b(kz) + w * sz * c(kz)) / det;

    // Barycentric weight u belongs to vertex a, v to b, w to c.
    std::array<int, 3> key{-1, -1, -1};
    int n = 0;
    if (u != 0.0) key[n++] = F(0, f);
    if (v != 0.0) key[n++] = F(1, f);
    if (w != 0.0) key[n++] = F(2, f);
    std::sort(key.begin(), key.begin() + n);
    owned.try_emplace(key, Crossing{t, f});
  }

  std::vector<Crossing> crossings;
  crossings.reserve(owned.size());
  for (const auto& [key, crossing] : owned) crossings.push_back(crossing);
  std::sort(crossings.begin(), crossings.end(), [](const Crossing& l, const Crossing& r) { return l.s < r.s; });

  HitRecord out;
  for (const auto& c : crossings) out.hits.push_back(Hit{line.at(c.s), c.s, false});
  return out;
}

HitRecord intersect(const DirectedLine& line, const ConvexBody& body) {
  if (line.dim() != body.dim()) throw DomainError("line and body differ in dimension");
  return std::visit(
      [&](const auto& k) -> HitRecord {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return intersect_sphere(line, k);
        } else if constexpr (std::is_same_v<T, Ellipsoid>) {
          return intersect_ellipsoid(line, k.semi_axes);
        } else if constexpr (std::is_same_v<T, ImplicitConvex>) {
          return intersect_implicit(line, k);
        } else {
          return intersect_mesh(line, k);
        }
      },
      body.kind());
}

int count_in_patch(const HitRecord& hits, const SurfacePatch& patch) {
  int count = 0;
  for (const auto& h : hits.hits) {
    if (!h.tangential && patch.contains_unchecked(h.point)) ++count;
  }
  return count;
}

int count_patch_hits(const DirectedLine& line, const SurfacePatch& patch) {
  const HitRecord hits = intersect(line, patch.body());
  if (hits.has_tangential()) throw TangentialContact("line is tangent to the body");
  return count_in_patch(hits, patch);
}

}  // namespace croftonkit
