#include "croftonkit/geometry.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <unordered_map>

namespace croftonkit {

namespace {

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw DomainError(std::string(what) + " has non-finite entries");
}

Vec unit(const Vec& v, const char* what) {
  require_finite(v, what);
  const double norm = v.norm();
  if (!(norm > 0.0)) throw DomainError(std::string(what) + " must be non-zero");
  return v / norm;
}

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
Eigen::Vector3d closest_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                    const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + d1 / (d1 - d3) * ab;
  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + d2 / (d2 - d6) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace

// DirectedLine --------------------------------------------------------------

DirectedLine DirectedLine::through(const Vec& p, const Vec& dir) {
  if (p.size() != dir.size()) throw DomainError("line point and direction differ in dimension");
  if (p.size() < 2) throw DomainError("lines need dimension >= 2");
  require_finite(p, "line point");
  const Vec u = unit(dir, "line direction");
  return DirectedLine{reject_from(p, u), u};
}

DirectedLine canonicalize(const DirectedLine& line) { return DirectedLine::through(line.point, line.direction); }

// TriangleMesh --------------------------------------------------------------

TriangleMesh::TriangleMesh(Eigen::Matrix3Xd vertices, Eigen::Matrix3Xi faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  if (vertices_.cols() < 3 || faces_.cols() < 1) throw DomainError("mesh needs at least one triangle");
  if (!vertices_.allFinite()) throw DomainError("mesh vertices have non-finite entries");
  if ((faces_.array() < 0).any() || (faces_.array() >= vertices_.cols()).any())
    throw DomainError("mesh face references a missing vertex");

  const Eigen::Index nf = faces_.cols();
  areas_.resize(nf);
  cumulative_.resize(nf);
  normals_.resize(3, nf);
  double running = 0.0;
  for (Eigen::Index f = 0; f < nf; ++f) {
    const Eigen::Vector3d a = vertices_.col(faces_(0, f));
    const Eigen::Vector3d b = vertices_.col(faces_(1, f));
    const Eigen::Vector3d c = vertices_.col(faces_(2, f));
    const Eigen::Vector3d cross = (b - a).cross(c - a);
    const double twice_area = cross.norm();
    areas_[f] = 0.5 * twice_area;
    if (twice_area > 0.0) {
      normals_.col(f) = cross / twice_area;
    } else {
      normals_.col(f).setZero();
      ++degenerate_faces_;
    }
    running += areas_[f];
    cumulative_[f] = running;
  }

  const Eigen::Vector3d lo = vertices_.rowwise().minCoeff();
  const Eigen::Vector3d hi = vertices_.rowwise().maxCoeff();
  center_ = 0.5 * (lo + hi);
  radius_ = (vertices_.colwise() - center_).colwise().norm().maxCoeff();

  std::unordered_map<std::uint64_t, int> edge_use;
  edge_use.reserve(static_cast<std::size_t>(3 * nf));
  for (Eigen::Index f = 0; f < nf; ++f) {
    for (int k = 0; k < 3; ++k) {
      auto i = static_cast<std::uint64_t>(faces_(k, f));
      auto j = static_cast<std::uint64_t>(faces_((k + 1) % 3, f));
      if (i > j) std::swap(i, j);
      ++edge_use[(i << 32) | j];
    }
  }
  for (const auto& [edge, count] : edge_use) {
    if (count == 1) ++boundary_edges_;
    if (count > 2) ++non_manifold_edges_;
  }
}

std::pair<Eigen::Index, double> TriangleMesh::nearest_face(const Eigen::Vector3d& x) const {
  Eigen::Index best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (Eigen::Index f = 0; f < faces_.cols(); ++f) {
    const Eigen::Vector3d q = closest_on_triangle(x, vertices_.col(faces_(0, f)), vertices_.col(faces_(1, f)),
                                                  vertices_.col(faces_(2, f)));
    const double d2 = (q - x).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = f;
    }
  }
  return {best, std::sqrt(best_d2)};
}

// ConvexBody ----------------------------------------------------------------

ConvexBody::ConvexBody(Kind kind) : kind_(std::move(kind)) {
  std::visit(
      [this](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          if (k.center.size() < 2) throw DomainError("sphere needs dimension >= 2");
          require_finite(k.center, "sphere centre");
          if (!(k.radius > 0.0) || !std::isfinite(k.radius)) throw DomainError("sphere radius must be positive");
          dim_ = static_cast<int>(k.center.size());
          center_ = k.center;
          enclosing_radius_ = k.radius;
        } else if constexpr (std::is_same_v<T, Ellipsoid>) {
          if (k.semi_axes.size() < 2) throw DomainError("ellipsoid needs dimension >= 2");
          require_finite(k.semi_axes, "ellipsoid semi-axes");
          if ((k.semi_axes.array() <= 0.0).any()) throw DomainError("ellipsoid semi-axes must be positive");
          dim_ = static_cast<int>(k.semi_axes.size());
          center_ = Vec::Zero(dim_);
          enclosing_radius_ = k.semi_axes.maxCoeff();
        } else if constexpr (std::is_same_v<T, ImplicitConvex>) {
          if (k.dim < 2) throw DomainError("implicit body needs dimension >= 2");
          if (!k.value || !k.gradient || !k.hessian) throw DomainError("implicit body needs value, gradient and Hessian");
          if (!(k.bounding_radius > 0.0)) throw DomainError("implicit body needs a positive bounding radius");
          dim_ = k.dim;
          center_ = Vec::Zero(dim_);
          if (!(k.value(center_) < 0.0)) throw DomainError("implicit body must contain the origin: g(0) < 0");
          enclosing_radius_ = k.bounding_radius;
        } else {
          dim_ = 3;
          center_ = k.bounding_center();
          enclosing_radius_ = k.bounding_radius();
        }
      },
      kind_);
}

ConvexBody ConvexBody::unit_sphere(int n) {
  if (n < 2) throw DomainError("unit sphere needs dimension >= 2");
  return ConvexBody(Sphere{Vec::Zero(n), 1.0});
}

ConvexBody ConvexBody::sphere(Vec center, double radius) { return ConvexBody(Sphere{std::move(center), radius}); }

ConvexBody ConvexBody::ellipsoid(Vec semi_axes) { return ConvexBody(Ellipsoid{std::move(semi_axes)}); }

ConvexBody ConvexBody::implicit(ImplicitConvex body) { return ConvexBody(std::move(body)); }

ConvexBody ConvexBody::mesh(Eigen::Matrix3Xd vertices, Eigen::Matrix3Xi faces) {
  return ConvexBody(TriangleMesh(std::move(vertices), std::move(faces)));
}

bool ConvexBody::is_unit_sphere() const {
  const auto* s = as<Sphere>();
  return s && s->radius == 1.0 && s->center.isZero(0.0);
}

// Level functions -----------------------------------------------------------
//
// Spheres use g = (|x - c|^2 - r^2) / (2r) and ellipsoids g = (sum x_i^2/a_i^2 - 1) / 2,
// so both have unit-order gradients on the boundary.

double level_value(const ConvexBody& body, const Vec& x) {
  if (const auto* s = body.as<Sphere>()) return ((x - s->center).squaredNorm() - s->radius * s->radius) / (2 * s->radius);
  if (const auto* e = body.as<Ellipsoid>()) return 0.5 * (x.array() / e->semi_axes.array()).square().sum() - 0.5;
  if (const auto* g = body.as<ImplicitConvex>()) return g->value(x);
  throw DomainError("mesh bodies have no level function");
}

Vec level_gradient(const ConvexBody& body, const Vec& x) {
  if (const auto* s = body.as<Sphere>()) return (x - s->center) / s->radius;
  if (const auto* e = body.as<Ellipsoid>()) return (x.array() / e->semi_axes.array().square()).matrix();
  if (const auto* g = body.as<ImplicitConvex>()) return g->gradient(x);
  throw DomainError("mesh bodies have no level function");
}

Mat level_hessian(const ConvexBody& body, const Vec& x) {
  if (const auto* s = body.as<Sphere>()) return Mat::Identity(x.size(), x.size()) / s->radius;
  if (const auto* e = body.as<Ellipsoid>()) return e->semi_axes.array().square().inverse().matrix().asDiagonal();
  if (const auto* g = body.as<ImplicitConvex>()) return g->hessian(x);
  throw DomainError("mesh bodies have no level function");
}

double boundary_distance(const ConvexBody& body, const Vec& x) {
  if (x.size() != body.dim()) throw DomainError("point dimension does not match the body");
  if (const auto* s = body.as<Sphere>()) return std::abs((x - s->center).norm() - s->radius);
  if (const auto* m = body.as<TriangleMesh>()) return m->nearest_face(x).second;
  const Vec grad = level_gradient(body, x);
  const double gnorm = grad.norm();
  if (!(gnorm > 0.0)) return std::numeric_limits<double>::infinity();
  return std::abs(level_value(body, x)) / gnorm;
}

bool on_surface(const ConvexBody& body, const Vec& x) {
  return boundary_distance(body, x) <= kOnSurfaceTolerance * body.scale();
}

void require_on_surface(const ConvexBody& body, const Vec& x) {
  if (!on_surface(body, x)) throw OffSurfaceError("point is not on the body boundary");
}

// Patches -------------------------------------------------------------------

namespace {

PatchNodePtr make_node(auto shape) { return std::make_shared<const PatchNode>(PatchNode{std::move(shape)}); }

bool angle_in(double value, double lo, double hi) {
  // Longitude interval [lo, hi] taken modulo 2*pi.
  constexpr double two_pi = 2 * M_PI;
  if (hi - lo >= two_pi) return true;
  double offset = std::fmod(value - lo, two_pi);
  if (offset < 0) offset += two_pi;
  return offset <= hi - lo;
}

bool node_contains(const PatchNode& node, const ConvexBody& body, const Vec& x) {
  return std::visit(
      [&](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, patch::Whole>) {
          return true;
        } else if constexpr (std::is_same_v<T, patch::Cap>) {
          const Vec rel = x - body.center();
          return rel.dot(s.axis) >= s.t * rel.norm();
        } else if constexpr (std::is_same_v<T, patch::LatLonBox>) {
          const Vec rel = x - body.center();
          const double r = rel.norm();
          const double lat = std::asin(std::clamp(rel(2) / r, -1.0, 1.0));
          const double lon = std::atan2(rel(1), rel(0));
          return lat >= s.lat_min && lat <= s.lat_max && angle_in(lon, s.lon_min, s.lon_max);
        } else if constexpr (std::is_same_v<T, patch::HalfSpace>) {
          return s.normal.dot(x) >= s.offset;
        } else if constexpr (std::is_same_v<T, patch::Union>) {
          return std::any_of(s.parts.begin(), s.parts.end(),
                             [&](const PatchNodePtr& p) { return node_contains(*p, body, x); });
        } else if constexpr (std::is_same_v<T, patch::Intersection>) {
          return std::all_of(s.parts.begin(), s.parts.end(),
                             [&](const PatchNodePtr& p) { return node_contains(*p, body, x); });
        } else {
          return !node_contains(*s.part, body, x);
        }
      },
      node.shape);
}

void require_same_body(const SurfacePatch& a, const SurfacePatch& b) {
  if (a.body_ptr() != b.body_ptr()) throw DomainError("patch algebra requires patches on the same body");
}

}  // namespace

SurfacePatch::SurfacePatch(BodyPtr body, PatchNodePtr node) : body_(std::move(body)), node_(std::move(node)) {
  if (!body_) throw DomainError("patch needs a body");
  if (!node_) throw DomainError("patch needs a predicate");
}

SurfacePatch SurfacePatch::whole(BodyPtr body) { return {std::move(body), make_node(patch::Whole{})}; }

SurfacePatch SurfacePatch::cap(BodyPtr body, const Vec& axis, double t) {
  if (!body) throw DomainError("patch needs a body");
  if (axis.size() != body->dim()) throw DomainError("cap axis dimension does not match the body");
  if (!(t >= -1.0 && t <= 1.0)) throw DomainError("cap height must lie in [-1, 1]");
  return {std::move(body), make_node(patch::Cap{unit(axis, "cap axis"), t})};
}

SurfacePatch SurfacePatch::lat_lon_box(BodyPtr body, double lat_min, double lat_max, double lon_min,
                                       double lon_max) {
  if (!body) throw DomainError("patch needs a body");
  if (!body->as<Sphere>() || body->dim() != 3) throw DomainError("lat/lon boxes are defined on spheres in R^3 only");
  if (!(lat_min <= lat_max) || lat_min < -M_PI / 2 || lat_max > M_PI / 2)
    throw DomainError("latitudes must satisfy -pi/2 <= lat_min <= lat_max <= pi/2");
  if (!(lon_min <= lon_max)) throw DomainError("longitudes must satisfy lon_min <= lon_max");
  return {std::move(body), make_node(patch::LatLonBox{lat_min, lat_max, lon_min, lon_max})};
}

SurfacePatch SurfacePatch::half_space(BodyPtr body, const Vec& normal, double offset) {
  if (!body) throw DomainError("patch needs a body");
  if (normal.size() != body->dim()) throw DomainError("half-space normal dimension does not match the body");
  require_finite(normal, "half-space normal");
  if (!(normal.norm() > 0.0) || !std::isfinite(offset)) throw DomainError("half-space needs a non-zero normal");
  return {std::move(body), make_node(patch::HalfSpace{normal, offset})};
}

SurfacePatch SurfacePatch::operator|(const SurfacePatch& other) const {
  require_same_body(*this, other);
  return {body_, make_node(patch::Union{{node_, other.node_}})};
}

SurfacePatch SurfacePatch::operator&(const SurfacePatch& other) const {
  require_same_body(*this, other);
  return {body_, make_node(patch::Intersection{{node_, other.node_}})};
}

SurfacePatch SurfacePatch::operator~() const { return {body_, make_node(patch::Complement{node_})}; }

bool SurfacePatch::contains_unchecked(const Vec& x) const { return node_contains(*node_, *body_, x); }

bool patch_contains(const SurfacePatch& patch, const Vec& x) {
  require_on_surface(patch.body(), x);
  return patch.contains_unchecked(x);
}

// Exact measures ------------------------------------------------------------

double cap_area_exact(double t) {
  if (!(t >= -1.0 && t <= 1.0)) throw DomainError("cap height must lie in [-1, 1]");
  return 2 * M_PI * (1 - t);
}

namespace {

// P(<X, e> <= t) for X uniform on S^{n-1}; (1 + <X,e>)/2 ~ Beta((n-1)/2, (n-1)/2).
double height_cdf(int n, double t) {
  if (t <= -1.0) return 0.0;
  if (t >= 1.0) return 1.0;
  if (n == 3) return 0.5 * (1 + t);
  const double a = 0.5 * (n - 1);
  return boost::math::ibeta(a, a, 0.5 * (1 + t));
}

// Finite union of closed intervals in [-1, 1], sorted and disjoint.
class IntervalSet {
 public:
  static IntervalSet all() { return IntervalSet({{-1.0, 1.0}}); }
  static IntervalSet span(double lo, double hi) {
    lo = std::max(lo, -1.0);
    hi = std::min(hi, 1.0);
    return lo <= hi ? IntervalSet({{lo, hi}}) : IntervalSet({});
  }

  IntervalSet complement() const {
    std::vector<std::pair<double, double>> out;
    double cursor = -1.0;
    for (const auto& [lo, hi] : parts_) {
      if (lo > cursor) out.emplace_back(cursor, lo);
      cursor = std::max(cursor, hi);
    }
    if (cursor < 1.0) out.emplace_back(cursor, 1.0);
    return IntervalSet(std::move(out));
  }

  IntervalSet unite(const IntervalSet& other) const {
    std::vector<std::pair<double, double>> all = parts_;
    all.insert(all.end(), other.parts_.begin(), other.parts_.end());
    return IntervalSet(std::move(all));
  }

  IntervalSet intersect(const IntervalSet& other) const {
    return complement().unite(other.complement()).complement();
  }

  double measure(int n) const {
    double total = 0.0;
    for (const auto& [lo, hi] : parts_) total += height_cdf(n, hi) - height_cdf(n, lo);
    return total;
  }

 private:
  explicit IntervalSet(std::vector<std::pair<double, double>> parts) {
    std::sort(parts.begin(), parts.end());
    for (const auto& p : parts) {
      if (!parts_.empty() && p.first <= parts_.back().second) {
        parts_.back().second = std::max(parts_.back().second, p.second);
      } else {
        parts_.push_back(p);
      }
    }
  }

  std::vector<std::pair<double, double>> parts_;
};

// Reduces a patch tree to heights along a shared axis. `axis` is fixed by the
// first directional node encountered.
std::optional<IntervalSet> to_intervals(const PatchNode& node, const Sphere& sphere, std::optional<Vec>& axis) {
  constexpr double kParallel = 1e-12;
  auto height_along = [&](const Vec& dir) -> std::optional<double> {
    if (!axis) {
      axis = dir;
      return 1.0;
    }
    const double c = axis->dot(dir);
    if (std::abs(std::abs(c) - 1.0) > kParallel) return std::nullopt;
    return c > 0 ? 1.0 : -1.0;
  };
  return std::visit(
      [&](const auto& s) -> std::optional<IntervalSet> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, patch::Whole>) {
          return IntervalSet::all();
        } else if constexpr (std::is_same_v<T, patch::Cap>) {
          const auto sign = height_along(s.axis);
          if (!sign) return std::nullopt;
          return *sign > 0 ? IntervalSet::span(s.t, 1.0) : IntervalSet::span(-1.0, -s.t);
        } else if constexpr (std::is_same_v<T, patch::HalfSpace>) {
          const double wn = s.normal.norm();
          const Vec dir = s.normal / wn;
          const double t = (s.offset - s.normal.dot(sphere.center)) / (wn * sphere.radius);
          const auto sign = height_along(dir);
          if (!sign) return std::nullopt;
          return *sign > 0 ? IntervalSet::span(t, 1.0) : IntervalSet::span(-1.0, -t);
        } else if constexpr (std::is_same_v<T, patch::LatLonBox>) {
          if (s.lon_max - s.lon_min < 2 * M_PI) return std::nullopt;
          const auto sign = height_along(Vec::Unit(3, 2));
          if (!sign) return std::nullopt;
          const double lo = std::sin(s.lat_min), hi = std::sin(s.lat_max);
          return *sign > 0 ? IntervalSet::span(lo, hi) : IntervalSet::span(-hi, -lo);
        } else if constexpr (std::is_same_v<T, patch::Union>) {
          IntervalSet acc = IntervalSet::span(1.0, -1.0);
          for (const auto& part : s.parts) {
            auto sub = to_intervals(*part, sphere, axis);
            if (!sub) return std::nullopt;
            acc = acc.unite(*sub);
          }
          return acc;
        } else if constexpr (std::is_same_v<T, patch::Intersection>) {
          IntervalSet acc = IntervalSet::all();
          for (const auto& part : s.parts) {
            auto sub = to_intervals(*part, sphere, axis);
            if (!sub) return std::nullopt;
            acc = acc.intersect(*sub);
          }
          return acc;
        } else {
          auto sub = to_intervals(*s.part, sphere, axis);
          if (!sub) return std::nullopt;
          return sub->complement();
        }
      },
      node.shape);
}

}  // namespace

double cap_sigma(int n, double t) {
  if (n < 2) throw DomainError("sphere dimension must be >= 2");
  if (!(t >= -1.0 && t <= 1.0)) throw DomainError("cap height must lie in [-1, 1]");
  return 1.0 - height_cdf(n, t);
}

std::optional<double> sigma_exact(const SurfacePatch& patch) {
  const auto* sphere = patch.body().as<Sphere>();
  if (!sphere) throw DomainError("exact normalized measure is only available on spheres");
  std::optional<Vec> axis;
  const auto intervals = to_intervals(patch.node(), *sphere, axis);
  if (!intervals) return std::nullopt;
  return intervals->measure(patch.body().dim());
}

std::optional<double> surface_area_exact(const ConvexBody& body) {
  if (const auto* s = body.as<Sphere>()) return sphere_area<double>(body.dim(), s->radius);
  if (const auto* m = body.as<TriangleMesh>()) {
    if (m->degenerate_faces() > 0)
      throw DegenerateMesh("mesh has " + std::to_string(m->degenerate_faces()) + " zero-area face(s)");
    return m->total_area();
  }
  return std::nullopt;
}

}  // namespace croftonkit
