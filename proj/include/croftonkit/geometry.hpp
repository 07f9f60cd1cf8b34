#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "croftonkit/errors.hpp"

namespace croftonkit {

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = VecX<double>;
using Mat = MatX<double>;

/// Relative on-surface tolerance; multiplied by the body diameter.
inline constexpr double kOnSurfaceTolerance = 1e-9;
/// Relative tangency tolerance; multiplied by the body scale.
inline constexpr double kTangentTolerance = 1e-12;

/// Removes the component of `p` along the unit vector `u`.
template <typename DerivedP, typename DerivedU>
auto reject_from(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedU>& u) {
  return (p - p.dot(u) * u).eval();
}

/// Surface area of the sphere of radius r in R^n, i.e. |S^{n-1}| r^{n-1}.
template <typename Scalar>
Scalar sphere_area(int n, Scalar r = Scalar(1)) {
  const Scalar half_n = Scalar(n) / Scalar(2);
  return Scalar(2) * std::pow(Scalar(M_PI), half_n) / std::tgamma(half_n) * std::pow(r, Scalar(n - 1));
}

/// Oriented line {point + s * direction}. `point` is the foot of the
/// perpendicular from the origin and `direction` has unit length.
struct DirectedLine {
  Vec point;
  Vec direction;

  /// Builds the canonical representation of the line through `p` along `dir`.
  static DirectedLine through(const Vec& p, const Vec& dir);

  Eigen::Index dim() const { return point.size(); }
  Vec at(double s) const { return point + s * direction; }
};

DirectedLine canonicalize(const DirectedLine& line);

struct Sphere {
  Vec center;
  double radius = 1.0;
};

/// Axis-aligned ellipsoid centred at the origin.
struct Ellipsoid {
  Vec semi_axes;
};

/// K = {g <= 0} with g(0) < 0 and the boundary inside the ball of radius
/// `bounding_radius` about the origin. g must be convex along every line.
struct ImplicitConvex {
  int dim = 3;
  double bounding_radius = 1.0;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Mat(const Vec&)> hessian;
  /// Free-form descriptor used for reports and hashing.
  std::string label;
};

/// Closed triangulated surface in R^3, assumed convex.
class TriangleMesh {
 public:
  TriangleMesh(Eigen::Matrix3Xd vertices, Eigen::Matrix3Xi faces);

  const Eigen::Matrix3Xd& vertices() const { return vertices_; }
  const Eigen::Matrix3Xi& faces() const { return faces_; }
  Eigen::Index face_count() const { return faces_.cols(); }

  double face_area(Eigen::Index f) const { return areas_[f]; }
  Eigen::Vector3d face_normal(Eigen::Index f) const { return normals_.col(f); }
  /// Running sum of face areas; the last entry is the total area.
  const std::vector<double>& cumulative_area() const { return cumulative_; }
  double total_area() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

  Eigen::Vector3d bounding_center() const { return center_; }
  double bounding_radius() const { return radius_; }

  std::size_t degenerate_faces() const { return degenerate_faces_; }
  std::size_t boundary_edges() const { return boundary_edges_; }
  std::size_t non_manifold_edges() const { return non_manifold_edges_; }
  bool closed() const { return boundary_edges_ == 0 && non_manifold_edges_ == 0; }

  /// Index of the face nearest to x and the distance to it.
  std::pair<Eigen::Index, double> nearest_face(const Eigen::Vector3d& x) const;

 private:
  Eigen::Matrix3Xd vertices_;
  Eigen::Matrix3Xi faces_;
  std::vector<double> areas_;
  std::vector<double> cumulative_;
  Eigen::Matrix3Xd normals_;
  Eigen::Vector3d center_;
  double radius_ = 0.0;
  std::size_t degenerate_faces_ = 0;
  std::size_t boundary_edges_ = 0;
  std::size_t non_manifold_edges_ = 0;
};

class ConvexBody {
 public:
  using Kind = std::variant<Sphere, Ellipsoid, ImplicitConvex, TriangleMesh>;

  explicit ConvexBody(Kind kind);

  static ConvexBody unit_sphere(int n);
  static ConvexBody sphere(Vec center, double radius);
  static ConvexBody ellipsoid(Vec semi_axes);
  static ConvexBody implicit(ImplicitConvex body);
  static ConvexBody mesh(Eigen::Matrix3Xd vertices, Eigen::Matrix3Xi faces);

  const Kind& kind() const { return kind_; }
  template <typename T>
  const T* as() const { return std::get_if<T>(&kind_); }

  int dim() const { return dim_; }
  /// Centre of the enclosing ball used for line sampling.
  const Vec& center() const { return center_; }
  /// Radius of a ball about center() that contains the body.
  double enclosing_radius() const { return enclosing_radius_; }
  /// Body diameter bound, the length scale for tolerances.
  double scale() const { return 2.0 * enclosing_radius_; }
  /// True for bodies with a C^2 level function (everything but meshes).
  bool smooth() const { return !std::holds_alternative<TriangleMesh>(kind_); }
  bool is_unit_sphere() const;

 private:
  Kind kind_;
  int dim_ = 0;
  Vec center_;
  double enclosing_radius_ = 0.0;
};

using BodyPtr = std::shared_ptr<const ConvexBody>;

inline BodyPtr make_body(ConvexBody body) {
  return std::make_shared<const ConvexBody>(std::move(body));
}

/// Level function g of a smooth body: K = {g <= 0}, gradient is outward.
double level_value(const ConvexBody& body, const Vec& x);
Vec level_gradient(const ConvexBody& body, const Vec& x);
Mat level_hessian(const ConvexBody& body, const Vec& x);

/// Approximate distance from x to the boundary (first-order for implicit bodies).
double boundary_distance(const ConvexBody& body, const Vec& x);
bool on_surface(const ConvexBody& body, const Vec& x);
/// Throws OffSurfaceError unless x lies on the boundary within tolerance.
void require_on_surface(const ConvexBody& body, const Vec& x);

// Surface patches ---------------------------------------------------------

struct PatchNode;
using PatchNodePtr = std::shared_ptr<const PatchNode>;

namespace patch {
struct Whole {};
/// Angular cap about the body centre: <x - c, axis> >= t |x - c|.
struct Cap {
  Vec axis;
  double t;
};
/// Latitude/longitude box in radians on a sphere in R^3. Longitudes wrap.
struct LatLonBox {
  double lat_min, lat_max, lon_min, lon_max;
};
/// <normal, x> >= offset, in absolute coordinates.
struct HalfSpace {
  Vec normal;
  double offset;
};
struct Union {
  std::vector<PatchNodePtr> parts;
};
struct Intersection {
  std::vector<PatchNodePtr> parts;
};
struct Complement {
  PatchNodePtr part;
};
}  // namespace patch

struct PatchNode {
  std::variant<patch::Whole, patch::Cap, patch::LatLonBox, patch::HalfSpace, patch::Union,
               patch::Intersection, patch::Complement>
      shape;
};

/// Measurable region of a body boundary, given as a membership predicate.
class SurfacePatch {
 public:
  static SurfacePatch whole(BodyPtr body);
  static SurfacePatch cap(BodyPtr body, const Vec& axis, double t);
  static SurfacePatch lat_lon_box(BodyPtr body, double lat_min, double lat_max, double lon_min,
                                  double lon_max);
  static SurfacePatch half_space(BodyPtr body, const Vec& normal, double offset);

  SurfacePatch operator|(const SurfacePatch& other) const;
  SurfacePatch operator&(const SurfacePatch& other) const;
  SurfacePatch operator~() const;

  const ConvexBody& body() const { return *body_; }
  const BodyPtr& body_ptr() const { return body_; }
  const PatchNode& node() const { return *node_; }
  const PatchNodePtr& node_ptr() const { return node_; }

  /// Membership for a point already known to lie on the boundary.
  bool contains_unchecked(const Vec& x) const;

  SurfacePatch(BodyPtr body, PatchNodePtr node);

 private:
  BodyPtr body_;
  PatchNodePtr node_;
};

/// Membership test; throws OffSurfaceError for points off the boundary.
bool patch_contains(const SurfacePatch& patch, const Vec& x);

/// Area of {x in S^2 : x_3 >= t}.
double cap_area_exact(double t);

/// Normalized measure of {x in S^{n-1} : <x, e> >= t}.
double cap_sigma(int n, double t);

/// Normalized measure of a patch on a sphere, when it reduces to caps about
/// a shared axis; std::nullopt otherwise. Throws DomainError for non-spheres.
std::optional<double> sigma_exact(const SurfacePatch& patch);

/// Exact boundary area for spheres and meshes, std::nullopt for the rest.
std::optional<double> surface_area_exact(const ConvexBody& body);

}  // namespace croftonkit
