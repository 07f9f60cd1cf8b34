#pragma once

#include <cstdint>
#include <vector>

#include "croftonkit/estimators.hpp"
#include "croftonkit/geometry.hpp"

namespace croftonkit {

/// Outward unit normal at a boundary point.
Vec normal_at(const ConvexBody& body, const Vec& x);

/// Orthonormal basis (as columns) of the hyperplane orthogonal to the unit vector n.
Mat tangent_frame(const Vec& n);

/// Local graph expansion phi(z) = 1/2 <z, Q z> of the boundary over the tangent
/// plane at `base_point`, with the body below the graph. Q is negative
/// semi-definite for convex bodies.
struct SecondFundamentalForm {
  Vec base_point;
  Vec normal;
  /// n x (n-1), orthonormal columns spanning the tangent plane.
  Mat tangent_frame;
  /// (n-1) x (n-1) symmetric, units 1/length.
  Mat Q;
};

/// Q = -T^T H T / |grad g| from the level function g.
SecondFundamentalForm second_fundamental_form(const ConvexBody& body, const Vec& x);
SecondFundamentalForm second_fundamental_form(const ConvexBody& body, const Vec& x, const Mat& frame);

/// Height phi(z) of the boundary above base + frame * z along the normal at base.
double graph_height(const ConvexBody& body, const Vec& base, const Vec& normal, const Vec& tangent_offset);

/// Central finite differences of the graph function with step h (default 1e-4 * scale).
Mat graph_hessian_fd(const ConvexBody& body, const Vec& x, const Mat& frame, double h = 0.0);

/// Eigenvalues of Q in ascending order.
Vec principal_curvatures(const SecondFundamentalForm& form);
/// Ambient unit eigendirections of Q, columns ordered as principal_curvatures.
Mat principal_directions(const SecondFundamentalForm& form);

/// |<n(x), y - x> <n(y), x - y>| / |y - x|^{n+1} from precomputed normals.
template <typename DX, typename DY, typename NX, typename NY>
typename DX::Scalar kernel_value(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y,
                                 const Eigen::MatrixBase<NX>& nx, const Eigen::MatrixBase<NY>& ny) {
  using Scalar = typename DX::Scalar;
  const auto diff = (y - x).eval();
  const Scalar dist = diff.norm();
  return std::abs(nx.dot(diff) * ny.dot(diff)) / std::pow(dist, Scalar(x.size() + 1));
}

/// Kernel F(x, y) on the boundary. Throws CoincidentPoints for |x - y| < 1e-6 * scale.
double kernel_F(const ConvexBody& body, const Vec& x, const Vec& y);

struct AsymptoticRow {
  double eps = 0.0;
  double kernel = 0.0;
  double predicted = 0.0;
};

/// F(x, y_eps) where y_eps is the boundary point over x + eps * v in the local
/// graph, next to the prediction 1/4 <Qv, v>^2 eps^{3-n}.
std::vector<AsymptoticRow> kernel_local_asymptotic(const ConvexBody& body, const Vec& x, const Vec& v,
                                                   std::span<const double> eps_grid);

/// Geometric grid 1e-1 ... 1e-3.
std::vector<double> default_eps_grid(int points = 9);

struct CertificateThresholds {
  double kernel_cv = 0.01;
  double umbilic_defect = 0.01;
};

enum class Verdict { SphereLike, NotSphere };

struct SphereCertificate {
  double kernel_cv = 0.0;
  double kernel_mean = 0.0;
  double max_umbilic_defect = 0.0;
  Verdict verdict = Verdict::NotSphere;
  CertificateThresholds thresholds;
  std::uint64_t pairs = 0;
  std::uint64_t points = 0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
};

/// Kernel constancy plus umbilicity on a C^2 body in R^3.
SphereCertificate sphere_certificate(const BodyPtr& body, std::uint64_t m_pairs, std::uint64_t m_points,
                                     const RunOptions& opts = {}, const CertificateThresholds& thresholds = {});

const char* to_string(Verdict v);

}  // namespace croftonkit
