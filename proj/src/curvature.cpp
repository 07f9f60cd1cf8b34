#include "croftonkit/curvature.hpp"

#include <chrono>

#include "croftonkit/sampler.hpp"

namespace croftonkit {

Vec normal_at(const ConvexBody& body, const Vec& x) {
  require_on_surface(body, x);
  if (const auto* s = body.as<Sphere>()) return (x - s->center) / s->radius;
  if (const auto* m = body.as<TriangleMesh>()) {
    const auto [face, dist] = m->nearest_face(x);
    if (m->face_area(face) == 0.0) throw DegenerateMesh("nearest face has zero area");
    return Vec(m->face_normal(face));
  }
  const Vec grad = level_gradient(body, x);
  const double norm = grad.norm();
  if (!(norm > 0.0)) throw DomainError("level function has a vanishing gradient on the boundary");
  return grad / norm;
}

Mat tangent_frame(const Vec& n) {
  const auto dim = n.size();
  // Householder reflection exchanging e_last and +/-n; its other columns span n^perp.
  Vec v = n;
  v(dim - 1) += n(dim - 1) < 0.0 ? -1.0 : 1.0;
  Mat h = Mat::Identity(dim, dim) - (2.0 / v.squaredNorm()) * v * v.transpose();
  return h.leftCols(dim - 1);
}

SecondFundamentalForm second_fundamental_form(const ConvexBody& body, const Vec& x) {
  return second_fundamental_form(body, x, tangent_frame(normal_at(body, x)));
}

SecondFundamentalForm second_fundamental_form(const ConvexBody& body, const Vec& x, const Mat& frame) {
  if (!body.smooth()) throw DomainError("second fundamental form needs a C^2 body");
  const Vec normal = normal_at(body, x);
  if (frame.rows() != x.size() || frame.cols() != x.size() - 1)
    throw DomainError("tangent frame has the wrong shape");
  const double grad_norm = level_gradient(body, x).norm();
  Mat q = -(frame.transpose() * level_hessian(body, x) * frame) / grad_norm;
  q = 0.5 * (q + q.transpose()).eval();
  return SecondFundamentalForm{x, normal, frame, std::move(q)};
}

double graph_height(const ConvexBody& body, const Vec& base, const Vec& normal, const Vec& tangent_offset) {
  // Newton on s -> g(base + offset + s n), started on the tangent plane.
  const Vec p = base + tangent_offset;
  double s = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    const Vec q = p + s * normal;
    const double g = level_value(body, q);
    const double slope = level_gradient(body, q).dot(normal);
    if (!(std::abs(slope) > 0.0)) throw DomainError("graph height: level function flat along the normal");
    const double step = g / slope;
    s -= step;
    if (std::abs(step) <= 1e-16 * body.scale()) break;
  }
  return s;
}

Mat graph_hessian_fd(const ConvexBody& body, const Vec& x, const Mat& frame, double h) {
  if (!body.smooth()) throw DomainError("graph Hessian needs a C^2 body");
  if (h <= 0.0) h = 1e-4 * body.scale();
  const Vec normal = normal_at(body, x);
  const auto m = frame.cols();
  auto phi = [&](const Vec& z) { return graph_height(body, x, normal, frame * z); };
  Mat out(m, m);
  const Vec zero = Vec::Zero(m);
  const double phi0 = phi(zero);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vec ei = Vec::Unit(m, i) * h;
    out(i, i) = (phi(ei) - 2.0 * phi0 + phi(-ei)) / (h * h);
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const Vec ej = Vec::Unit(m, j) * h;
      out(i, j) = out(j, i) = (phi(ei + ej) - phi(ei - ej) - phi(ej - ei) + phi(-ei - ej)) / (4.0 * h * h);
    }
  }
  return out;
}

Vec principal_curvatures(const SecondFundamentalForm& form) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(form.Q, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

Mat principal_directions(const SecondFundamentalForm& form) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(form.Q);
  return form.tangent_frame * solver.eigenvectors();
}

double kernel_F(const ConvexBody& body, const Vec& x, const Vec& y) {
  if ((x - y).norm() < 1e-6 * body.scale()) throw CoincidentPoints("kernel is undefined for coincident points");
  return kernel_value(x, y, normal_at(body, x), normal_at(body, y));
}

std::vector<AsymptoticRow> kernel_local_asymptotic(const ConvexBody& body, const Vec& x, const Vec& v,
                                                   std::span<const double> eps_grid) {
  const SecondFundamentalForm form = second_fundamental_form(body, x);
  if (v.size() != x.size()) throw DomainError("tangent direction has the wrong dimension");
  if (std::abs(v.dot(form.normal)) > 1e-9 * v.norm()) throw DomainError("direction is not tangent at x");
  const Vec dir = v.normalized();
  const Vec z = form.tangent_frame.transpose() * dir;
  const double quad = z.dot(form.Q * z);
  const int n = body.dim();
  std::vector<AsymptoticRow> rows;
  rows.reserve(eps_grid.size());
  for (const double eps : eps_grid) {
    if (!(eps > 0.0)) throw DomainError("asymptotic grid needs positive steps");
    const Vec offset = eps * dir;
    const Vec y = x + offset + graph_height(body, x, form.normal, offset) * form.normal;
    rows.push_back(AsymptoticRow{eps, kernel_F(body, x, y), 0.25 * quad * quad * std::pow(eps, 3 - n)});
  }
  return rows;
}

std::vector<double> default_eps_grid(int points) {
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) grid[i] = std::pow(10.0, -1.0 - 2.0 * i / (points - 1));
  return grid;
}

namespace {

constexpr std::uint64_t kCertificatePairStreams = 5ull << 40;
constexpr std::uint64_t kCertificatePointStreams = 6ull << 40;

struct MaxAccumulator {
  double value = 0.0;
  void merge(const MaxAccumulator& other) { value = std::max(value, other.value); }
};

}  // namespace

SphereCertificate sphere_certificate(const BodyPtr& body, std::uint64_t m_pairs, std::uint64_t m_points,
                                     const RunOptions& opts, const CertificateThresholds& thresholds) {
  const auto start = std::chrono::steady_clock::now();
  if (body->dim() != 3) throw DomainError("sphere certificate is defined for bodies in R^3");
  if (!body->smooth()) throw DomainError("sphere certificate needs a C^2 body");
  if (m_pairs < 2 || m_points < 1) throw DomainError("certificate needs at least two pairs and one point");

  const PatchPointSampler boundary(SurfacePatch::whole(body));
  const double guard = 1e-6 * body->scale();
  const auto kernel = run_chunked<MeanAccumulator>(m_pairs, opts.workers, [&](std::uint64_t chunk, std::uint64_t count) {
    RandomStream rng(opts.seed, kCertificatePairStreams + chunk);
    MeanAccumulator acc;
    while (acc.count < count) {
      const Vec x = boundary(rng), y = boundary(rng);
      if ((x - y).norm() < guard) continue;
      acc.add(kernel_value(x, y, normal_at(*body, x), normal_at(*body, y)));
    }
    return acc;
  });

  const auto defect = run_chunked<MaxAccumulator>(m_points, opts.workers, [&](std::uint64_t chunk, std::uint64_t count) {
    RandomStream rng(opts.seed, kCertificatePointStreams + chunk);
    MaxAccumulator acc;
    for (std::uint64_t i = 0; i < count; ++i) {
      const Vec lambda = principal_curvatures(second_fundamental_form(*body, boundary(rng)));
      acc.value = std::max(acc.value, std::abs(lambda(0) - lambda(1)) / std::abs(lambda(0) + lambda(1)));
    }
    return acc;
  });

  SphereCertificate cert;
  cert.kernel_mean = kernel.mean;
  cert.kernel_cv = std::sqrt(kernel.variance()) / kernel.mean;
  cert.max_umbilic_defect = defect.value;
  cert.thresholds = thresholds;
  cert.verdict = cert.kernel_cv < thresholds.kernel_cv && cert.max_umbilic_defect < thresholds.umbilic_defect
                     ? Verdict::SphereLike
                     : Verdict::NotSphere;
  cert.pairs = m_pairs;
  cert.points = m_points;
  cert.seed = opts.seed;
  cert.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return cert;
}

const char* to_string(Verdict v) { return v == Verdict::SphereLike ? "SphereLike" : "NotSphere"; }

}  // namespace croftonkit
