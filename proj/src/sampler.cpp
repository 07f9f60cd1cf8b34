#include "croftonkit/sampler.hpp"

#include <algorithm>

namespace croftonkit {

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                    0x6b43a9b5u};
  engine_.seed(seq);
}

Vec uniform_sphere_point(int n, RandomStream& rng) {
  if (n < 2) throw DomainError("sphere dimension must be >= 2");
  Vec x(n);
  double norm = 0.0;
  do {
    for (int i = 0; i < n; ++i) x(i) = rng.normal();
    norm = x.norm();
  } while (norm < 1e-150);
  return x / norm;
}

Vec uniform_ball_point(int m, RandomStream& rng) {
  if (m < 1) throw DomainError("ball dimension must be >= 1");
  if (m == 1) return Vec::Constant(1, 2.0 * rng.uniform() - 1.0);
  const double r = std::pow(rng.uniform(), 1.0 / m);
  return r * uniform_sphere_point(m, rng);
}

// KinematicLineSampler ------------------------------------------------------

KinematicLineSampler::KinematicLineSampler(BodyPtr body, std::optional<double> bounding_radius,
                                           std::uint64_t proposal_cap)
    : body_(std::move(body)), proposal_cap_(proposal_cap) {
  if (!body_) throw DomainError("sampler needs a body");
  bounding_radius_ = bounding_radius.value_or(body_->enclosing_radius());
  if (!(bounding_radius_ >= body_->enclosing_radius() * (1 - 1e-12)))
    throw DomainError("bounding ball must contain the body");
  if (proposal_cap_ == 0) throw DomainError("proposal cap must be positive");
}

double KinematicLineSampler::acceptance_rate() const {
  return proposals_ == 0 ? 0.0 : static_cast<double>(accepted_) / static_cast<double>(proposals_);
}

DirectedLine KinematicLineSampler::propose(RandomStream& rng) const {
  const int n = body_->dim();
  const Vec u = uniform_sphere_point(n, rng);
  Vec offset(n);
  offset.head(n - 1) = bounding_radius_ * uniform_ball_point(n - 1, rng);
  offset(n - 1) = 0.0;
  // Householder reflection exchanging e_n and +/-u carries e_n^perp onto u^perp.
  Vec v = u;
  if (u(n - 1) < 0.0) {
    v(n - 1) -= 1.0;
  } else {
    v(n - 1) += 1.0;
  }
  offset -= (2.0 * v.dot(offset) / v.squaredNorm()) * v;
  return DirectedLine::through(center() + offset, u);
}

KinematicLineSampler::Draw KinematicLineSampler::draw(RandomStream& rng) {
  for (std::uint64_t misses = 0; misses < proposal_cap_; ++misses) {
    DirectedLine line = propose(rng);
    ++proposals_;
    HitRecord hits = intersect(line, *body_);
    if (hits.has_tangential() || hits.size() < 2) continue;
    ++accepted_;
    return Draw{std::move(line), std::move(hits)};
  }
  throw SamplerExhausted("no line met the body in " + std::to_string(proposal_cap_) + " consecutive proposals");
}

DirectedLine sample_kinematic_line(KinematicLineSampler& sampler, RandomStream& rng) {
  return sampler.draw(rng).line;
}

ChordSample sample_chord(KinematicLineSampler& sampler, RandomStream& rng) {
  auto [line, hits] = sampler.draw(rng);
  return ChordSample{std::move(line), std::move(hits.hits.front().point), std::move(hits.hits.back().point)};
}

// PatchPointSampler ---------------------------------------------------------

namespace {
constexpr std::uint64_t kPilotSeed = 0x9e3779b97f4a7c15ull;
constexpr int kPilotDraws = 4096;
constexpr double kPilotMargin = 1.5;
}  // namespace

PatchPointSampler::PatchPointSampler(SurfacePatch patch) : patch_(std::move(patch)) {
  if (const auto* body = patch_.body().as<ImplicitConvex>()) {
    RandomStream pilot(kPilotSeed, 0);
    double max_weight = 0.0;
    for (int i = 0; i < kPilotDraws; ++i) {
      double w = 0.0;
      implicit_point(*body, pilot, &w);
      max_weight = std::max(max_weight, w);
    }
    weight_bound_ = kPilotMargin * max_weight;
  }
}

Vec PatchPointSampler::implicit_point(const ImplicitConvex& body, RandomStream& rng, double* weight) const {
  const Vec u = uniform_sphere_point(body.dim, rng);
  const HitRecord hits = intersect_implicit(DirectedLine{Vec::Zero(body.dim), u}, body);
  if (hits.size() != 2) throw DomainError("implicit body is not star-shaped about the origin");
  const double r = hits.hits.back().s;
  const Vec x = r * u;
  const Vec normal = body.gradient(x).normalized();
  // Radial projection: dA = r^{n-1} / <n(x), u> dsigma(u).
  *weight = std::pow(r, body.dim - 1) / normal.dot(u);
  return x;
}

Vec PatchPointSampler::boundary_point(RandomStream& rng) const {
  const ConvexBody& body = patch_.body();
  if (const auto* s = body.as<Sphere>()) return s->center + s->radius * uniform_sphere_point(body.dim(), rng);
  if (const auto* e = body.as<Ellipsoid>()) {
    const double min_axis = e->semi_axes.minCoeff();
    for (std::uint64_t i = 0; i < kRejectionBudget; ++i) {
      const Vec u = uniform_sphere_point(body.dim(), rng);
      // Area Jacobian of u -> diag(a) u is det(diag(a)) |diag(a)^{-1} u|.
      const double accept = min_axis * (u.array() / e->semi_axes.array()).matrix().norm();
      if (rng.uniform() < accept) return (u.array() * e->semi_axes.array()).matrix();
    }
    throw SamplerExhausted("ellipsoid surface sampler exhausted its rejection budget");
  }
  if (const auto* g = body.as<ImplicitConvex>()) {
    for (std::uint64_t i = 0; i < kRejectionBudget; ++i) {
      double w = 0.0;
      Vec x = implicit_point(*g, rng, &w);
      if (rng.uniform() * weight_bound_ < w) return x;
    }
    throw SamplerExhausted("implicit surface sampler exhausted its rejection budget");
  }
  const auto& mesh = *body.as<TriangleMesh>();
  const auto& cumulative = mesh.cumulative_area();
  const double target = rng.uniform() * mesh.total_area();
  const auto f = std::min<Eigen::Index>(std::upper_bound(cumulative.begin(), cumulative.end(), target) - cumulative.begin(),
                                        mesh.face_count() - 1);
  double r1 = rng.uniform(), r2 = rng.uniform();
  if (r1 + r2 > 1.0) {
    r1 = 1.0 - r1;
    r2 = 1.0 - r2;
  }
  const auto& V = mesh.vertices();
  const auto& F = mesh.faces();
  const Eigen::Vector3d a = V.col(F(0, f)), b = V.col(F(1, f)), c = V.col(F(2, f));
  return Vec(a + r1 * (b - a) + r2 * (c - a));
}

Vec PatchPointSampler::operator()(RandomStream& rng) const {
  for (std::uint64_t i = 0; i < kRejectionBudget; ++i) {
    Vec x = boundary_point(rng);
    if (patch_.contains_unchecked(x)) return x;
  }
  throw SamplerExhausted("patch measure too small for rejection sampling");
}

Vec uniform_patch_point(const SurfacePatch& patch, RandomStream& rng) { return PatchPointSampler(patch)(rng); }

}  // namespace croftonkit
