#pragma once

#include <cstdint>
#include <random>

#include "croftonkit/geometry.hpp"
#include "croftonkit/intersect.hpp"

namespace croftonkit {

/// Reproducible random source. (seed, stream_id) fixes the sequence; distinct
/// stream ids seed independent Mersenne Twister states.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Uniform on [0, 1).
  double uniform() { return uniform_(engine_); }
  double normal() { return normal_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Uniform point on S^{n-1} (normalized Gaussian).
Vec uniform_sphere_point(int n, RandomStream& rng);
/// Uniform point in the closed unit ball B^m.
Vec uniform_ball_point(int m, RandomStream& rng);

struct ChordSample {
  DirectedLine line;
  Vec entry;
  Vec exit;

  double length() const { return (exit - entry).norm(); }
};

/// Kinematic-measure lines conditioned to hit a body, by rejection from the
/// lines hitting an enclosing ball. Not thread-safe; clone one per worker.
class KinematicLineSampler {
 public:
  static constexpr std::uint64_t kDefaultProposalCap = 1'000'000;

  /// `bounding_radius` defaults to the body's enclosing radius and must not be smaller.
  explicit KinematicLineSampler(BodyPtr body, std::optional<double> bounding_radius = std::nullopt,
                                std::uint64_t proposal_cap = kDefaultProposalCap);

  const ConvexBody& body() const { return *body_; }
  const BodyPtr& body_ptr() const { return body_; }
  const Vec& center() const { return body_->center(); }
  double bounding_radius() const { return bounding_radius_; }

  std::uint64_t proposals() const { return proposals_; }
  std::uint64_t accepted() const { return accepted_; }
  double acceptance_rate() const;

  /// A line from the kinematic measure restricted to lines meeting the bounding ball.
  DirectedLine propose(RandomStream& rng) const;

  struct Draw {
    DirectedLine line;
    HitRecord hits;
  };
  /// Next accepted line with its two transversal crossings.
  Draw draw(RandomStream& rng);

 private:
  BodyPtr body_;
  double bounding_radius_;
  std::uint64_t proposal_cap_;
  std::uint64_t proposals_ = 0;
  std::uint64_t accepted_ = 0;
};

DirectedLine sample_kinematic_line(KinematicLineSampler& sampler, RandomStream& rng);
ChordSample sample_chord(KinematicLineSampler& sampler, RandomStream& rng);

/// Uniform points on a surface patch w.r.t. surface measure.
///
/// Spheres and meshes sample the whole boundary exactly; ellipsoids map the
/// unit sphere through the axis scaling and accept with probability
/// proportional to the area Jacobian; implicit bodies project radially and
/// accept against a weight bound found by a fixed pilot run. The patch is
/// then enforced by rejection.
class PatchPointSampler {
 public:
  static constexpr std::uint64_t kRejectionBudget = 1'000'000;

  explicit PatchPointSampler(SurfacePatch patch);

  const SurfacePatch& patch() const { return patch_; }
  Vec operator()(RandomStream& rng) const;
  /// A uniform boundary point before the patch predicate is applied.
  Vec boundary_point(RandomStream& rng) const;

 private:
  Vec implicit_point(const ImplicitConvex& body, RandomStream& rng, double* weight) const;

  SurfacePatch patch_;
  double weight_bound_ = 1.0;
};

Vec uniform_patch_point(const SurfacePatch& patch, RandomStream& rng);

}  // namespace croftonkit
