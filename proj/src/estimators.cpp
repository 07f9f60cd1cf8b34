#include "croftonkit/estimators.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <mutex>
#include <numeric>
#include <tuple>

#include "croftonkit/curvature.hpp"
#include "croftonkit/intersect.hpp"
#include "croftonkit/sampler.hpp"

namespace croftonkit {

namespace {

// Stream-id bases; chunk indices are added on top. Separate bases keep the
// line, pair and calibration phases of one run statistically independent.
constexpr std::uint64_t kLineStreams = 0;
constexpr std::uint64_t kPairStreams = 1ull << 40;
constexpr std::uint64_t kCalibrationLineStreams = 2ull << 40;
constexpr std::uint64_t kCalibrationPairStreams = 3ull << 40;
constexpr std::uint64_t kPartitionPilotStreams = 4ull << 40;
constexpr std::uint64_t kScalingStreams = 7ull << 40;

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void require_samples(std::uint64_t n) {
  if (n == 0) throw DomainError("sample count must be positive");
}

// Chords need an entry and an exit; an open mesh does not bound a region.
void require_closed_surface(const ConvexBody& body) {
  if (const auto* mesh = body.as<TriangleMesh>(); mesh && !mesh->closed())
    throw DomainError("chord estimators need a closed surface; the mesh is open");
}

// Draws a kinematic line from the enclosing ball that is not tangent to the body.
std::pair<DirectedLine, HitRecord> propose_transversal(const KinematicLineSampler& sampler, RandomStream& rng) {
  for (std::uint64_t i = 0; i < KinematicLineSampler::kDefaultProposalCap; ++i) {
    DirectedLine line = sampler.propose(rng);
    HitRecord hits = intersect(line, sampler.body());
    if (!hits.has_tangential()) return {std::move(line), std::move(hits)};
  }
  throw SamplerExhausted("every proposal was tangent to the body");
}

template <std::size_t N>
struct MeanArray {
  std::array<MeanAccumulator, N> acc{};
  void merge(const MeanArray& other) {
    for (std::size_t i = 0; i < N; ++i) acc[i].merge(other.acc[i]);
  }
};

struct MeanVector {
  std::vector<MeanAccumulator> acc;
  void merge(const MeanVector& other) {
    if (acc.empty()) acc.resize(other.acc.size());
    for (std::size_t i = 0; i < other.acc.size(); ++i) acc[i].merge(other.acc[i]);
  }
};

struct CountVector {
  std::vector<std::uint64_t> counts;
  void merge(const CountVector& other) {
    if (counts.empty()) counts.resize(other.counts.size());
    for (std::size_t i = 0; i < other.counts.size(); ++i) counts[i] += other.counts[i];
  }
};

// Ratio a / b with first-order error propagation for independent estimates.
EstimatorReport ratio(const EstimatorReport& a, const EstimatorReport& b) {
  EstimatorReport out;
  out.estimate = a.estimate / b.estimate;
  const double rel_a = a.std_error / a.estimate, rel_b = b.std_error / b.estimate;
  out.std_error = std::abs(out.estimate) * std::sqrt(rel_a * rel_a + rel_b * rel_b);
  out.n_samples = std::min(a.n_samples, b.n_samples);
  out.seed = a.seed;
  return out;
}

EstimatorReport product(const EstimatorReport& a, const EstimatorReport& b) {
  EstimatorReport out;
  out.estimate = a.estimate * b.estimate;
  out.std_error = std::hypot(a.std_error * b.estimate, b.std_error * a.estimate);
  out.n_samples = std::min(a.n_samples, b.n_samples);
  out.seed = a.seed;
  return out;
}

EstimatorReport exact_report(double value, std::uint64_t seed) {
  EstimatorReport out;
  out.estimate = value;
  out.seed = seed;
  out.metadata["source"] = "exact";
  return out;
}

}  // namespace

std::string format_number(double x) {
  std::array<char, 64> buf{};
  const auto result = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), result.ptr);
}

EstimatorReport EstimatorReport::from_mean(const MeanAccumulator& acc, std::uint64_t seed, double scale) {
  EstimatorReport out;
  out.estimate = scale * acc.mean;
  out.std_error = std::abs(scale) * acc.stderr_of_mean();
  out.n_samples = acc.count;
  out.seed = seed;
  return out;
}

double separation_sigmas(const EstimatorReport& a, const EstimatorReport& b) {
  const double se = std::hypot(a.std_error, b.std_error);
  const double diff = std::abs(a.estimate - b.estimate);
  if (se == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / se;
}

double separation_sigmas(const EstimatorReport& a, double exact) {
  if (a.std_error == 0.0) return a.estimate == exact ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(a.estimate - exact) / a.std_error;
}

// Hit distribution -----------------------------------------------------------

double HitDistribution::p(int k) const {
  if (k < 0 || k > 2) throw DomainError("hit count bucket must be 0, 1 or 2");
  return static_cast<double>(counts[k]) / static_cast<double>(n_samples);
}

double HitDistribution::std_error(int k) const {
  const double pk = p(k);
  return std::sqrt(pk * (1.0 - pk) / static_cast<double>(n_samples));
}

double HitDistribution::p_multi() const { return static_cast<double>(multi) / static_cast<double>(n_samples); }

double HitDistribution::mean_hits() const { return p(1) + 2.0 * p(2); }

std::vector<HitDistribution> estimate_hit_distributions(std::span<const SurfacePatch> patches, std::uint64_t n,
                                                        const RunOptions& opts) {
  require_samples(n);
  if (patches.empty()) throw DomainError("no patches given");
  const BodyPtr body = patches.front().body_ptr();
  for (const auto& p : patches)
    if (p.body_ptr() != body) throw DomainError("patches in one run must share a body");
  const Stopwatch clock;
  const std::size_t k = patches.size();

  const auto tally = run_chunked<CountVector>(n, opts.workers, [&](std::uint64_t chunk, std::uint64_t count) {
    RandomStream rng(opts.seed, kLineStreams + chunk);
    KinematicLineSampler sampler(body);
    CountVector out;
    out.counts.assign(4 * k, 0);
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto draw = sampler.draw(rng);
      for (std::size_t j = 0; j < k; ++j) {
        const int hits = count_in_patch(draw.hits, patches[j]);
        ++out.counts[4 * j + std::min(hits, 3)];
      }
    }
    return out;
  });

  std::vector<HitDistribution> result(k);
  for (std::size_t j = 0; j < k; ++j) {
    auto& h = result[j];
    for (int b = 0; b < 3; ++b) h.counts[b] = tally.counts[4 * j + b];
    h.multi = tally.counts[4 * j + 3];
    h.n_samples = n;
    h.seed = opts.seed;
    h.wall_time = clock.seconds();
  }
  return result;
}

HitDistribution estimate_hit_distribution(const SurfacePatch& patch, std::uint64_t n, const RunOptions& opts) {
  return estimate_hit_distributions(std::span(&patch, 1), n, opts).front();
}

// Crofton ----------------------------------------------------------------------

double crofton_constant(int n) { return 0.5 * sphere_area<double>(n); }

EstimatorReport crofton_area(const SurfacePatch& patch, std::uint64_t n, const RunOptions& opts) {
  require_samples(n);
  const Stopwatch clock;
  const KinematicLineSampler sampler(patch.body_ptr());
  const auto acc = run_chunked<MeanAccumulator>(n, opts.workers, [&](std::uint64_t chunk, std::uint64_t count) {
    RandomStream rng(opts.seed, kLineStreams + chunk);
    MeanAccumulator out;
    for (std::uint64_t i = 0; i < count; ++i) out.add(count_in_patch(propose_transversal(sampler, rng).second, patch));
    return out;
  });
  const int dim = patch.body().dim();
  const double radius = sampler.bounding_radius();
  const double scale = crofton_constant(dim) * std::pow(radius, dim - 1);
  EstimatorReport report = EstimatorReport::from_mean(acc, opts.seed, scale);
  report.wall_time = clock.seconds();
  report.metadata["normalization"] = "enclosing-ball reference sphere";
  report.metadata["bounding_radius"] = format_number(radius);
  report.metadata["crofton_constant"] = format_number(crofton_constant(dim));
  report.metadata["mean_crossings"] = format_number(acc.mean);
  return report;
}

// Quadratic Crofton ----------------------------------------------------------

namespace {

struct LineMoments {
  EstimatorReport lhs;
  EstimatorReport area;
};

// lhs = c_3 R^2 E[n^2] - H^2(A) with H^2(A) = c_3 R^2 E[n] from the same lines,
// i.e. c_3 R^2 E[n (n - 1)] per line.
LineMoments quad_line_moments(const SurfacePatch& patch, std::uint64_t n, std::uint64_t seed, unsigned workers,
                              std::uint64_t stream_base) {
  const KinematicLineSampler sampler(patch.body_ptr());
  const auto acc = run_chunked<MeanArray<2>>(n, workers, [&](std::uint64_t chunk, std::uint64_t count) {
    RandomStream rng(seed, stream_base + chunk);
    MeanArray<2> out;
    for (std::uint64_t i = 0; i < count; ++i) {
      const double hits = count_in_patch(propose_transversal(sampler, rng).second, patch);
      out.acc[0].add(hits * (hits - 1.0));
      out.acc[1].add(hits);
    }
    return out;
  });
  const double radius = sampler.bounding_radius();
  const double scale = crofton_constant(3) * radius * radius;
  return {EstimatorReport::from_mean(acc.acc[0], seed, scale), EstimatorReport::from_mean(acc.acc[1], seed, scale)};
}

EstimatorReport kernel_mean_on_patch(const SurfacePatch& patch, std::uint64_t m, std::uint64_t seed, unsigned workers,
                                     std::uint64_t stream_base) {
  const PatchPointSampler points(patch);
  const ConvexBody& body = patch.body();
  const double guard = 1e-6 * body.scale();
  const auto acc = run_chunked<MeanAccumulator>(m, workers, [&](std::uint64_t chunk, std::uint64_t count) {
    RandomStream rng(seed, stream_base + chunk);
    MeanAccumulator out;
    while (out.count < count) {
      const Vec x = points(rng), y = points(rng);
      if ((x - y).norm() < guard) continue;
      out.add(kernel_value(x, y, normal_at(body, x), normal_at(body, y)));
    }
    return out;
  });
  return EstimatorReport::from_mean(acc, seed);
}

void require_quad_crofton_body(const ConvexBody& body) {
  if (body.dim() != 3) throw DomainError("quadratic Crofton check is implemented for surfaces in R^3");
}

}  // namespace

EstimatorReport calibrate_quad_crofton_constant(std::uint64_t n_lines, std::uint64_t m_pairs, const RunOptions& opts) {
  require_samples(n_lines);
  require_samples(m_pairs);
  static std::mutex mutex;
  static std::map<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>, EstimatorReport> cache;
  const auto key = std::make_tuple(n_lines, m_pairs, opts.seed);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const Stopwatch clock;
  const SurfacePatch sphere = SurfacePatch::whole(make_body(ConvexBody::unit_sphere(3)));
  const LineMoments lines = quad_line_moments(sphere, n_lines, opts.seed, opts.workers, kCalibrationLineStreams);
  const EstimatorReport kernel = kernel_mean_on_patch(sphere, m_pairs, opts.seed, opts.workers, kCalibrationPairStreams);
  const double area = sphere_area<double>(3);
  EstimatorReport c = ratio(lines.lhs, kernel);
  c.estimate /= area * area;
  c.std_error /= area * area;
  c.wall_time = clock.seconds();
  c.metadata["calibration"] = "unit sphere in R^3";
  std::lock_guard lock(mutex);
  cache.emplace(key, c);
  return c;
}

QuadCroftonResult quad_crofton_check(const SurfacePatch& patch, std::uint64_t n_lines, std::uint64_t m_pairs,
                                     const RunOptions& opts) {
  require_samples(n_lines);
  require_samples(m_pairs);
  require_quad_crofton_body(patch.body());
  if (!patch.body().smooth()) throw DomainError("quadratic Crofton check needs boundary normals of a C^2 body");
  const Stopwatch clock;

  QuadCroftonResult out;
  out.c3_star = calibrate_quad_crofton_constant(n_lines, m_pairs, opts);
  const LineMoments lines = quad_line_moments(patch, n_lines, opts.seed, opts.workers, kLineStreams);
  out.lhs = lines.lhs;
  out.area = lines.area;
  if (patch.body().as<Sphere>()) {
    if (const auto sigma = sigma_exact(patch)) {
      out.area = exact_report(*sigma * *surface_area_exact(patch.body()), opts.seed);
      out.area.n_samples = n_lines;
    }
  }
  out.kernel_mean = kernel_mean_on_patch(patch, m_pairs, opts.seed, opts.workers, kPairStreams);
  out.rhs = product(product(out.c3_star, product(out.area, out.area)), out.kernel_mean);
  // product() treats both factors of area^2 as independent; the correct
  // first-order error of a square is twice the relative error.
  {
    const double rel_c = out.c3_star.std_error / out.c3_star.estimate;
    const double rel_a = out.area.std_error / out.area.estimate;
    const double rel_k = out.kernel_mean.std_error / out.kernel_mean.estimate;
    out.rhs.std_error = std::abs(out.rhs.estimate) * std::sqrt(rel_c * rel_c + 4 * rel_a * rel_a + rel_k * rel_k);
  }
  out.rhs.seed = opts.seed;
  out.lhs.wall_time = out.rhs.wall_time = clock.seconds();
  out.rhs.metadata["area_source"] = out.area.metadata.count("source") ? "exact" : "crofton";
  return out;
}

// Chords ---------------------------------------------------------------------

ChordCdf chord_cdf(const BodyPtr& body, std::span<const double> d_grid, std::uint64_t n, const RunOptions& opts) {
  require_samples(n);
  require_closed_surface(*body);
  const Stopwatch clock;
  const std::size_t k = d_grid.size();
  struct Acc {
    CountVector below;
    MeanAccumulator length;
    void merge(const Acc& o) {
      below.merge(o.below);
      length.merge(o.length);
    }
  };
  const auto acc = run_chunked<Acc>(n, opts.workers, [&](std::uint64_t chunk, std::uint64_t count) {
    RandomStream rng(opts.seed, kLineStreams + chunk);
    KinematicLineSampler sampler(body);
    Acc out;
    out.below.counts.assign(k, 0);
    for (std::uint64_t i = 0; i < count; ++i) {
      const double len = sample_chord(sampler, rng).length();
      out.length.add(len);
      for (std::size_t j = 0; j < k; ++j)
        if (len <= d_grid[j]) ++out.below.counts[j];
    }
    return out;
  });

  ChordCdf out;
  const auto total = static_cast<double>(n);
  for (std::size_t j = 0; j < k; ++j) {
    const double p = static_cast<double>(acc.below.counts.empty() ? 0 : acc.below.counts[j]) / total;
    out.points.push_back(CdfPoint{d_grid[j], p, std::sqrt(p * (1 - p) / total)});
  }
  out.mean_length = EstimatorReport::from_mean(acc.length, opts.seed);
  out.mean_length.wall_time = clock.seconds();
  return out;
}

double dot_moment_exact(int n) {
  if (n < 2) throw DomainError("dimension must be at least 2");
  return (n - 3.0) / (n + 1.0);
}

EstimatorReport dot_moment(int n, std::uint64_t samples, const RunOptions& opts) {
  require_samples(samples);
  const Stopwatch clock;
  const BodyPtr sphere = make_body(ConvexBody::unit_sphere(n));
  const auto acc = run_chunked<MeanAccumulator>(samples, opts.workers, [&](std::uint64_t chunk, std::uint64_t count) {
    RandomStream rng(opts.seed, kLineStreams + chunk);
    KinematicLineSampler sampler(sphere);
    MeanAccumulator out;
    for (std::uint64_t i = 0; i < count; ++i) {
      const ChordSample c = sample_chord(sampler, rng);
      out.add(c.entry.dot(c.exit));
    }
    return out;
  });
  EstimatorReport report = EstimatorReport::from_mean(acc, opts.seed);
  report.wall_time = clock.seconds();
  report.metadata["dimension"] = std::to_string(n);
  return report;
}

ChordScaling chord_scaling(std::span<const int> dims, std::uint64_t n, const RunOptions& opts) {
  require_samples(n);
  if (dims.size() < 2) throw DomainError("chord scaling needs at least two dimensions");
  ChordScaling out;
  for (const int dim : dims) {
    const Stopwatch clock;
    const BodyPtr sphere = make_body(ConvexBody::unit_sphere(dim));
    const std::uint64_t base = kScalingStreams + (static_cast<std::uint64_t>(dim) << 24);
    const auto acc = run_chunked<MeanAccumulator>(n, opts.workers, [&](std::uint64_t chunk, std::uint64_t count) {
      RandomStream rng(opts.seed, base + chunk);
      KinematicLineSampler sampler(sphere);
      MeanAccumulator a;
      for (std::uint64_t i = 0; i < count; ++i) a.add(sample_chord(sampler, rng).length());
      return a;
    });
    ScalingRow row{dim, EstimatorReport::from_mean(acc, opts.seed)};
    row.mean_length.wall_time = clock.seconds();
    out.rows.push_back(std::move(row));
  }

  // Ordinary least squares on (log n, log E|X - Y|); the slope error follows
  // from the per-row relative errors, which are independent across rows.
  const auto m = static_cast<double>(out.rows.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& r : out.rows) {
    mean_x += std::log(r.dim) / m;
    mean_y += std::log(r.mean_length.estimate) / m;
  }
  double sxx = 0.0, sxy = 0.0;
  for (const auto& r : out.rows) {
    const double dx = std::log(r.dim) - mean_x;
    sxx += dx * dx;
    sxy += dx * (std::log(r.mean_length.estimate) - mean_y);
  }
  out.slope = sxy / sxx;
  out.intercept = mean_y - out.slope * mean_x;
  double var = 0.0;
  for (const auto& r : out.rows) {
    const double w = (std::log(r.dim) - mean_x) / sxx;
    const double rel = r.mean_length.std_error / r.mean_length.estimate;
    var += w * w * rel * rel;
  }
  out.slope_std_error = std::sqrt(var);
  return out;
}

// Pair hits ------------------------------------------------------------------

PairHitResult pair_hit_probability(const SurfacePatch& a, const SurfacePatch& b, std::uint64_t n_lines,
                                   std::uint64_t m_pairs, const RunOptions& opts) {
  require_samples(n_lines);
  require_samples(m_pairs);
  if (a.body_ptr() != b.body_ptr()) throw DomainError("pair patches must share a body");
  const auto* sphere = a.body().as<Sphere>();
  if (!sphere) throw DomainError("pair-hit probabilities are defined on spheres");
  const Stopwatch clock;
  const BodyPtr body = a.body_ptr();
  const int n = body->dim();
  const SurfacePatch half = SurfacePatch::cap(body, Vec::Unit(n, 0), 0.0);
  const SurfacePatch other_half = ~half;

  const auto lines = run_chunked<MeanArray<2>>(n_lines, opts.workers, [&](std::uint64_t chunk, std::uint64_t count) {
    RandomStream rng(opts.seed, kLineStreams + chunk);
    KinematicLineSampler sampler(body);
    MeanArray<2> out;
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto draw = sampler.draw(rng);
      out.acc[0].add(count_in_patch(draw.hits, a) > 0 && count_in_patch(draw.hits, b) > 0 ? 1.0 : 0.0);
      out.acc[1].add(count_in_patch(draw.hits, half) > 0 && count_in_patch(draw.hits, other_half) > 0 ? 1.0 : 0.0);
    }
    return out;
  });

  const double exponent = 3.0 - n;
  const auto pairs = run_chunked<MeanArray<2>>(m_pairs, opts.workers, [&](std::uint64_t chunk, std::uint64_t count) {
    RandomStream rng(opts.seed, kPairStreams + chunk);
    MeanArray<2> out;
    const double guard = 1e-6 * body->scale();
    while (out.acc[0].count < count) {
      const Vec x = sphere->center + sphere->radius * uniform_sphere_point(n, rng);
      const Vec y = sphere->center + sphere->radius * uniform_sphere_point(n, rng);
      const double dist = (x - y).norm() / sphere->radius;
      if (dist < guard) continue;
      const bool xa = a.contains_unchecked(x), xb = b.contains_unchecked(x);
      const bool ya = a.contains_unchecked(y), yb = b.contains_unchecked(y);
      if ((xa && xb) || (ya && yb)) throw PatchOverlap("pair-hit patches overlap");
      const double kernel = std::pow(dist, exponent);
      out.acc[0].add(xa && yb ? kernel : 0.0);
      out.acc[1].add(half.contains_unchecked(x) && other_half.contains_unchecked(y) ? kernel : 0.0);
    }
    return out;
  });

  PairHitResult out;
  out.joint = EstimatorReport::from_mean(lines.acc[0], opts.seed);
  out.kernel_integral = EstimatorReport::from_mean(pairs.acc[0], opts.seed);
  const EstimatorReport joint_half = EstimatorReport::from_mean(lines.acc[1], opts.seed);
  const EstimatorReport kernel_half = EstimatorReport::from_mean(pairs.acc[1], opts.seed);
  out.constant = ratio(joint_half, kernel_half);
  out.constant.metadata["calibration"] = "hemisphere and complement";
  out.predicted = product(out.constant, out.kernel_integral);
  out.joint.wall_time = clock.seconds();
  out.joint.metadata["dimension"] = std::to_string(n);
  return out;
}

// Independence -----------------------------------------------------------------

std::size_t CellPartition::cell_of(const Vec& x) const {
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cells[i].contains_unchecked(x)) return i;
  return cells.size() - 1;
}

CellPartition equal_area_partition(const BodyPtr& body, int bands, int sectors, const RunOptions& opts) {
  if (body->dim() != 3) throw DomainError("cell partitions are built for bodies in R^3");
  if (bands < 1 || sectors < 1 || bands * sectors < 2) throw DomainError("partition needs at least two cells");
  const Vec& c = body->center();
  const Vec e3 = Vec::Unit(3, 2);

  std::vector<double> edges(bands + 1);
  std::vector<Vec> pilot;
  if (const auto* s = body->as<Sphere>()) {
    // Equal heights give equal areas on a sphere (hat-box theorem).
    for (int b = 0; b <= bands; ++b) edges[b] = c(2) + s->radius * (-1.0 + 2.0 * b / bands);
  } else {
    constexpr int kPilot = 1 << 16;
    const PatchPointSampler boundary(SurfacePatch::whole(body));
    RandomStream rng(opts.seed, kPartitionPilotStreams);
    pilot.reserve(kPilot);
    std::vector<double> heights;
    heights.reserve(kPilot);
    for (int i = 0; i < kPilot; ++i) {
      pilot.push_back(boundary(rng));
      heights.push_back(pilot.back()(2));
    }
    std::sort(heights.begin(), heights.end());
    for (int b = 1; b < bands; ++b) edges[b] = heights[static_cast<std::size_t>(b) * kPilot / bands];
  }

  CellPartition out;
  const SurfacePatch whole = SurfacePatch::whole(body);
  for (int b = 0; b < bands; ++b) {
    SurfacePatch band = whole;
    if (b > 0) band = band & SurfacePatch::half_space(body, e3, edges[b]);
    if (b + 1 < bands) band = band & ~SurfacePatch::half_space(body, e3, edges[b + 1]);
    for (int j = 0; j < sectors; ++j) {
      SurfacePatch cell = band;
      if (sectors > 1) {
        const double phi0 = 2 * M_PI * j / sectors, phi1 = 2 * M_PI * (j + 1) / sectors;
        const Vec w0 = (Vec(3) << -std::sin(phi0), std::cos(phi0), 0.0).finished();
        const Vec w1 = (Vec(3) << -std::sin(phi1), std::cos(phi1), 0.0).finished();
        cell = cell & SurfacePatch::half_space(body, w0, w0.dot(c)) & ~SurfacePatch::half_space(body, w1, w1.dot(c));
      }
      out.cells.push_back(std::move(cell));
    }
  }

  const std::size_t k = out.cells.size();
  if (pilot.empty()) {
    out.measures.assign(k, 1.0 / static_cast<double>(k));
  } else {
    out.measures.assign(k, 0.0);
    for (const auto& x : pilot) out.measures[out.cell_of(x)] += 1.0 / static_cast<double>(pilot.size());
  }
  return out;
}

ChiSquareResult independence_chisq(const CellPartition& partition, std::uint64_t n, const RunOptions& opts) {
  require_samples(n);
  if (partition.size() < 2) throw DomainError("independence test needs at least two cells");
  const Stopwatch clock;
  const BodyPtr body = partition.cells.front().body_ptr();
  require_closed_surface(*body);
  const std::size_t k = partition.size();
  const auto table = run_chunked<CountVector>(n, opts.workers, [&](std::uint64_t chunk, std::uint64_t count) {
    RandomStream rng(opts.seed, kLineStreams + chunk);
    KinematicLineSampler sampler(body);
    CountVector out;
    out.counts.assign(k * k, 0);
    for (std::uint64_t i = 0; i < count; ++i) {
      const ChordSample chord = sample_chord(sampler, rng);
      ++out.counts[partition.cell_of(chord.entry) * k + partition.cell_of(chord.exit)];
    }
    return out;
  });

  std::vector<double> rows(k, 0.0), cols(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      rows[i] += static_cast<double>(table.counts[i * k + j]);
      cols[j] += static_cast<double>(table.counts[i * k + j]);
    }
  }
  const auto total = static_cast<double>(n);
  ChiSquareResult out;
  out.min_expected = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double expected = rows[i] * cols[j] / total;
      out.min_expected = std::min(out.min_expected, expected);
      if (expected > 0.0) {
        const double diff = static_cast<double>(table.counts[i * k + j]) - expected;
        out.chi2 += diff * diff / expected;
      }
    }
  }
  if (out.min_expected < 5.0)
    throw InsufficientSamples("expected cell count " + format_number(out.min_expected) +
                              " is below 5; increase the number of samples");
  out.dof = static_cast<std::uint64_t>((k - 1) * (k - 1));
  const boost::math::chi_squared dist(static_cast<double>(out.dof));
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.chi2));
  out.n_samples = n;
  out.seed = opts.seed;
  out.cells = k;
  out.table = table.counts;
  out.wall_time = clock.seconds();
  return out;
}

// Archimedes -------------------------------------------------------------------

ArchimedesTable archimedes_check(std::span<const double> t_grid, std::uint64_t n, const RunOptions& opts) {
  require_samples(n);
  if (t_grid.size() < 2) throw DomainError("Archimedes check needs at least two heights");
  const Stopwatch clock;
  const BodyPtr sphere = make_body(ConvexBody::unit_sphere(3));
  std::vector<SurfacePatch> caps;
  for (const double t : t_grid) caps.push_back(SurfacePatch::cap(sphere, Vec::Unit(3, 2), t));

  const auto acc = run_chunked<MeanVector>(n, opts.workers, [&](std::uint64_t chunk, std::uint64_t count) {
    RandomStream rng(opts.seed, kLineStreams + chunk);
    KinematicLineSampler sampler(sphere);
    MeanVector out;
    out.acc.resize(caps.size());
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto draw = sampler.draw(rng);
      for (std::size_t j = 0; j < caps.size(); ++j) out.acc[j].add(count_in_patch(draw.hits, caps[j]));
    }
    return out;
  });

  ArchimedesTable out;
  for (std::size_t j = 0; j < caps.size(); ++j) {
    ArchimedesRow row{t_grid[j], EstimatorReport::from_mean(acc.acc[j], opts.seed, crofton_constant(3)),
                      cap_area_exact(t_grid[j])};
    row.area.wall_time = clock.seconds();
    out.rows.push_back(std::move(row));
  }

  const auto m = static_cast<double>(out.rows.size());
  double mean_t = 0.0, mean_a = 0.0;
  for (const auto& r : out.rows) {
    mean_t += r.t / m;
    mean_a += r.area.estimate / m;
  }
  double stt = 0.0, sta = 0.0;
  for (const auto& r : out.rows) {
    stt += (r.t - mean_t) * (r.t - mean_t);
    sta += (r.t - mean_t) * (r.area.estimate - mean_a);
  }
  out.slope = sta / stt;
  out.intercept = mean_a - out.slope * mean_t;
  if (!(stt > 0.0)) throw DomainError("Archimedes check needs at least two distinct heights");
  for (const auto& r : out.rows) {
    // Rows at t = +-1 carry no sampling noise and are left out of the residual scale.
    if (!(r.area.std_error > 0.0)) continue;
    const double residual = std::abs(r.area.estimate - (out.intercept + out.slope * r.t));
    out.max_residual_sigmas = std::max(out.max_residual_sigmas, residual / r.area.std_error);
  }
  return out;
}

}  // namespace croftonkit
