#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "croftonkit/geometry.hpp"
#include "croftonkit/parallel.hpp"

namespace croftonkit {

struct RunOptions {
  std::uint64_t seed = 42;
  /// 0 selects all hardware threads. Results never depend on this value.
  unsigned workers = 0;
};

using Metadata = std::map<std::string, std::string>;

/// Monte Carlo point estimate with its standard error (sample sd / sqrt(n)).
struct EstimatorReport {
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t n_samples = 0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
  Metadata metadata;

  /// Report for `scale * mean` of the accumulated samples.
  static EstimatorReport from_mean(const MeanAccumulator& acc, std::uint64_t seed, double scale = 1.0);
};

/// |a - b| in units of the combined standard error sqrt(se_a^2 + se_b^2).
double separation_sigmas(const EstimatorReport& a, const EstimatorReport& b);
double separation_sigmas(const EstimatorReport& a, double exact);

std::string format_number(double x);

// Hit-count distribution -------------------------------------------------

/// Frequencies of 0, 1 and 2 patch crossings over kinematic chords. Lines with
/// more than two crossings (non-convex meshes) are counted in `multi`.
struct HitDistribution {
  std::uint64_t counts[3] = {0, 0, 0};
  std::uint64_t multi = 0;
  std::uint64_t n_samples = 0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;

  double p(int k) const;
  /// Binomial standard error of p(k).
  double std_error(int k) const;
  double p_multi() const;
  /// Mean crossing count, the Crofton statistic E[n_l(A)].
  double mean_hits() const;
};

HitDistribution estimate_hit_distribution(const SurfacePatch& patch, std::uint64_t n, const RunOptions& opts = {});
/// One shared line stream for several patches on the same body.
std::vector<HitDistribution> estimate_hit_distributions(std::span<const SurfacePatch> patches, std::uint64_t n,
                                                        const RunOptions& opts = {});

// Crofton -----------------------------------------------------------------

/// Crofton constant |S^{n-1}| / 2 for the kinematic measure normalized to one
/// on lines meeting the unit ball (2*pi in R^3).
double crofton_constant(int n);

/// H^{n-1}(A) = c_n R^{n-1} E[n_l(A)] over lines meeting the enclosing ball of
/// radius R. The ball is a reference sphere with exactly two crossings per
/// line, which fixes the normalization within the same run.
EstimatorReport crofton_area(const SurfacePatch& patch, std::uint64_t n, const RunOptions& opts = {});

struct QuadCroftonResult {
  /// c_3 * integral of n_l(A)^2 - H^2(A).
  EstimatorReport lhs;
  /// c_3^* * double integral of the kernel over A x A.
  EstimatorReport rhs;
  EstimatorReport area;
  EstimatorReport kernel_mean;
  EstimatorReport c3_star;
};

/// c_3^* from the full unit sphere, cached per (n_lines, m_pairs, seed).
EstimatorReport calibrate_quad_crofton_constant(std::uint64_t n_lines, std::uint64_t m_pairs,
                                                const RunOptions& opts = {});

QuadCroftonResult quad_crofton_check(const SurfacePatch& patch, std::uint64_t n_lines, std::uint64_t m_pairs,
                                     const RunOptions& opts = {});

// Chords ------------------------------------------------------------------

struct CdfPoint {
  double d = 0.0;
  double cdf = 0.0;
  double std_error = 0.0;
};

struct ChordCdf {
  std::vector<CdfPoint> points;
  EstimatorReport mean_length;
};

ChordCdf chord_cdf(const BodyPtr& body, std::span<const double> d_grid, std::uint64_t n,
                   const RunOptions& opts = {});

/// E<X, Y> over kinematic chords of the unit sphere in R^n.
EstimatorReport dot_moment(int n, std::uint64_t samples, const RunOptions& opts = {});
/// Closed form (n - 3) / (n + 1) of the same moment.
double dot_moment_exact(int n);

struct ScalingRow {
  int dim = 0;
  EstimatorReport mean_length;
};

struct ChordScaling {
  std::vector<ScalingRow> rows;
  /// Least-squares fit of log E|X - Y| against log n.
  double slope = 0.0;
  double slope_std_error = 0.0;
  double intercept = 0.0;
};

ChordScaling chord_scaling(std::span<const int> dims, std::uint64_t n, const RunOptions& opts = {});

// Pair hits ---------------------------------------------------------------

struct PairHitResult {
  /// P(line meets A and B), lines conditioned on the sphere.
  EstimatorReport joint;
  /// Integral over A x B of |x - y|^{3-n} d sigma d sigma.
  EstimatorReport kernel_integral;
  /// c_n calibrated on a hemisphere and its complement in the same run.
  EstimatorReport constant;
  /// constant * kernel_integral.
  EstimatorReport predicted;
};

PairHitResult pair_hit_probability(const SurfacePatch& a, const SurfacePatch& b, std::uint64_t n_lines,
                                   std::uint64_t m_pairs, const RunOptions& opts = {});

// Independence ------------------------------------------------------------

struct CellPartition {
  std::vector<SurfacePatch> cells;
  std::vector<double> measures;

  std::size_t size() const { return cells.size(); }
  /// Index of the first cell containing x (the last cell when none does,
  /// which only happens on measure-zero cell borders).
  std::size_t cell_of(const Vec& x) const;
};

/// `bands` slabs of equal measure along the body's third axis times `sectors`
/// equal longitude sectors. Spheres use equal-height bands; other bodies in
/// R^3 place band edges at Monte Carlo quantiles of the surface measure.
CellPartition equal_area_partition(const BodyPtr& body, int bands, int sectors, const RunOptions& opts = {});

struct ChiSquareResult {
  double chi2 = 0.0;
  std::uint64_t dof = 0;
  double p_value = 0.0;
  std::uint64_t n_samples = 0;
  std::uint64_t seed = 0;
  double min_expected = 0.0;
  double wall_time = 0.0;
  std::size_t cells = 0;
  /// Row-major k x k counts of (cell of entry, cell of exit).
  std::vector<std::uint64_t> table;
};

/// Pearson chi-square test of independence between entry and exit cells.
/// Throws InsufficientSamples when an expected count falls below 5.
ChiSquareResult independence_chisq(const CellPartition& partition, std::uint64_t n, const RunOptions& opts = {});

// Archimedes ---------------------------------------------------------------

struct ArchimedesRow {
  double t = 0.0;
  EstimatorReport area;
  double exact = 0.0;
};

struct ArchimedesTable {
  std::vector<ArchimedesRow> rows;
  double slope = 0.0;
  double intercept = 0.0;
  /// Largest |area - fit| over rows, in units of each row's standard error.
  /// Rows with zero standard error (t = +-1) are skipped.
  double max_residual_sigmas = 0.0;
};

/// Crofton estimates of cap areas {x in S^2 : x_3 >= t} from one line stream.
ArchimedesTable archimedes_check(std::span<const double> t_grid, std::uint64_t n, const RunOptions& opts = {});

}  // namespace croftonkit
