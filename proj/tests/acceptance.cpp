// Acceptance gate: runs each numbered criterion at full budget and prints one
// PASS/FAIL line per criterion. Indented lines carry the measured values.
//
// Exit status is 0 when the set of failing criteria equals the --expect-fail
// set exactly, so a known deviation stays visible without masking regressions
// (or a deviation that starts passing).

#include <cmath>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "croftonkit/cli.hpp"
#include "croftonkit/curvature.hpp"
#include "croftonkit/estimators.hpp"
#include "croftonkit/intersect.hpp"
#include "croftonkit/io.hpp"
#include "croftonkit/sampler.hpp"

using namespace croftonkit;

namespace {

constexpr std::uint64_t kSeed = 42;

Vec v3(double x, double y, double z) { return Vec{{x, y, z}}; }
BodyPtr s2() { return make_body(ConvexBody::unit_sphere(3)); }

/// Collects the sub-checks of one criterion and their detail lines.
class Criterion {
 public:
  explicit Criterion(std::ostream& log) : log_(log) {}

  void check(bool ok, const std::string& what) {
    all_ok_ = all_ok_ && ok;
    log_ << "  [" << (ok ? "ok" : "FAILED") << "] " << what << '\n';
  }
  void note(const std::string& what) { log_ << "  " << what << '\n'; }

  /// |estimate - exact| <= 3 stderr.
  void within_3se(const std::string& label, double estimate, double se, double exact) {
    const double sig = se > 0 ? std::abs(estimate - exact) / se : (estimate == exact ? 0.0 : INFINITY);
    check(sig <= 3.0, label + ": " + fmt(estimate) + " +- " + fmt(se) + " vs " + fmt(exact) + " (" + fmt(sig) +
                          " se)");
  }
  void within_3se(const std::string& label, const EstimatorReport& r, double exact) {
    within_3se(label, r.estimate, r.std_error, exact);
  }

  bool passed() const { return all_ok_; }

  static std::string fmt(double x) {
    std::ostringstream s;
    s.precision(6);
    s << x;
    return s.str();
  }

 private:
  std::ostream& log_;
  bool all_ok_ = true;
};

using Body = std::function<void(Criterion&, std::uint64_t)>;

void chord_cdf_criterion(Criterion& c, std::uint64_t n) {
  const std::vector<double> grid{0.5, 1.0, 1.5};
  const ChordCdf cdf = chord_cdf(s2(), grid, n, {kSeed});
  for (const auto& p : cdf.points)
    c.within_3se("P(|X-Y| <= " + Criterion::fmt(p.d) + ")", p.cdf, p.std_error, p.d * p.d / 4.0);
}

void archimedes_criterion(Criterion& c, std::uint64_t n) {
  const std::vector<double> grid{-0.5, 0.0, 0.5};
  const ArchimedesTable t = archimedes_check(grid, n, {kSeed});
  for (const auto& row : t.rows) c.within_3se("cap area t=" + Criterion::fmt(row.t), row.area, row.exact);
  c.note("fit: area = " + Criterion::fmt(t.intercept) + " + " + Criterion::fmt(t.slope) + " t (exact 2pi - 2pi t)");
  c.check(t.max_residual_sigmas <= 3.0, "affine fit max residual " + Criterion::fmt(t.max_residual_sigmas) + " se");
}

void hit_distribution_criterion(Criterion& c, std::uint64_t n) {
  const auto body = s2();
  const std::vector<double> sigmas{0.125, 0.25, 0.5};
  std::vector<SurfacePatch> caps;
  for (double s : sigmas) caps.push_back(SurfacePatch::cap(body, v3(0, 0, 1), 1.0 - 2.0 * s));
  const auto dists = estimate_hit_distributions(caps, n, {kSeed});
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const double s = sigmas[i];
    const auto& h = dists[i];
    const std::string tag = "sigma=" + Criterion::fmt(s) + " ";
    c.within_3se(tag + "p0", h.p(0), h.std_error(0), (1 - s) * (1 - s));
    c.within_3se(tag + "p1", h.p(1), h.std_error(1), 2 * s * (1 - s));
    c.within_3se(tag + "p2", h.p(2), h.std_error(2), s * s);
  }
}

void crofton_criterion(Criterion& c, std::uint64_t n, const std::string& cube_path) {
  c.within_3se("hemisphere area", crofton_area(SurfacePatch::cap(s2(), v3(0, 0, 1), 0.0), n, {kSeed}), 2 * M_PI);
  const auto cube = make_body(load_mesh(cube_path).body);
  const EstimatorReport area = crofton_area(SurfacePatch::whole(cube), n, {kSeed});
  const double rel = std::abs(area.estimate - 6.0) / 6.0;
  c.check(rel <= 0.01, "cube mesh area " + Criterion::fmt(area.estimate) + " +- " + Criterion::fmt(area.std_error) +
                           " (rel. error " + Criterion::fmt(rel) + ")");
}

void quad_crofton_criterion(Criterion& c, std::uint64_t n) {
  const EstimatorReport c3 = calibrate_quad_crofton_constant(n, n, {kSeed});
  c.within_3se("c3*", c3, 1.0 / M_PI);

  const QuadCroftonResult hemi = quad_crofton_check(SurfacePatch::cap(s2(), v3(0, 0, 1), 0.0), n, n, {kSeed});
  c.within_3se("hemisphere lhs", hemi.lhs, M_PI);
  c.within_3se("hemisphere rhs", hemi.rhs, M_PI);
  const double hemi_sep = separation_sigmas(hemi.lhs, hemi.rhs);
  c.check(hemi_sep <= 3.0, "hemisphere lhs vs rhs " + Criterion::fmt(hemi_sep) + " combined se");

  const auto ell = make_body(ConvexBody::ellipsoid(v3(1, 1, 1.5)));
  const QuadCroftonResult cut = quad_crofton_check(SurfacePatch::half_space(ell, v3(0.3, 0.2, 1), 0.2), n, n, {kSeed});
  const double cut_sep = separation_sigmas(cut.lhs, cut.rhs);
  c.check(cut_sep <= 3.0, "ellipsoid half-space lhs " + Criterion::fmt(cut.lhs.estimate) + " rhs " +
                              Criterion::fmt(cut.rhs.estimate) + " (" + Criterion::fmt(cut_sep) + " combined se)");
}

void independence_criterion(Criterion& c, std::uint64_t n) {
  const auto sphere = s2();
  const ChiSquareResult round = independence_chisq(equal_area_partition(sphere, 6, 8, {kSeed}), n, {kSeed});
  c.check(round.cells == 48, "48 equal-area cells");
  c.check(round.p_value > 1e-3, "sphere chi2 " + Criterion::fmt(round.chi2) + " dof " + std::to_string(round.dof) +
                                    " p " + Criterion::fmt(round.p_value));
  const auto ell = make_body(ConvexBody::ellipsoid(v3(1, 1, 1.5)));
  const ChiSquareResult skew = independence_chisq(equal_area_partition(ell, 6, 8, {kSeed}), n, {kSeed});
  c.check(skew.p_value < 1e-6, "ellipsoid chi2 " + Criterion::fmt(skew.chi2) + " p " + Criterion::fmt(skew.p_value));
}

void moments_criterion(Criterion& c, std::uint64_t n) {
  for (int dim : {2, 3, 5, 10}) c.within_3se("E<X,Y> n=" + std::to_string(dim), dot_moment(dim, n, {kSeed}), dot_moment_exact(dim));
  const std::vector<int> dims{8, 16, 32, 64};
  const ChordScaling s = chord_scaling(dims, n, {kSeed});
  c.check(std::abs(s.slope + 0.5) <= 0.1,
          "log-log slope " + Criterion::fmt(s.slope) + " +- " + Criterion::fmt(s.slope_std_error));
}

void pair_hit_criterion(Criterion& c, std::uint64_t n) {
  const auto body = s2();
  const auto a = SurfacePatch::cap(body, v3(0, 0, 1), 0.5);
  const auto b = SurfacePatch::cap(body, v3(0, 0, -1), 0.5);
  c.within_3se("S^2 disjoint caps joint", pair_hit_probability(a, b, n, n, {kSeed}).joint, 2 * 0.25 * 0.25);

  const auto s3 = make_body(ConvexBody::unit_sphere(4));
  const double t = std::cos(M_PI / 6);
  const Vec e4 = Vec::Unit(4, 3);
  const auto base = SurfacePatch::cap(s3, e4, t);
  std::vector<EstimatorReport> joint;
  for (double deg : {70.0, 120.0, 180.0}) {
    const double th = deg * M_PI / 180.0;
    const auto other = SurfacePatch::cap(s3, Vec{{std::sin(th), 0, 0, std::cos(th)}}, t);
    joint.push_back(pair_hit_probability(base, other, n, n, {kSeed}).joint);
    c.note("S^3 axes " + Criterion::fmt(deg) + " deg: joint " + Criterion::fmt(joint.back().estimate) + " +- " +
           Criterion::fmt(joint.back().std_error));
  }
  for (std::size_t i = 0; i + 1 < joint.size(); ++i) {
    const double sep = separation_sigmas(joint[i], joint[i + 1]);
    c.check(joint[i].estimate > joint[i + 1].estimate && sep > 3.0,
            "closer pair more likely (" + Criterion::fmt(sep) + " combined se)");
  }
}

void kernel_criterion(Criterion& c, std::uint64_t n) {
  const auto sphere = s2();
  RandomStream rng(kSeed, 0);
  double worst = 0.0;
  for (int i = 0; i < 10'000; ++i) {
    const Vec x = uniform_sphere_point(3, rng);
    const Vec y = uniform_sphere_point(3, rng);
    worst = std::max(worst, std::abs(kernel_F(*sphere, x, y) - 0.25));
  }
  c.check(worst <= 1e-12, "max |F - 1/4| over 1e4 sphere pairs " + Criterion::fmt(worst));

  const SphereCertificate round = sphere_certificate(sphere, n, 10'000, {kSeed});
  const SphereCertificate oblong = sphere_certificate(make_body(ConvexBody::ellipsoid(v3(1, 1, 1.05))), n, 10'000, {kSeed});
  c.check(oblong.kernel_cv > 0.01, "Ellipsoid(1,1,1.05) kernel CV " + Criterion::fmt(oblong.kernel_cv));
  c.check(round.verdict == Verdict::SphereLike, std::string("sphere verdict ") + to_string(round.verdict) + " (CV " +
                                                    Criterion::fmt(round.kernel_cv) + ")");
  c.check(oblong.verdict == Verdict::NotSphere, std::string("ellipsoid verdict ") + to_string(oblong.verdict));
}

void asymptotic_criterion(Criterion& c, std::uint64_t) {
  const auto ell = make_body(ConvexBody::ellipsoid(v3(1, 1, 1.5)));
  const std::vector<double> eps{1e-3};
  for (const Vec& x : {v3(0, 0, 1.5), v3(1, 0, 0)}) {
    const auto form = second_fundamental_form(*ell, x);
    const Vec lambda = principal_curvatures(form);
    const Mat dirs = principal_directions(form);
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
      const double l = std::abs(lambda(i));
      const double f = kernel_local_asymptotic(*ell, x, dirs.col(i), eps).front().kernel;
      const double quartic = std::pow(l, 4) / 4.0;
      const double square = l * l / 4.0;
      const std::string at = "x=(" + Criterion::fmt(x(0)) + "," + Criterion::fmt(x(1)) + "," + Criterion::fmt(x(2)) +
                             ") lambda=" + Criterion::fmt(l) + ": F(eps=1e-3) " + Criterion::fmt(f);
      c.check(std::abs(f - quartic) <= 0.01 * quartic, at + " vs lambda^4/4 " + Criterion::fmt(quartic));
      c.note("  for reference, lambda^2/4 = " + Criterion::fmt(square) + " (rel. diff " +
             Criterion::fmt(std::abs(f - square) / square) + ")");
    }
  }

  const auto s3 = make_body(ConvexBody::unit_sphere(4));
  const Vec x = Vec::Unit(4, 3);
  const auto grid = default_eps_grid();
  const auto rows = kernel_local_asymptotic(*s3, x, Vec::Unit(4, 0), grid);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    const double lx = std::log(r.eps), ly = std::log(r.kernel);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double m = static_cast<double>(rows.size());
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  c.check(std::abs(slope + 1.0) <= 0.05, "S^3 log-log slope of F vs eps " + Criterion::fmt(slope));
}

void property_criterion(Criterion& c, std::uint64_t n) {
  const auto body = s2();
  const auto a = SurfacePatch::cap(body, v3(0, 0, 1), 0.5);
  const auto b = SurfacePatch::cap(body, v3(0, 0, -1), 0.75);
  const std::vector<SurfacePatch> patches{a, ~a, b, a | b};
  const auto h = estimate_hit_distributions(patches, n, {kSeed});
  c.check(h[0].counts[2] == h[1].counts[0] && h[0].counts[0] == h[1].counts[2] && h[0].counts[1] == h[1].counts[1],
          "complement: p2(A) = p0(A^c) exactly (" + std::to_string(h[0].counts[2]) + " = " +
              std::to_string(h[1].counts[0]) + " lines)");

  const PairHitResult joint = pair_hit_probability(a, b, n, n, {kSeed + 1});
  const double lhs = h[3].p(2);
  const double rhs = h[0].p(2) + h[2].p(2) + joint.joint.estimate;
  const double se = std::sqrt(std::pow(h[3].std_error(2), 2) + std::pow(h[0].std_error(2), 2) +
                              std::pow(h[2].std_error(2), 2) + std::pow(joint.joint.std_error, 2));
  c.within_3se("inclusion-exclusion p2(A u B) vs p2(A) + p2(B) + joint", lhs, se, rhs);

  const std::vector<std::vector<std::string>> runs{
      {"chord-cdf", "--samples", std::to_string(n)},
      {"hit-dist", "--samples", std::to_string(n), "--patch", "cap:0.25"},
      {"independence", "--samples", std::to_string(n / 4), "--body", "ellipsoid:1,1,1.5"},
  };
  for (const auto& run : runs) {
    std::set<std::string> payloads;
    for (const char* workers : {"1", "2", "4"}) {
      std::vector<std::string> args{"croftonkit"};
      args.insert(args.end(), run.begin(), run.end());
      args.insert(args.end(), {"--workers", workers});
      payloads.insert(strip_timing(to_json(run_command(parse_config(args)))["results"]).dump());
    }
    c.check(payloads.size() == 1, run.front() + " results byte-identical for workers 1, 2, 4");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"croftonkit acceptance gate"};
  std::uint64_t n = 1'000'000;
  std::string cube_path = "tests/data/cube.off";
  std::set<int> expected_failures;
  std::set<int> only;
  app.add_option("-N,--samples", n, "lines per Monte Carlo estimate");
  app.add_option("--cube", cube_path, "path to the unit cube OFF file");
  app.add_option("--expect-fail", expected_failures, "criteria known to fail");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, Body>> criteria{
      {"chord length distribution on S^2", chord_cdf_criterion},
      {"Archimedes cap areas", archimedes_criterion},
      {"hit-count distribution on caps", hit_distribution_criterion},
      {"Crofton surface areas", [&](Criterion& c, std::uint64_t m) { crofton_criterion(c, m, cube_path); }},
      {"quadratic Crofton identity", quad_crofton_criterion},
      {"entry/exit independence test", independence_criterion},
      {"higher-dimensional chord moments", moments_criterion},
      {"pair-hit probabilities", pair_hit_criterion},
      {"kernel constancy and sphere certificate", kernel_criterion},
      {"curvature asymptotics of the kernel", asymptotic_criterion},
      {"property suites", property_criterion},
  };

  std::set<int> failed;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    std::ostringstream details;
    Criterion c(details);
    try {
      criteria[i].second(c, n);
    } catch (const std::exception& e) {
      c.check(false, std::string("exception: ") + e.what());
    }
    if (!c.passed()) failed.insert(id);
    std::cout << "criterion " << id << ": " << (c.passed() ? "PASS" : "FAIL") << "  " << criteria[i].first << '\n'
              << details.str() << std::flush;
  }

  std::set<int> expected;
  for (int id : expected_failures)
    if (only.empty() || only.count(id)) expected.insert(id);
  std::cout << failed.size() << " of " << (only.empty() ? criteria.size() : only.size()) << " criteria failed";
  if (!expected.empty()) {
    std::cout << "; expected failures:";
    for (int id : expected) std::cout << ' ' << id;
  }
  std::cout << '\n';
  return failed == expected ? 0 : 1;
}
