#pragma once

// Shared fixtures for the test binaries: independent quadrature oracles,
// hand-rolled random generators for property tests, and mesh builders.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "croftonkit/geometry.hpp"
#include "croftonkit/sampler.hpp"

namespace testing {

using croftonkit::Mat;
using croftonkit::Vec;

// Oracles ------------------------------------------------------------------

template <typename F>
double integrate(F f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

/// Normalized measure of {x in S^{n-1} : x_n >= t} from the polar-angle density sin^{n-2}.
inline double cap_fraction(int n, double t) {
  auto density = [n](double theta) { return std::pow(std::sin(theta), n - 2); };
  return integrate(density, 0.0, std::acos(t)) / integrate(density, 0.0, M_PI);
}

/// E[x_n^2] on S^{n-1}.
inline double sphere_coordinate_second_moment(int n) {
  auto w = [n](double th) { return std::pow(std::sin(th), n - 2); };
  return integrate([&](double th) { return std::cos(th) * std::cos(th) * w(th); }, 0.0, M_PI) /
         integrate(w, 0.0, M_PI);
}

/// E[x_3 | x_3 >= t] on S^2, integrating over the polar angle.
inline double cap_mean_height(double t) {
  const double top = std::acos(t);
  return integrate([](double th) { return std::cos(th) * std::sin(th); }, 0.0, top) /
         integrate([](double th) { return std::sin(th); }, 0.0, top);
}

/// E[|Z|^2] for Z uniform in B^m: radial density m r^{m-1}.
inline double ball_second_moment(int m) {
  return integrate([m](double r) { return r * r * m * std::pow(r, m - 1); }, 0.0, 1.0);
}

/// P(|Z| <= rho) for Z uniform in B^m.
inline double ball_radius_cdf(int m, double rho) {
  return integrate([m](double r) { return m * std::pow(r, m - 1); }, 0.0, rho);
}

/// Mean chord length of S^{n-1}: the chord at offset r has length 2 sqrt(1 - r^2)
/// and offsets are uniform in B^{n-1}.
inline double sphere_mean_chord(int n) {
  const int m = n - 1;
  return integrate([m](double r) { return 2.0 * std::sqrt(1.0 - r * r) * m * std::pow(r, m - 1); }, 0.0, 1.0);
}

/// E<X, Y> over chords of S^{n-1}: <X, Y> = 2 r^2 - 1 at offset r.
inline double sphere_chord_dot(int n) {
  const int m = n - 1;
  return integrate([m](double r) { return (2.0 * r * r - 1.0) * m * std::pow(r, m - 1); }, 0.0, 1.0);
}

/// P(|X - Y| <= d) on S^2 by integrating the chord-length density.
inline double sphere_chord_cdf(double d) {
  // |X - Y| <= d  <=>  r >= sqrt(1 - d^2 / 4); offsets are uniform in the unit disc.
  const double r0 = std::sqrt(std::max(0.0, 1.0 - d * d / 4.0));
  return integrate([](double r) { return 2.0 * r; }, r0, 1.0);
}

/// Positive root of f on [lo, hi] by bracketing.
template <typename F>
double bracketed_root(F f, double lo, double hi) {
  auto [a, b] = boost::math::tools::bisect(f, lo, hi, boost::math::tools::eps_tolerance<double>(50));
  return 0.5 * (a + b);
}

// Generators ------------------------------------------------------------------

/// Hand-rolled generator for property tests, seeded per test case.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed, 0xfeedull) {}
  double uniform(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(rng_.uniform() * (hi - lo + 1)); }
  Vec unit(int n) { return croftonkit::uniform_sphere_point(n, rng_); }
  Vec gaussian(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = rng_.normal();
    return v;
  }
  /// Random rotation from the QR factor of a Gaussian matrix.
  Mat rotation(int n) {
    Mat g(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = rng_.normal();
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ();
    if (q.determinant() < 0) q.col(0) *= -1.0;
    return q;
  }
  croftonkit::RandomStream& stream() { return rng_; }

 private:
  croftonkit::RandomStream rng_;
};

// Meshes ----------------------------------------------------------------------

struct MeshData {
  Eigen::Matrix3Xd vertices;
  Eigen::Matrix3Xi faces;
};

inline MeshData unit_cube() {
  MeshData m;
  m.vertices.resize(3, 8);
  for (int i = 0; i < 8; ++i) m.vertices.col(i) << (i & 1 ? 0.5 : -0.5), (i & 2 ? 0.5 : -0.5), (i & 4 ? 0.5 : -0.5);
  // Vertex index bits: x = 1, y = 2, z = 4. Two outward triangles per face.
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  m.faces.resize(3, 12);
  for (int q = 0; q < 6; ++q) {
    m.faces.col(2 * q) << quads[q][0], quads[q][1], quads[q][2];
    m.faces.col(2 * q + 1) << quads[q][0], quads[q][2], quads[q][3];
  }
  return m;
}

/// Icosahedron subdivided `levels` times with vertices pushed to the unit sphere.
/// Four levels give 2562 vertices.
inline MeshData icosphere(int levels) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts{{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                                     {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                                     {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Eigen::Vector3i> faces{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                     {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                     {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                     {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int level = 0; level < levels; ++level) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = midpoints.find(key); it != midpoints.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      return midpoints[key] = static_cast<int>(verts.size()) - 1;
    };
    std::vector<Eigen::Vector3i> next;
    for (const auto& f : faces) {
      const int ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  MeshData m;
  m.vertices.resize(3, static_cast<Eigen::Index>(verts.size()));
  for (std::size_t i = 0; i < verts.size(); ++i) m.vertices.col(static_cast<Eigen::Index>(i)) = verts[i];
  m.faces.resize(3, static_cast<Eigen::Index>(faces.size()));
  for (std::size_t i = 0; i < faces.size(); ++i) m.faces.col(static_cast<Eigen::Index>(i)) = faces[i];
  return m;
}

inline void write_obj(const std::filesystem::path& path, const MeshData& m) {
  std::ofstream out(path);
  out.precision(17);
  out << "# icosphere\n";
  for (Eigen::Index i = 0; i < m.vertices.cols(); ++i)
    out << "v " << m.vertices(0, i) << ' ' << m.vertices(1, i) << ' ' << m.vertices(2, i) << '\n';
  for (Eigen::Index i = 0; i < m.faces.cols(); ++i)
    out << "f " << m.faces(0, i) + 1 << ' ' << m.faces(1, i) + 1 << ' ' << m.faces(2, i) + 1 << '\n';
}

inline std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / "croftonkit-tests";
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(CROFTONKIT_TEST_DATA) / name;
}

}  // namespace testing
