#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>

#include "croftonkit/intersect.hpp"
#include "croftonkit/io.hpp"
#include "croftonkit/sampler.hpp"
#include "support.hpp"

using namespace croftonkit;
namespace fs = std::filesystem;

namespace {

Vec v3(double x, double y, double z) { return Vec{{x, y, z}}; }

fs::path write_text(const std::string& name, const std::string& text) {
  const fs::path path = testing::scratch_dir() / name;
  std::ofstream(path) << text;
  return path;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("OFF cube loads closed with area 6") {
  const MeshLoadResult r = load_mesh(testing::data_path("cube.off"));
  const auto* mesh = r.body.as<TriangleMesh>();
  REQUIRE(mesh != nullptr);
  CHECK(mesh->face_count() == 12);
  CHECK(mesh->closed());
  CHECK(mesh->total_area() == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(r.warnings.empty());
}

TEST_CASE("truncated OFF reports the offending line") {
  try {
    load_mesh(testing::data_path("truncated.off"));
    FAIL("expected MeshParseError");
  } catch (const MeshParseError& e) {
    CHECK(e.line() == 10);
    CHECK(std::string(e.what()).find("truncated.off:10") != std::string::npos);
  }
  CHECK_THROWS_AS(load_mesh(testing::scratch_dir() / "does-not-exist.off"), Error);
}

TEST_CASE("OBJ icosphere: every interior ray crosses exactly twice") {
  const fs::path path = testing::scratch_dir() / "icosphere.obj";
  testing::write_obj(path, testing::icosphere(4));
  const MeshLoadResult r = load_mesh(path);
  const auto* mesh = r.body.as<TriangleMesh>();
  REQUIRE(mesh != nullptr);
  CHECK(mesh->closed());
  CHECK(r.warnings.empty());

  RandomStream rng(42, 11);
  int bad = 0;
  for (int i = 0; i < 10'000; ++i) {
    const Vec anchor = 0.5 * uniform_ball_point(3, rng);
    const Vec dir = uniform_sphere_point(3, rng);
    if (intersect(DirectedLine::through(anchor, dir), r.body).transversal_count() != 2) ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("OBJ parsing: slash tokens, negative indices, and polygons") {
  const std::string verts = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nvn 0 0 1\nvt 0 0\n";
  const auto tet = write_text("tet.obj", verts +
                                             "f 1/1/1 3/1/1 2/1/1\n"
                                             "f 1//1 2//1 4//1\n"
                                             "f -4 -1 -2\n"
                                             "f 2 3 4\n");
  const MeshLoadResult r = load_mesh(tet);
  const auto* mesh = r.body.as<TriangleMesh>();
  REQUIRE(mesh != nullptr);
  CHECK(mesh->face_count() == 4);
  CHECK(mesh->closed());
  CHECK(mesh->total_area() == doctest::Approx(1.5 + std::sqrt(3.0) / 2.0));

  const auto quad = write_text("quad.obj", verts + "f 1 2 3 4\n");
  CHECK_THROWS_AS(load_mesh(quad), MeshParseError);
  const auto range = write_text("range.obj", verts + "f 1 2 9\n");
  CHECK_THROWS_AS(load_mesh(range), MeshParseError);
  const auto junk = write_text("junk.obj", verts + "f 1 2 x\n");
  CHECK_THROWS_AS(load_mesh(junk), MeshParseError);
}

TEST_CASE("open meshes load with a warning") {
  const auto open = write_text("open.off", "OFF\n4 3 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n");
  const MeshLoadResult r = load_mesh(open);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings.front().find("open mesh") == 0);
  CHECK_FALSE(r.body.as<TriangleMesh>()->closed());
}

TEST_CASE("body descriptors") {
  CHECK(body_from_json({{"kind", "sphere"}, {"dim", 4}})->dim() == 4);
  const auto ell = body_from_json({{"kind", "ellipsoid"}, {"semi_axes", {1.0, 1.0, 1.5}}});
  CHECK(ell->as<Ellipsoid>() != nullptr);
  CHECK(body_from_json({{"kind", "lp_ball"}, {"dim", 3}, {"exponent", 4.0}})->as<ImplicitConvex>() != nullptr);
  CHECK(body_from_json({{"kind", "mesh"}, {"path", testing::data_path("cube.off").string()}})->as<TriangleMesh>() != nullptr);

  CHECK_THROWS_AS(body_from_json({{"kind", "sphere"}, {"dim", 3}, {"radius", 1.0}, {"colour", "red"}}), DomainError);
  CHECK_THROWS_AS(body_from_json({{"kind", "torus"}}), DomainError);
  CHECK_THROWS_AS(body_from_json({{"kind", "lp_ball"}, {"dim", 3}, {"exponent", 1.5}}), DomainError);
  CHECK_THROWS_AS(body_from_json(json::array()), DomainError);

  CHECK(parse_body_spec("sphere", 5) == json({{"kind", "sphere"}, {"dim", 5}}));
  CHECK(parse_body_spec("sphere:2", 3)["radius"] == 2.0);
  CHECK(parse_body_spec("ellipsoid:1,1,1.5", 3)["semi_axes"] == json({1.0, 1.0, 1.5}));
  CHECK(parse_body_spec("lp:6", 3)["exponent"] == 6.0);
  CHECK(parse_body_spec("mesh:a.off", 3)["path"] == "a.off");
  CHECK(parse_body_spec(R"({"kind":"sphere","dim":3})", 7)["dim"] == 3);
  CHECK_THROWS_AS(parse_body_spec("ellipsoid:1,x,2", 3), DomainError);
  CHECK_THROWS_AS(parse_body_spec("cube", 3), DomainError);
}

TEST_CASE("property: patch descriptors round trip") {
  const auto body = make_body(ConvexBody::unit_sphere(3));
  const std::vector<SurfacePatch> patches{
      SurfacePatch::whole(body),
      SurfacePatch::cap(body, v3(0, 0, 1), 0.25),
      SurfacePatch::half_space(body, v3(0.3, 0.2, 1), 0.1),
      SurfacePatch::lat_lon_box(body, -0.5, 0.5, 0.0, 1.0),
      SurfacePatch::cap(body, v3(1, 0, 0), 0.0) | SurfacePatch::cap(body, v3(0, 1, 0), 0.5),
      SurfacePatch::cap(body, v3(1, 0, 0), 0.0) & ~SurfacePatch::cap(body, v3(0, 0, 1), 0.5),
  };
  testing::Gen gen(5);
  for (const auto& p : patches) {
    const json j = patch_to_json(p);
    const SurfacePatch back = patch_from_json(body, j);
    CHECK(patch_to_json(back) == j);
    CHECK(patch_from_json(body, json::parse(j.dump())).node().shape.index() == p.node().shape.index());
    for (int i = 0; i < 200; ++i) {
      const Vec x = gen.unit(3);
      CHECK(patch_contains(back, x) == patch_contains(p, x));
    }
  }
  CHECK(parse_patch_spec("whole") == "whole");
  CHECK(parse_patch_spec("cap:0.5") == json({{"cap", {{"t", 0.5}}}}));
  CHECK(parse_patch_spec("cap:0,0,-1:0.5")["cap"]["axis"] == json({0.0, 0.0, -1.0}));
  CHECK(parse_patch_spec("halfspace:0,0,1:0.2")["halfspace"]["offset"] == 0.2);
  CHECK_THROWS_AS(parse_patch_spec("blob:1"), DomainError);
  CHECK_THROWS_AS(patch_from_json(body, json{{"cap", {{"t", 0.5}}}, {"halfspace", 1}}), DomainError);
}

TEST_CASE("report envelopes round trip and emit CSV tables") {
  ReportEnvelope env;
  env.config = {{"command", "chord-cdf"}, {"seed", 42}, {"samples", 1000}, {"body_hash", "00ff"}};
  env.results = {{"mean_length", 1.25}, {"wall_time", 0.5}};
  env.wall_time = 0.75;
  env.tables.push_back({"chord_cdf", {"d", "cdf", "stderr"}, {{0.5, 0.0625, 0.001}, {1.0, 0.25, 0.002}}});

  const json j = to_json(env);
  CHECK(j["tool"] == "croftonkit");
  const ReportEnvelope back = envelope_from_json(j);
  CHECK(to_json(back) == j);

  const json stripped = strip_timing(j);
  CHECK_FALSE(stripped.contains("wall_time"));
  CHECK_FALSE(stripped["results"].contains("wall_time"));
  CHECK(stripped["results"]["mean_length"] == 1.25);

  const fs::path out = testing::scratch_dir() / "report";
  const auto written = emit_report(env, out);
  REQUIRE(written.size() == 2);
  CHECK(written[0] == testing::scratch_dir() / "report.json");
  CHECK(written[1] == testing::scratch_dir() / "report_chord_cdf.csv");
  CHECK(json::parse(read_text(written[0])) == j);
  std::istringstream csv(read_text(written[1]));
  std::string comment, header, row;
  std::getline(csv, comment);
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(comment.rfind("# croftonkit", 0) == 0);
  CHECK(comment.find("command=chord-cdf") != std::string::npos);
  CHECK(comment.find("seed=42") != std::string::npos);
  CHECK(header == "d,cdf,stderr");
  CHECK(row == "0.5,0.0625,0.001");

  CHECK_THROWS_AS(emit_report(env, testing::scratch_dir() / "no-such-dir" / "x"), Error);
}

TEST_CASE("descriptor hashes are stable and discriminating") {
  const json a{{"kind", "sphere"}, {"dim", 3}};
  const json b{{"dim", 3}, {"kind", "sphere"}};
  const json c{{"kind", "sphere"}, {"dim", 4}};
  CHECK(descriptor_hash(a).size() == 16);
  CHECK(descriptor_hash(a) == descriptor_hash(b));
  CHECK(descriptor_hash(a) != descriptor_hash(c));
}

TEST_CASE("estimator reports serialize") {
  EstimatorReport r;
  r.estimate = 3.25;
  r.std_error = 0.01;
  r.n_samples = 1000;
  r.seed = 7;
  const EstimatorReport back = report_from_json(to_json(r));
  CHECK(back.estimate == r.estimate);
  CHECK(back.std_error == r.std_error);
  CHECK(back.n_samples == r.n_samples);
  CHECK(back.seed == r.seed);
}
