#include "croftonkit/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "croftonkit/intersect.hpp"

namespace croftonkit {

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"chord-cdf",  "hit-dist",      "crofton-area", "quad-crofton", "independence",
                                              "dot-moment", "chord-scaling", "pair-prob",    "archimedes",   "kernel-scan",
                                              "curvature",  "certify",       "mesh-area"};
  return names;
}

unsigned default_workers() {
  if (const char* env = std::getenv("CROFTONKIT_WORKERS"); env && *env) {
    try {
      std::size_t used = 0;
      const long value = std::stol(env, &used);
      if (used == std::string(env).size() && value > 0) return static_cast<unsigned>(value);
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("CROFTONKIT_WORKERS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

json to_json(const RunConfig& c) {
  return json{{"command", c.command},
              {"body", c.body},
              {"body_hash", descriptor_hash(c.body)},
              {"patches", c.patches},
              {"samples", c.samples},
              {"pairs", c.pairs},
              {"points", c.points},
              {"seed", c.seed},
              {"workers", c.workers},
              {"dim", c.dim},
              {"cells", c.cells},
              {"sectors", c.sectors},
              {"d_grid", c.d_grid},
              {"t_grid", c.t_grid},
              {"eps_grid", c.eps_grid},
              {"dims", c.dims},
              {"point", c.point},
              {"direction", c.direction},
              {"thresholds", {{"kernel_cv", c.thresholds.kernel_cv}, {"umbilic_defect", c.thresholds.umbilic_defect}}},
              {"output", c.output}};
}

namespace {

template <typename T>
void read_key(const json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig config_from_json(const json& j) {
  static const std::set<std::string> known{"command", "body",     "body_hash", "patches", "samples", "pairs",
                                           "points",  "seed",     "workers",   "dim",     "cells",   "sectors",
                                           "d_grid",  "t_grid",   "eps_grid",  "dims",    "point",   "direction",
                                           "thresholds", "output"};
  if (!j.is_object()) throw UsageError("config file must hold a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw UsageError("unknown config key '" + key + "'");
  RunConfig c;
  read_key(j, "command", c.command);
  read_key(j, "body", c.body);
  read_key(j, "patches", c.patches);
  read_key(j, "samples", c.samples);
  read_key(j, "pairs", c.pairs);
  read_key(j, "points", c.points);
  read_key(j, "seed", c.seed);
  read_key(j, "workers", c.workers);
  read_key(j, "dim", c.dim);
  read_key(j, "cells", c.cells);
  read_key(j, "sectors", c.sectors);
  read_key(j, "d_grid", c.d_grid);
  read_key(j, "t_grid", c.t_grid);
  read_key(j, "eps_grid", c.eps_grid);
  read_key(j, "dims", c.dims);
  read_key(j, "point", c.point);
  read_key(j, "direction", c.direction);
  read_key(j, "output", c.output);
  if (j.contains("thresholds")) {
    const auto& t = j["thresholds"];
    if (!t.is_object()) throw UsageError("config key 'thresholds' must be an object");
    for (const auto& [key, value] : t.items())
      if (key != "kernel_cv" && key != "umbilic_defect") throw UsageError("unknown threshold '" + key + "'");
    read_key(t, "kernel_cv", c.thresholds.kernel_cv);
    read_key(t, "umbilic_defect", c.thresholds.umbilic_defect);
  }
  return c;
}

namespace {

std::string joined_commands() {
  std::string out;
  for (const auto& name : command_names()) out += (out.empty() ? "" : ", ") + name;
  return out;
}

void validate(RunConfig& c) {
  const auto& names = command_names();
  if (c.command.empty()) throw UsageError("missing command; expected one of: " + joined_commands());
  if (std::find(names.begin(), names.end(), c.command) == names.end())
    throw UsageError("unknown command '" + c.command + "'; expected one of: " + joined_commands());
  if (c.samples == 0 || c.pairs == 0 || c.points == 0) throw UsageError("sample counts must be positive");
  if (c.dim < 2) throw UsageError("--dim must be at least 2");
  if (c.cells <= 0 || c.sectors <= 0 || c.cells % c.sectors != 0)
    throw UsageError("--cells must be a positive multiple of --sectors");
  if (!(c.thresholds.kernel_cv > 0.0) || !(c.thresholds.umbilic_defect > 0.0))
    throw UsageError("certificate thresholds must be positive");
  if (c.workers == 0) c.workers = default_workers();
  if (!c.body.is_object() || !c.body.contains("kind")) throw UsageError("body descriptor needs a 'kind'");
  // Meshes are read at run time; everything else is checked now.
  if (c.body["kind"] != "mesh") {
    try {
      const BodyPtr body = body_from_json(c.body);
      for (const auto& p : c.patches) patch_from_json(body, p);
    } catch (const Error& e) {
      throw UsageError(std::string("invalid body or patch: ") + e.what());
    }
  }
}

}  // namespace

RunConfig parse_config(const std::vector<std::string>& args) {
  CLI::App app{"croftonkit: Monte Carlo integral geometry of convex bodies", kToolName};
  std::string command, body_spec, config_path, output, d_grid, t_grid, eps_grid, dims, point, direction;
  std::vector<std::string> patch_specs;
  std::uint64_t samples = 0, pairs = 0, points = 0, seed = 0;
  unsigned workers = 0;
  int dim = 0, cells = 0, sectors = 0;
  double kernel_cv = 0.0, umbilic = 0.0;

  app.add_option("command", command, "one of: " + joined_commands());
  auto* o_config = app.add_option("--config", config_path, "JSON config file; flags override its values");
  auto* o_body = app.add_option("--body", body_spec, "sphere[:r], ellipsoid:a,b,c, lp:p, mesh:path, or JSON");
  auto* o_patch = app.add_option("--patch", patch_specs, "whole, cap:t, cap:axis:t, halfspace:w:b, or JSON (repeatable)");
  auto* o_samples = app.add_option("-N,--samples", samples, "number of lines (default 1000000)");
  auto* o_pairs = app.add_option("-M,--pairs", pairs, "number of surface point pairs (default 1000000)");
  auto* o_points = app.add_option("--points", points, "curvature sample points for certify (default 10000)");
  auto* o_seed = app.add_option("--seed", seed, "base seed (default 42)");
  auto* o_workers = app.add_option("--workers", workers, "worker threads (default CROFTONKIT_WORKERS or all cores)");
  auto* o_dim = app.add_option("--dim", dim, "ambient dimension for sphere, lp and dot-moment (default 3)");
  auto* o_cells = app.add_option("--cells", cells, "independence cells (default 48)");
  auto* o_sectors = app.add_option("--sectors", sectors, "longitude sectors per band (default 8)");
  auto* o_d = app.add_option("--d-grid", d_grid, "chord lengths for chord-cdf, comma separated");
  auto* o_t = app.add_option("--t-grid", t_grid, "cap heights for archimedes, comma separated");
  auto* o_eps = app.add_option("--eps", eps_grid, "offsets for kernel-scan, comma separated");
  auto* o_dims = app.add_option("--dims", dims, "dimensions for chord-scaling, comma separated");
  auto* o_point = app.add_option("--point", point, "boundary point x1,..,xn");
  auto* o_direction = app.add_option("--direction", direction, "tangent direction v1,..,vn");
  auto* o_kcv = app.add_option("--kernel-cv-threshold", kernel_cv, "certify kernel CV threshold (default 0.01)");
  auto* o_umb = app.add_option("--umbilic-threshold", umbilic, "certify umbilic defect threshold (default 0.01)");
  auto* o_output = app.add_option("-o,--output", output, "write <output>.json and CSV tables instead of stdout");

  std::vector<std::string> argv_tail(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(argv_tail.begin(), argv_tail.end());
  try {
    app.parse(argv_tail);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  RunConfig c;
  if (o_config->count()) {
    std::ifstream in(config_path);
    if (!in) throw UsageError("cannot read config file " + config_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError("malformed config file: " + std::string(e.what()));
    }
    c = config_from_json(j);
  }

  auto numbers = [](const std::string& text, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw UsageError(std::string("malformed number '") + item + "' in " + flag);
      }
    }
    if (out.empty()) throw UsageError(std::string(flag) + " needs at least one number");
    return out;
  };

  if (!command.empty()) c.command = command;
  if (o_samples->count()) c.samples = samples;
  if (o_pairs->count()) c.pairs = pairs;
  if (o_points->count()) c.points = points;
  if (o_seed->count()) c.seed = seed;
  if (o_workers->count()) c.workers = workers;
  if (o_dim->count()) c.dim = dim;
  if (o_cells->count()) c.cells = cells;
  if (o_sectors->count()) c.sectors = sectors;
  if (o_d->count()) c.d_grid = numbers(d_grid, "--d-grid");
  if (o_t->count()) c.t_grid = numbers(t_grid, "--t-grid");
  if (o_eps->count()) c.eps_grid = numbers(eps_grid, "--eps");
  if (o_dims->count()) {
    c.dims.clear();
    for (const double d : numbers(dims, "--dims")) {
      if (d != std::floor(d)) throw UsageError("--dims needs integers");
      c.dims.push_back(static_cast<int>(d));
    }
  }
  if (o_point->count()) c.point = numbers(point, "--point");
  if (o_direction->count()) c.direction = numbers(direction, "--direction");
  if (o_kcv->count()) c.thresholds.kernel_cv = kernel_cv;
  if (o_umb->count()) c.thresholds.umbilic_defect = umbilic;
  if (o_output->count()) c.output = output;
  try {
    if (o_body->count()) c.body = parse_body_spec(body_spec, c.dim);
    else if (o_dim->count() && c.body.value("kind", "") == "sphere") c.body["dim"] = c.dim;
    if (o_patch->count()) {
      c.patches.clear();
      for (const auto& spec : patch_specs) c.patches.push_back(parse_patch_spec(spec));
    }
  } catch (const json::parse_error& e) {
    throw UsageError("malformed JSON: " + std::string(e.what()));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  validate(c);
  return c;
}

// Commands -------------------------------------------------------------------

namespace {

json vec_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

std::vector<SurfacePatch> patches_or(const RunConfig& c, const BodyPtr& body, std::vector<json> fallback) {
  const auto& specs = c.patches.empty() ? fallback : c.patches;
  std::vector<SurfacePatch> out;
  for (const auto& spec : specs) out.push_back(patch_from_json(body, spec));
  return out;
}

/// Exact normalized measure where one is known: sphere patches on a shared axis, or the whole boundary.
std::optional<double> known_sigma(const SurfacePatch& patch) {
  if (patch.body().as<Sphere>()) return sigma_exact(patch);
  if (std::holds_alternative<patch::Whole>(patch.node().shape)) return 1.0;
  return std::nullopt;
}

json with_exact(json j, const std::optional<double>& exact) {
  j["exact"] = exact ? json(*exact) : json(nullptr);
  return j;
}

/// Boundary point: --point, else where the ray from the centre along the last axis exits.
Vec boundary_point(const RunConfig& c, const ConvexBody& body) {
  if (!c.point.empty()) {
    const Vec x = to_vec(c.point);
    if (x.size() != body.dim()) throw DomainError("--point does not match the body dimension");
    return x;
  }
  const Vec up = Vec::Unit(body.dim(), body.dim() - 1);
  const HitRecord hits = intersect(DirectedLine::through(body.center(), up), body);
  if (hits.empty()) throw DomainError("no boundary point along the last axis");
  return hits.hits.back().point;
}

void chord_cdf_cmd(const RunConfig& c, const BodyPtr& body, const RunOptions& opts, ReportEnvelope& env) {
  const ChordCdf cdf = chord_cdf(body, c.d_grid, c.samples, opts);
  CsvTable table{"chord_cdf", {"d", "cdf", "stderr"}, {}};
  json points = json::array();
  for (const auto& p : cdf.points) {
    table.rows.push_back({p.d, p.cdf, p.std_error});
    points.push_back({{"d", p.d}, {"cdf", p.cdf}, {"stderr", p.std_error}});
  }
  env.results = {{"cdf", points}, {"mean_length", to_json(cdf.mean_length)}};
  env.tables.push_back(std::move(table));
}

void hit_dist_cmd(const RunConfig& c, const BodyPtr& body, const RunOptions& opts, ReportEnvelope& env) {
  const auto patches = patches_or(c, body, {json{{"cap", {{"t", 0.0}}}}});
  const auto dists = estimate_hit_distributions(patches, c.samples, opts);
  CsvTable table{"hit_dist", {"patch", "p0", "p1", "p2", "stderr0", "stderr1", "stderr2", "sigma"}, {}};
  json rows = json::array();
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto sigma = known_sigma(patches[i]);
    json row = to_json(dists[i]);
    row["patch"] = patch_to_json(patches[i]);
    rows.push_back(with_exact(row, sigma));
    table.rows.push_back({static_cast<double>(i), dists[i].p(0), dists[i].p(1), dists[i].p(2), dists[i].std_error(0),
                          dists[i].std_error(1), dists[i].std_error(2), sigma.value_or(std::nan(""))});
  }
  env.results = {{"patches", rows}};
  env.tables.push_back(std::move(table));
}

void crofton_area_cmd(const RunConfig& c, const BodyPtr& body, const RunOptions& opts, ReportEnvelope& env) {
  const auto patches = patches_or(c, body, {"whole"});
  json rows = json::array();
  for (const auto& patch : patches) {
    const auto sigma = known_sigma(patch);
    const auto total = surface_area_exact(*body);
    std::optional<double> exact;
    if (sigma && total) exact = *sigma * *total;
    json row{{"patch", patch_to_json(patch)}, {"area", to_json(crofton_area(patch, c.samples, opts))}};
    rows.push_back(with_exact(row, exact));
  }
  env.results = {{"patches", rows}};
}

void quad_crofton_cmd(const RunConfig& c, const BodyPtr& body, const RunOptions& opts, ReportEnvelope& env) {
  const auto patches = patches_or(c, body, {json{{"cap", {{"t", 0.0}}}}});
  json rows = json::array();
  for (const auto& patch : patches) {
    const QuadCroftonResult r = quad_crofton_check(patch, c.samples, c.pairs, opts);
    rows.push_back({{"patch", patch_to_json(patch)},
                    {"lhs", to_json(r.lhs)},
                    {"rhs", to_json(r.rhs)},
                    {"area", to_json(r.area)},
                    {"kernel_mean", to_json(r.kernel_mean)},
                    {"c3_star", to_json(r.c3_star)},
                    {"separation_sigmas", separation_sigmas(r.lhs, r.rhs)}});
  }
  env.results = {{"patches", rows}};
}

void independence_cmd(const RunConfig& c, const BodyPtr& body, const RunOptions& opts, ReportEnvelope& env) {
  const CellPartition partition = equal_area_partition(body, c.cells / c.sectors, c.sectors, opts);
  const ChiSquareResult r = independence_chisq(partition, c.samples, opts);
  CsvTable table{"contingency", {}, {}};
  for (std::size_t j = 0; j < r.cells; ++j) table.columns.push_back("exit" + std::to_string(j));
  for (std::size_t i = 0; i < r.cells; ++i) {
    std::vector<double> row(r.cells);
    for (std::size_t j = 0; j < r.cells; ++j) row[j] = static_cast<double>(r.table[i * r.cells + j]);
    table.rows.push_back(std::move(row));
  }
  env.results = {{"chi2", r.chi2},           {"dof", r.dof},   {"p", r.p_value},         {"cells", r.cells},
                 {"min_expected", r.min_expected}, {"n_samples", r.n_samples}, {"seed", r.seed},
                 {"wall_time", r.wall_time}};
  env.tables.push_back(std::move(table));
}

void dot_moment_cmd(const RunConfig& c, const RunOptions& opts, ReportEnvelope& env) {
  env.results = {{"dim", c.dim}, {"moment", to_json(dot_moment(c.dim, c.samples, opts))}, {"exact", dot_moment_exact(c.dim)}};
}

void chord_scaling_cmd(const RunConfig& c, const RunOptions& opts, ReportEnvelope& env) {
  const ChordScaling s = chord_scaling(c.dims, c.samples, opts);
  CsvTable table{"chord_scaling", {"dim", "mean_length", "stderr"}, {}};
  json rows = json::array();
  for (const auto& row : s.rows) {
    table.rows.push_back({static_cast<double>(row.dim), row.mean_length.estimate, row.mean_length.std_error});
    rows.push_back({{"dim", row.dim}, {"mean_length", to_json(row.mean_length)}});
  }
  env.results = {{"rows", rows}, {"slope", s.slope}, {"slope_stderr", s.slope_std_error}, {"intercept", s.intercept}};
  env.tables.push_back(std::move(table));
}

void pair_prob_cmd(const RunConfig& c, const BodyPtr& body, const RunOptions& opts, ReportEnvelope& env) {
  const Vec up = Vec::Unit(body->dim(), body->dim() - 1);
  const auto patches =
      patches_or(c, body, {json{{"cap", {{"axis", vec_json(up)}, {"t", 0.5}}}}, json{{"cap", {{"axis", vec_json(-up)}, {"t", 0.5}}}}});
  if (patches.size() != 2) throw DomainError("pair-prob needs exactly two --patch values");
  const PairHitResult r = pair_hit_probability(patches[0], patches[1], c.samples, c.pairs, opts);
  env.results = {{"patches", {patch_to_json(patches[0]), patch_to_json(patches[1])}},
                 {"joint", to_json(r.joint)},
                 {"kernel_integral", to_json(r.kernel_integral)},
                 {"constant", to_json(r.constant)},
                 {"predicted", to_json(r.predicted)},
                 {"separation_sigmas", separation_sigmas(r.joint, r.predicted)}};
}

void archimedes_cmd(const RunConfig& c, const RunOptions& opts, ReportEnvelope& env) {
  const ArchimedesTable t = archimedes_check(c.t_grid, c.samples, opts);
  CsvTable table{"archimedes", {"t", "area", "stderr", "exact"}, {}};
  json rows = json::array();
  for (const auto& row : t.rows) {
    table.rows.push_back({row.t, row.area.estimate, row.area.std_error, row.exact});
    rows.push_back({{"t", row.t}, {"area", to_json(row.area)}, {"exact", row.exact}});
  }
  env.results = {{"rows", rows}, {"slope", t.slope}, {"intercept", t.intercept},
                 {"max_residual_sigmas", t.max_residual_sigmas}};
  env.tables.push_back(std::move(table));
}

void kernel_scan_cmd(const RunConfig& c, const BodyPtr& body, ReportEnvelope& env) {
  const Vec x = boundary_point(c, *body);
  Vec v;
  if (!c.direction.empty()) {
    v = to_vec(c.direction);
  } else {
    v = principal_directions(second_fundamental_form(*body, x)).col(0);
  }
  const auto eps = c.eps_grid.empty() ? default_eps_grid() : c.eps_grid;
  CsvTable table{"kernel_scan", {"eps", "kernel", "predicted"}, {}};
  json rows = json::array();
  for (const auto& row : kernel_local_asymptotic(*body, x, v, eps)) {
    table.rows.push_back({row.eps, row.kernel, row.predicted});
    rows.push_back({{"eps", row.eps}, {"kernel", row.kernel}, {"predicted", row.predicted}});
  }
  env.results = {{"point", vec_json(x)}, {"direction", vec_json(v)}, {"rows", rows}};
  env.tables.push_back(std::move(table));
}

void curvature_cmd(const RunConfig& c, const BodyPtr& body, ReportEnvelope& env) {
  env.results = to_json(second_fundamental_form(*body, boundary_point(c, *body)));
}

void certify_cmd(const RunConfig& c, const BodyPtr& body, const RunOptions& opts, ReportEnvelope& env) {
  env.results = to_json(sphere_certificate(body, c.pairs, c.points, opts, c.thresholds));
}

void mesh_area_cmd(const RunConfig& c, const RunOptions& opts, ReportEnvelope& env) {
  if (c.body.value("kind", "") != "mesh") throw DomainError("mesh-area needs a mesh body (--body mesh:<file>)");
  MeshLoadResult loaded = load_mesh(c.body["path"].get<std::string>());
  const BodyPtr body = make_body(std::move(loaded.body));
  env.results = {{"exact", *surface_area_exact(*body)},
                 {"crofton", to_json(crofton_area(SurfacePatch::whole(body), c.samples, opts))},
                 {"faces", body->as<TriangleMesh>()->face_count()},
                 {"warnings", loaded.warnings}};
}

}  // namespace

ReportEnvelope run_command(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  ReportEnvelope env;
  env.config = to_json(config);
  const RunOptions opts{config.seed, config.workers};
  const std::string& cmd = config.command;

  if (cmd == "dot-moment") {
    dot_moment_cmd(config, opts, env);
  } else if (cmd == "chord-scaling") {
    chord_scaling_cmd(config, opts, env);
  } else if (cmd == "archimedes") {
    archimedes_cmd(config, opts, env);
  } else if (cmd == "mesh-area") {
    mesh_area_cmd(config, opts, env);
  } else {
    const BodyPtr body = body_from_json(config.body);
    if (cmd == "chord-cdf") chord_cdf_cmd(config, body, opts, env);
    else if (cmd == "hit-dist") hit_dist_cmd(config, body, opts, env);
    else if (cmd == "crofton-area") crofton_area_cmd(config, body, opts, env);
    else if (cmd == "quad-crofton") quad_crofton_cmd(config, body, opts, env);
    else if (cmd == "independence") independence_cmd(config, body, opts, env);
    else if (cmd == "pair-prob") pair_prob_cmd(config, body, opts, env);
    else if (cmd == "kernel-scan") kernel_scan_cmd(config, body, env);
    else if (cmd == "curvature") curvature_cmd(config, body, env);
    else if (cmd == "certify") certify_cmd(config, body, opts, env);
    else throw UsageError("unknown command '" + cmd + "'");
  }
  env.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return env;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = parse_config(args);
  } catch (const HelpRequested& help) {
    out << help.what();
    return 0;
  } catch (const UsageError& e) {
    err << "croftonkit: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  }
  try {
    const ReportEnvelope env = run_command(config);
    if (config.output.empty()) {
      out << to_json(env).dump(2) << '\n';
    } else {
      for (const auto& path : emit_report(env, config.output)) out << path.string() << '\n';
    }
    return 0;
  } catch (const UsageError& e) {
    err << "croftonkit: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "croftonkit: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace croftonkit
