#include "croftonkit/io.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace croftonkit {

namespace fs = std::filesystem;

// Mesh input ---------------------------------------------------------------------

namespace {

std::string strip_comment(const std::string& line) {
  const auto hash = line.find('#');
  return hash == std::string::npos ? line : line.substr(0, hash);
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

// Line reader that tracks 1-based line numbers and skips comments and blanks.
class LineReader {
 public:
  LineReader(std::istream& in, fs::path path) : in_(in), path_(std::move(path)) {}

  bool next(std::string& out) {
    std::string raw;
    while (std::getline(in_, raw)) {
      ++line_;
      if (!raw.empty() && raw.back() == '\r') raw.pop_back();
      raw = strip_comment(raw);
      if (!blank(raw)) {
        out = raw;
        return true;
      }
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw MeshParseError(path_.string(), line_, what); }
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  fs::path path_;
  std::size_t line_ = 0;
};

ConvexBody read_off(std::istream& in, const fs::path& path) {
  LineReader reader(in, path);
  std::string line;
  if (!reader.next(line)) reader.fail("empty file, expected OFF header");
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic != "OFF") reader.fail("expected OFF header, found '" + magic + "'");
  long nv = -1, nf = -1, ne = 0;
  if (!(header >> nv)) {
    if (!reader.next(line)) reader.fail("unexpected end of file, expected vertex/face counts");
    std::istringstream counts(line);
    if (!(counts >> nv >> nf)) reader.fail("malformed vertex/face counts");
    counts >> ne;
  } else if (!(header >> nf)) {
    reader.fail("malformed vertex/face counts");
  }
  if (nv < 3 || nf < 1) reader.fail("mesh needs at least 3 vertices and 1 face");

  Eigen::Matrix3Xd vertices(3, nv);
  for (long i = 0; i < nv; ++i) {
    if (!reader.next(line)) reader.fail("unexpected end of file, expected vertex " + std::to_string(i));
    std::istringstream in_line(line);
    if (!(in_line >> vertices(0, i) >> vertices(1, i) >> vertices(2, i))) reader.fail("malformed vertex record");
  }
  Eigen::Matrix3Xi faces(3, nf);
  for (long f = 0; f < nf; ++f) {
    if (!reader.next(line)) reader.fail("unexpected end of file, expected face " + std::to_string(f));
    std::istringstream in_line(line);
    int count = 0;
    if (!(in_line >> count)) reader.fail("malformed face record");
    if (count != 3) reader.fail("only triangular faces are supported, found a " + std::to_string(count) + "-gon");
    for (int k = 0; k < 3; ++k) {
      long idx = -1;
      if (!(in_line >> idx)) reader.fail("malformed face record");
      if (idx < 0 || idx >= nv) reader.fail("face index " + std::to_string(idx) + " out of range");
      faces(k, f) = static_cast<int>(idx);
    }
  }
  return ConvexBody::mesh(std::move(vertices), std::move(faces));
}

ConvexBody read_obj(std::istream& in, const fs::path& path) {
  LineReader reader(in, path);
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3i> faces;
  std::string line;
  while (reader.next(line)) {
    std::istringstream in_line(line);
    std::string tag;
    in_line >> tag;
    if (tag == "v") {
      Eigen::Vector3d v;
      if (!(in_line >> v(0) >> v(1) >> v(2))) reader.fail("malformed vertex record");
      vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<long> idx;
      std::string token;
      while (in_line >> token) {
        const std::string head = token.substr(0, token.find('/'));
        long value = 0;
        try {
          std::size_t used = 0;
          value = std::stol(head, &used);
          if (used != head.size()) throw std::invalid_argument(head);
        } catch (const std::exception&) {
          reader.fail("malformed face index '" + token + "'");
        }
        // OBJ indices are 1-based; negative values count back from the last vertex.
        const long resolved = value > 0 ? value - 1 : static_cast<long>(vertices.size()) + value;
        if (value == 0 || resolved < 0 || resolved >= static_cast<long>(vertices.size()))
          reader.fail("face index " + std::to_string(value) + " out of range");
        idx.push_back(resolved);
      }
      if (idx.size() != 3)
        reader.fail("only triangular faces are supported, found " + std::to_string(idx.size()) + " indices");
      faces.emplace_back(static_cast<int>(idx[0]), static_cast<int>(idx[1]), static_cast<int>(idx[2]));
    }
    // Other OBJ records (vn, vt, o, g, s, usemtl, ...) carry nothing we use.
  }
  if (vertices.size() < 3 || faces.empty()) reader.fail("OBJ file has no triangles");
  Eigen::Matrix3Xd v(3, static_cast<Eigen::Index>(vertices.size()));
  for (std::size_t i = 0; i < vertices.size(); ++i) v.col(static_cast<Eigen::Index>(i)) = vertices[i];
  Eigen::Matrix3Xi f(3, static_cast<Eigen::Index>(faces.size()));
  for (std::size_t i = 0; i < faces.size(); ++i) f.col(static_cast<Eigen::Index>(i)) = faces[i];
  return ConvexBody::mesh(std::move(v), std::move(f));
}

}  // namespace

MeshLoadResult load_mesh(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mesh file " + path.string());
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  ConvexBody body = ext == ".obj" ? read_obj(in, path) : read_off(in, path);
  const auto& mesh = *body.as<TriangleMesh>();
  MeshLoadResult out{std::move(body), {}};
  if (mesh.boundary_edges() > 0)
    out.warnings.push_back("open mesh: " + std::to_string(mesh.boundary_edges()) +
                           " boundary edge(s); chord estimators assume a closed surface");
  if (mesh.non_manifold_edges() > 0)
    out.warnings.push_back("non-manifold mesh: " + std::to_string(mesh.non_manifold_edges()) +
                           " edge(s) shared by more than two faces");
  if (mesh.degenerate_faces() > 0)
    out.warnings.push_back(std::to_string(mesh.degenerate_faces()) + " zero-area face(s)");
  return out;
}

// Descriptors --------------------------------------------------------------------

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) throw DomainError(what + " must be a JSON object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!keys.count(key)) throw DomainError("unknown key '" + key + "' in " + what);
}

Vec vec_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw DomainError(what + " must be a non-empty array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw DomainError(what + " must contain numbers only");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

json vec_to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

std::vector<double> parse_csv_numbers(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DomainError("malformed number '" + item + "' in " + what);
    }
  }
  if (out.empty()) throw DomainError(what + " needs at least one number");
  return out;
}

ImplicitConvex lp_ball(int dim, double p) {
  if (!(p >= 2.0)) throw DomainError("lp ball needs exponent >= 2 for a C^2 boundary");
  ImplicitConvex body;
  body.dim = dim;
  // Largest |x| on the boundary sits on the diagonal: n^{1/2 - 1/p}.
  body.bounding_radius = 1.05 * std::pow(static_cast<double>(dim), 0.5 - 1.0 / p);
  body.value = [p](const Vec& x) { return x.array().abs().pow(p).sum() - 1.0; };
  body.gradient = [p](const Vec& x) -> Vec { return (p * x.array().abs().pow(p - 1) * x.array().sign()).matrix(); };
  body.hessian = [p](const Vec& x) -> Mat {
    return (p * (p - 1) * x.array().abs().pow(p - 2)).matrix().asDiagonal();
  };
  body.label = "lp_ball(p=" + format_number(p) + ")";
  return body;
}

ImplicitConvex rigid_ellipsoid(const Vec& axes, const Mat& rotation, const Vec& translation) {
  const auto dim = axes.size();
  if (rotation.rows() != dim || rotation.cols() != dim || translation.size() != dim)
    throw DomainError("rotation and translation must match the ellipsoid dimension");
  if (!(rotation.transpose() * rotation).isIdentity(1e-9)) throw DomainError("rotation must be orthogonal");
  const Mat metric = rotation * axes.array().square().inverse().matrix().asDiagonal() * rotation.transpose();
  ImplicitConvex body;
  body.dim = static_cast<int>(dim);
  body.bounding_radius = 1.01 * (axes.maxCoeff() + translation.norm());
  body.value = [metric, translation](const Vec& x) {
    const Vec r = x - translation;
    return 0.5 * r.dot(metric * r) - 0.5;
  };
  body.gradient = [metric, translation](const Vec& x) -> Vec { return metric * (x - translation); };
  body.hessian = [metric](const Vec&) -> Mat { return metric; };
  body.label = "implicit_ellipsoid";
  return body;
}

}  // namespace

BodyPtr body_from_json(const json& d) {
  if (!d.is_object() || !d.contains("kind") || !d["kind"].is_string()) throw DomainError("body needs a string 'kind'");
  const auto kind = d["kind"].get<std::string>();
  if (kind == "sphere") {
    reject_unknown_keys(d, {"kind", "dim", "radius", "center"}, "sphere body");
    const int dim = d.value("dim", d.contains("center") ? static_cast<int>(d["center"].size()) : 3);
    const Vec center = d.contains("center") ? vec_from_json(d["center"], "sphere centre") : Vec::Zero(dim);
    if (center.size() != dim) throw DomainError("sphere centre does not match 'dim'");
    return make_body(ConvexBody::sphere(center, d.value("radius", 1.0)));
  }
  if (kind == "ellipsoid") {
    reject_unknown_keys(d, {"kind", "semi_axes"}, "ellipsoid body");
    if (!d.contains("semi_axes")) throw DomainError("ellipsoid needs 'semi_axes'");
    return make_body(ConvexBody::ellipsoid(vec_from_json(d["semi_axes"], "semi_axes")));
  }
  if (kind == "lp_ball") {
    reject_unknown_keys(d, {"kind", "dim", "exponent"}, "lp_ball body");
    return make_body(ConvexBody::implicit(lp_ball(d.value("dim", 3), d.value("exponent", 4.0))));
  }
  if (kind == "implicit_ellipsoid") {
    reject_unknown_keys(d, {"kind", "semi_axes", "rotation", "translation"}, "implicit_ellipsoid body");
    if (!d.contains("semi_axes")) throw DomainError("implicit_ellipsoid needs 'semi_axes'");
    const Vec axes = vec_from_json(d["semi_axes"], "semi_axes");
    Mat rotation = Mat::Identity(axes.size(), axes.size());
    if (d.contains("rotation")) {
      const auto& rows = d["rotation"];
      if (!rows.is_array() || rows.size() != static_cast<std::size_t>(axes.size()))
        throw DomainError("rotation must be a square matrix matching the dimension");
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const Vec row = vec_from_json(rows[i], "rotation row");
        if (row.size() != axes.size()) throw DomainError("rotation must be a square matrix matching the dimension");
        rotation.row(static_cast<Eigen::Index>(i)) = row.transpose();
      }
    }
    const Vec translation = d.contains("translation") ? vec_from_json(d["translation"], "translation")
                                                      : Vec::Zero(axes.size());
    return make_body(ConvexBody::implicit(rigid_ellipsoid(axes, rotation, translation)));
  }
  if (kind == "mesh") {
    reject_unknown_keys(d, {"kind", "path"}, "mesh body");
    if (!d.contains("path") || !d["path"].is_string()) throw DomainError("mesh body needs a 'path'");
    return make_body(load_mesh(d["path"].get<std::string>()).body);
  }
  throw DomainError("unknown body kind '" + kind + "'");
}

json parse_body_spec(const std::string& spec, int dim) {
  if (!spec.empty() && spec.front() == '{') return json::parse(spec);
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string tail = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "sphere") {
    json d{{"kind", "sphere"}, {"dim", dim}};
    if (!tail.empty()) d["radius"] = parse_csv_numbers(tail, "sphere radius").front();
    return d;
  }
  if (head == "ellipsoid") return json{{"kind", "ellipsoid"}, {"semi_axes", parse_csv_numbers(tail, "semi-axes")}};
  if (head == "lp") {
    return json{{"kind", "lp_ball"}, {"dim", dim}, {"exponent", tail.empty() ? 4.0 : parse_csv_numbers(tail, "exponent").front()}};
  }
  if (head == "mesh") {
    if (tail.empty()) throw DomainError("mesh body needs a path: mesh:<file>");
    return json{{"kind", "mesh"}, {"path", tail}};
  }
  throw DomainError("unknown body '" + spec + "'");
}

SurfacePatch patch_from_json(const BodyPtr& body, const json& d) {
  if (d.is_string()) {
    if (d.get<std::string>() == "whole") return SurfacePatch::whole(body);
    throw DomainError("unknown patch '" + d.get<std::string>() + "'");
  }
  if (!d.is_object() || d.size() != 1) throw DomainError("patch must be \"whole\" or a single-key object");
  const auto& [key, v] = *d.items().begin();
  if (key == "whole") return SurfacePatch::whole(body);
  if (key == "cap") {
    reject_unknown_keys(v, {"axis", "t"}, "cap patch");
    const Vec axis = v.contains("axis") ? vec_from_json(v["axis"], "cap axis") : Vec::Unit(body->dim(), body->dim() - 1);
    return SurfacePatch::cap(body, axis, v.at("t").get<double>());
  }
  if (key == "halfspace") {
    reject_unknown_keys(v, {"normal", "offset"}, "halfspace patch");
    return SurfacePatch::half_space(body, vec_from_json(v.at("normal"), "half-space normal"), v.value("offset", 0.0));
  }
  if (key == "latlon") {
    reject_unknown_keys(v, {"lat_min", "lat_max", "lon_min", "lon_max"}, "latlon patch");
    return SurfacePatch::lat_lon_box(body, v.value("lat_min", -M_PI / 2), v.value("lat_max", M_PI / 2),
                                     v.value("lon_min", -M_PI), v.value("lon_max", M_PI));
  }
  if (key == "union" || key == "intersection") {
    if (!v.is_array() || v.empty()) throw DomainError(key + " needs a non-empty array of patches");
    SurfacePatch acc = patch_from_json(body, v[0]);
    for (std::size_t i = 1; i < v.size(); ++i) {
      const SurfacePatch next = patch_from_json(body, v[i]);
      acc = key == "union" ? (acc | next) : (acc & next);
    }
    return acc;
  }
  if (key == "complement") return ~patch_from_json(body, v);
  throw DomainError("unknown patch kind '" + key + "'");
}

namespace {

json node_to_json(const PatchNode& node) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, patch::Whole>) {
          return "whole";
        } else if constexpr (std::is_same_v<T, patch::Cap>) {
          return json{{"cap", {{"axis", vec_to_json(s.axis)}, {"t", s.t}}}};
        } else if constexpr (std::is_same_v<T, patch::LatLonBox>) {
          return json{{"latlon",
                       {{"lat_min", s.lat_min}, {"lat_max", s.lat_max}, {"lon_min", s.lon_min}, {"lon_max", s.lon_max}}}};
        } else if constexpr (std::is_same_v<T, patch::HalfSpace>) {
          return json{{"halfspace", {{"normal", vec_to_json(s.normal)}, {"offset", s.offset}}}};
        } else if constexpr (std::is_same_v<T, patch::Union> || std::is_same_v<T, patch::Intersection>) {
          json parts = json::array();
          for (const auto& p : s.parts) parts.push_back(node_to_json(*p));
          return json{{std::is_same_v<T, patch::Union> ? "union" : "intersection", parts}};
        } else {
          return json{{"complement", node_to_json(*s.part)}};
        }
      },
      node.shape);
}

}  // namespace

json patch_to_json(const SurfacePatch& patch) { return node_to_json(patch.node()); }

json parse_patch_spec(const std::string& spec) {
  if (!spec.empty() && (spec.front() == '{' || spec.front() == '"')) return json::parse(spec);
  if (spec == "whole") return "whole";
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.empty()) throw DomainError("empty patch specification");
  if (parts[0] == "cap" && parts.size() == 2) return json{{"cap", {{"t", parse_csv_numbers(parts[1], "cap height").front()}}}};
  if (parts[0] == "cap" && parts.size() == 3)
    return json{{"cap", {{"axis", parse_csv_numbers(parts[1], "cap axis")}, {"t", parse_csv_numbers(parts[2], "cap height").front()}}}};
  if (parts[0] == "halfspace" && parts.size() == 3)
    return json{{"halfspace",
                 {{"normal", parse_csv_numbers(parts[1], "half-space normal")},
                  {"offset", parse_csv_numbers(parts[2], "half-space offset").front()}}}};
  throw DomainError("unknown patch '" + spec + "'");
}

std::string descriptor_hash(const json& descriptor) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : descriptor.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

// Reports ------------------------------------------------------------------------

json to_json(const EstimatorReport& r) {
  json meta = json::object();
  for (const auto& [k, v] : r.metadata) meta[k] = v;
  return json{{"estimate", r.estimate}, {"stderr", r.std_error}, {"n_samples", r.n_samples},
              {"seed", r.seed},         {"wall_time", r.wall_time}, {"metadata", meta}};
}

EstimatorReport report_from_json(const json& j) {
  EstimatorReport r;
  r.estimate = j.at("estimate").get<double>();
  r.std_error = j.at("stderr").get<double>();
  r.n_samples = j.at("n_samples").get<std::uint64_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.wall_time = j.value("wall_time", 0.0);
  if (j.contains("metadata"))
    for (const auto& [k, v] : j["metadata"].items()) r.metadata[k] = v.get<std::string>();
  return r;
}

json to_json(const HitDistribution& h) {
  return json{{"p0", h.p(0)},
              {"p1", h.p(1)},
              {"p2", h.p(2)},
              {"stderr", {h.std_error(0), h.std_error(1), h.std_error(2)}},
              {"counts", {h.counts[0], h.counts[1], h.counts[2]}},
              {"multi_crossings", h.multi},
              {"mean_hits", h.mean_hits()},
              {"n_samples", h.n_samples},
              {"seed", h.seed},
              {"wall_time", h.wall_time}};
}

json to_json(const SphereCertificate& c) {
  return json{{"kernel_cv", c.kernel_cv},
              {"kernel_mean", c.kernel_mean},
              {"max_umbilic_defect", c.max_umbilic_defect},
              {"verdict", to_string(c.verdict)},
              {"thresholds", {{"kernel_cv", c.thresholds.kernel_cv}, {"umbilic_defect", c.thresholds.umbilic_defect}}},
              {"pairs", c.pairs},
              {"points", c.points},
              {"seed", c.seed},
              {"wall_time", c.wall_time}};
}

json to_json(const SecondFundamentalForm& form) {
  json q = json::array();
  for (Eigen::Index i = 0; i < form.Q.rows(); ++i) q.push_back(vec_to_json(form.Q.row(i).transpose()));
  json frame = json::array();
  for (Eigen::Index i = 0; i < form.tangent_frame.cols(); ++i) frame.push_back(vec_to_json(form.tangent_frame.col(i)));
  const Vec lambda = principal_curvatures(form);
  const Mat dirs = principal_directions(form);
  json directions = json::array();
  for (Eigen::Index i = 0; i < dirs.cols(); ++i) directions.push_back(vec_to_json(dirs.col(i)));
  return json{{"base_point", vec_to_json(form.base_point)},
              {"normal", vec_to_json(form.normal)},
              {"tangent_frame", frame},
              {"Q", q},
              {"principal_curvatures", vec_to_json(lambda)},
              {"principal_directions", directions}};
}

json to_json(const ReportEnvelope& e) {
  return json{{"tool", e.tool}, {"version", e.version}, {"config", e.config}, {"results", e.results},
              {"timing", {{"wall_time", e.wall_time}}}};
}

ReportEnvelope envelope_from_json(const json& j) {
  reject_unknown_keys(j, {"tool", "version", "config", "results", "timing"}, "report envelope");
  ReportEnvelope e;
  e.tool = j.at("tool").get<std::string>();
  e.version = j.at("version").get<std::string>();
  e.config = j.at("config");
  e.results = j.at("results");
  e.wall_time = j.at("timing").at("wall_time").get<double>();
  return e;
}

std::string to_csv(const CsvTable& table, const std::string& comment) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
  return out.str();
}

std::vector<fs::path> emit_report(const ReportEnvelope& envelope, const fs::path& output) {
  std::vector<fs::path> written;
  fs::path json_path = output;
  if (json_path.extension() != ".json") json_path += ".json";
  auto write = [&](const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
    written.push_back(path);
  };
  write(json_path, to_json(envelope).dump(2) + "\n");

  const auto& cfg = envelope.config;
  std::ostringstream comment;
  comment << kToolName << ' ' << envelope.version;
  if (cfg.contains("command")) comment << " command=" << cfg["command"].get<std::string>();
  if (cfg.contains("seed")) comment << " seed=" << cfg["seed"].dump();
  if (cfg.contains("samples")) comment << " samples=" << cfg["samples"].dump();
  if (cfg.contains("body_hash")) comment << " body=" << cfg["body_hash"].get<std::string>();
  fs::path stem = json_path;
  stem.replace_extension();
  for (const auto& table : envelope.tables) {
    fs::path csv_path = stem;
    csv_path += "_" + table.name + ".csv";
    write(csv_path, to_csv(table, comment.str()));
  }
  return written;
}

json strip_timing(json j) {
  if (j.is_object()) {
    j.erase("wall_time");
    for (auto& [k, v] : j.items()) v = strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_timing(v);
  }
  return j;
}

}  // namespace croftonkit
