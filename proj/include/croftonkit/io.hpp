#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "croftonkit/curvature.hpp"
#include "croftonkit/estimators.hpp"
#include "croftonkit/geometry.hpp"

namespace croftonkit {

using nlohmann::json;

inline constexpr const char* kToolName = "croftonkit";
inline constexpr const char* kToolVersion = "0.1.0";

struct MeshLoadResult {
  ConvexBody body;
  std::vector<std::string> warnings;
};

/// Reads an OFF file or the triangle subset of OBJ (v and f records).
/// Throws MeshParseError naming the offending line.
MeshLoadResult load_mesh(const std::filesystem::path& path);

/// Body descriptors, e.g. {"kind": "ellipsoid", "semi_axes": [1, 1, 1.5]}.
/// Unknown keys are rejected.
BodyPtr body_from_json(const json& descriptor);
/// Compact command-line form: sphere[:r], ellipsoid:a,b,c, lp:p, mesh:path,
/// or an inline JSON object. `dim` applies to sphere and lp.
json parse_body_spec(const std::string& spec, int dim);

/// Patch descriptors: "whole", {"cap": {...}}, {"halfspace": {...}},
/// {"latlon": {...}}, {"union": [...]}, {"intersection": [...]}, {"complement": ...}.
SurfacePatch patch_from_json(const BodyPtr& body, const json& descriptor);
json patch_to_json(const SurfacePatch& patch);
/// Compact form: whole, cap:t, cap:a1,..,an:t, halfspace:w1,..,wn:b, or inline JSON.
json parse_patch_spec(const std::string& spec);

/// FNV-1a hash of the canonical descriptor dump, as 16 hex digits.
std::string descriptor_hash(const json& descriptor);

json to_json(const EstimatorReport& report);
EstimatorReport report_from_json(const json& j);
json to_json(const HitDistribution& h);
json to_json(const SphereCertificate& c);
json to_json(const SecondFundamentalForm& form);

struct CsvTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ReportEnvelope {
  std::string tool = kToolName;
  std::string version = kToolVersion;
  json config = json::object();
  json results = json::object();
  double wall_time = 0.0;
  std::vector<CsvTable> tables;
};

json to_json(const ReportEnvelope& envelope);
ReportEnvelope envelope_from_json(const json& j);

std::string to_csv(const CsvTable& table, const std::string& comment = {});

/// Writes <output>.json and one <stem>_<table>.csv per table. Returns the
/// written paths. Throws Error when a file cannot be written.
std::vector<std::filesystem::path> emit_report(const ReportEnvelope& envelope, const std::filesystem::path& output);

/// Removes every "wall_time" key, recursively.
json strip_timing(json j);

}  // namespace croftonkit
