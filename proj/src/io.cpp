#include "sqabs/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "sqabs/errors.hpp"
#include "sqabs/metrics.hpp"

namespace sqabs {

namespace {

using nlohmann::json;

std::string lower_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

CloudFormat detect_format(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "ply") return CloudFormat::Ply;
  if (ext == "obj") return CloudFormat::Obj;
  if (ext == "xyz" || ext == "txt" || ext == "pts") return CloudFormat::Xyz;
  throw UnknownFormat(path + ": cannot infer point-cloud format from extension");
}

std::optional<double> parse_double(const std::string& token) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + token.size() || token.empty()) return std::nullopt;
  return v;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

// ---------------------------------------------------------------- PLY ----

struct PlyProperty {
  std::string name;
  int byte_size = 0;
  bool is_float = false;
  bool is_signed = false;
};

std::optional<PlyProperty> parse_ply_type(const std::string& type) {
  PlyProperty p;
  if (type == "char" || type == "int8") p = {"", 1, false, true};
  else if (type == "uchar" || type == "uint8") p = {"", 1, false, false};
  else if (type == "short" || type == "int16") p = {"", 2, false, true};
  else if (type == "ushort" || type == "uint16") p = {"", 2, false, false};
  else if (type == "int" || type == "int32") p = {"", 4, false, true};
  else if (type == "uint" || type == "uint32") p = {"", 4, false, false};
  else if (type == "float" || type == "float32") p = {"", 4, true, true};
  else if (type == "double" || type == "float64") p = {"", 8, true, true};
  else return std::nullopt;
  return p;
}

double decode_ply_scalar(const char* bytes, const PlyProperty& p) {
  if (p.is_float && p.byte_size == 4) {
    float f;
    std::memcpy(&f, bytes, 4);
    return f;
  }
  if (p.is_float) {
    double d;
    std::memcpy(&d, bytes, 8);
    return d;
  }
  std::int64_t s = 0;
  std::uint64_t u = 0;
  switch (p.byte_size) {
    case 1: if (p.is_signed) { std::int8_t v; std::memcpy(&v, bytes, 1); s = v; } else { std::uint8_t v; std::memcpy(&v, bytes, 1); u = v; } break;
    case 2: if (p.is_signed) { std::int16_t v; std::memcpy(&v, bytes, 2); s = v; } else { std::uint16_t v; std::memcpy(&v, bytes, 2); u = v; } break;
    default: if (p.is_signed) { std::int32_t v; std::memcpy(&v, bytes, 4); s = v; } else { std::uint32_t v; std::memcpy(&v, bytes, 4); u = v; } break;
  }
  return p.is_signed ? static_cast<double>(s) : static_cast<double>(u);
}

Points load_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open file");

  std::size_t lineno = 0;
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw MalformedRecord(path, lineno, "unexpected end of header");
    ++lineno;
    strip_cr(line);
  };

  next_line();
  if (line != "ply") throw UnknownFormat(path + ": missing ply magic");
  bool binary = false;
  bool have_format = false;
  long vertex_count = -1;
  std::vector<PlyProperty> vertex_props;
  bool in_vertex_element = false;

  while (true) {
    next_line();
    const auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks[0] == "comment" || toks[0] == "obj_info") continue;
    if (toks[0] == "format") {
      if (toks.size() < 2) throw MalformedRecord(path, lineno, "bad format line");
      if (toks[1] == "ascii") binary = false;
      else if (toks[1] == "binary_little_endian") binary = true;
      else throw UnknownFormat(path + ": unsupported ply format " + toks[1]);
      have_format = true;
    } else if (toks[0] == "element") {
      if (toks.size() < 3) throw MalformedRecord(path, lineno, "bad element line");
      if (toks[1] == "vertex") {
        vertex_count = std::strtol(toks[2].c_str(), nullptr, 10);
        in_vertex_element = true;
      } else {
        in_vertex_element = false;
      }
    } else if (toks[0] == "property") {
      if (!in_vertex_element) continue;  // properties of later elements are irrelevant
      if (toks.size() >= 2 && toks[1] == "list")
        throw UnknownFormat(path + ": list properties in the vertex element are unsupported");
      if (toks.size() < 3) throw MalformedRecord(path, lineno, "bad property line");
      auto p = parse_ply_type(toks[1]);
      if (!p) throw UnknownFormat(path + ": unsupported property type " + toks[1]);
      p->name = toks[2];
      vertex_props.push_back(*p);
    } else if (toks[0] == "end_header") {
      break;
    } else {
      throw MalformedRecord(path, lineno, "unrecognized header line: " + line);
    }
  }
  if (!have_format) throw MalformedRecord(path, lineno, "missing format line");
  if (vertex_count < 0) throw MalformedRecord(path, lineno, "missing vertex element");
  if (vertex_count == 0) throw EmptyCloud(path + ": vertex count is zero");

  int ix = -1, iy = -1, iz = -1;
  for (std::size_t i = 0; i < vertex_props.size(); ++i) {
    if (vertex_props[i].name == "x") ix = static_cast<int>(i);
    if (vertex_props[i].name == "y") iy = static_cast<int>(i);
    if (vertex_props[i].name == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0)
    throw UnknownFormat(path + ": vertex element lacks x/y/z properties");

  Points points;
  points.reserve(vertex_count);
  if (!binary) {
    for (long row = 0; row < vertex_count; ++row) {
      next_line();
      const auto toks = tokenize(line);
      if (toks.size() != vertex_props.size())
        throw MalformedRecord(path, lineno, "expected " + std::to_string(vertex_props.size()) +
                                                " values, got " + std::to_string(toks.size()));
      auto get = [&](int idx) {
        const auto v = parse_double(toks[idx]);
        if (!v) throw MalformedRecord(path, lineno, "non-numeric value: " + toks[idx]);
        return *v;
      };
      const Vec3 p(get(ix), get(iy), get(iz));
      if (!p.allFinite()) throw MalformedRecord(path, lineno, "non-finite coordinate");
      points.push_back(p);
    }
  } else {
    std::size_t record_size = 0;
    std::vector<std::size_t> offsets(vertex_props.size());
    for (std::size_t i = 0; i < vertex_props.size(); ++i) {
      offsets[i] = record_size;
      record_size += vertex_props[i].byte_size;
    }
    std::vector<char> record(record_size);
    for (long row = 0; row < vertex_count; ++row) {
      if (!in.read(record.data(), static_cast<std::streamsize>(record_size)))
        throw MalformedRecord(path, static_cast<std::size_t>(row + 1),
                              "unexpected end of binary vertex data");
      const Vec3 p(decode_ply_scalar(record.data() + offsets[ix], vertex_props[ix]),
                   decode_ply_scalar(record.data() + offsets[iy], vertex_props[iy]),
                   decode_ply_scalar(record.data() + offsets[iz], vertex_props[iz]));
      if (!p.allFinite())
        throw MalformedRecord(path, static_cast<std::size_t>(row + 1), "non-finite coordinate");
      points.push_back(p);
    }
  }
  return points;
}

// ---------------------------------------------------------------- OBJ ----

Points load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open file");
  Points points;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    const auto toks = tokenize(line);
    if (toks.empty() || toks[0] != "v") continue;  // non-v records pass through
    if (toks.size() != 4 && toks.size() != 5)
      throw MalformedRecord(path, lineno, "v record needs 3 coordinates (plus optional w)");
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      const auto v = parse_double(toks[a + 1]);
      if (!v) throw MalformedRecord(path, lineno, "non-numeric coordinate: " + toks[a + 1]);
      p[a] = *v;
    }
    if (!p.allFinite()) throw MalformedRecord(path, lineno, "non-finite coordinate");
    points.push_back(p);
  }
  if (points.empty()) throw EmptyCloud(path + ": no v records");
  return points;
}

// ---------------------------------------------------------------- XYZ ----

Points load_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open file");
  Points points;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks.size() != 3)
      throw MalformedRecord(path, lineno, "expected 3 coordinates, got " +
                                              std::to_string(toks.size()));
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      const auto v = parse_double(toks[a]);
      if (!v) throw MalformedRecord(path, lineno, "non-numeric coordinate: " + toks[a]);
      p[a] = *v;
    }
    if (!p.allFinite()) throw MalformedRecord(path, lineno, "non-finite coordinate");
    points.push_back(p);
  }
  if (points.empty()) throw EmptyCloud(path + ": no data rows");
  return points;
}

// ---------------------------------------------------------------- JSON ----

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json params_to_json(const SuperquadricParams& p) {
  return json{{"eps1", p.eps1},
              {"eps2", p.eps2},
              {"ax", p.ax},
              {"ay", p.ay},
              {"az", p.az},
              {"quaternion", {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()}},
              {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}},
              {"kx", p.kx},
              {"ky", p.ky}};
}

SuperquadricParams params_from_json(const json& j) {
  SuperquadricParams p;
  p.eps1 = j.at("eps1").get<double>();
  p.eps2 = j.at("eps2").get<double>();
  p.ax = j.at("ax").get<double>();
  p.ay = j.at("ay").get<double>();
  p.az = j.at("az").get<double>();
  const auto& q = j.at("quaternion");
  p.rotation = Eigen::Quaterniond(q.at(0).get<double>(), q.at(1).get<double>(),
                                  q.at(2).get<double>(), q.at(3).get<double>());
  const auto& t = j.at("translation");
  p.translation = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
  p.kx = j.at("kx").get<double>();
  p.ky = j.at("ky").get<double>();
  return p;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open file for writing");
  out << content;
  if (!out) throw IoError(path + ": write failed");
}

}  // namespace

PointCloud load_point_cloud(const std::string& path, CloudFormat format) {
  if (format == CloudFormat::Auto) format = detect_format(path);
  PointCloud cloud;
  cloud.source_path = path;
  switch (format) {
    case CloudFormat::Ply: cloud.points = load_ply(path); break;
    case CloudFormat::Obj: cloud.points = load_obj(path); break;
    case CloudFormat::Xyz: cloud.points = load_xyz(path); break;
    default: throw UnknownFormat(path + ": unresolved format");
  }
  if (cloud.points.empty()) throw EmptyCloud(path + ": no points");
  return cloud;
}

void save_point_cloud(const std::string& path, const Points& points) {
  const std::string ext = lower_ext(path);
  std::ostringstream out;
  if (ext == "ply") {
    out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
        << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
    for (const Vec3& p : points)
      out << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
          << format_double(p.z()) << '\n';
  } else if (ext == "obj") {
    for (const Vec3& p : points)
      out << "v " << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
          << format_double(p.z()) << '\n';
  } else if (ext == "xyz" || ext == "txt" || ext == "pts") {
    for (const Vec3& p : points)
      out << format_double(p.x()) << ' ' << format_double(p.y()) << ' '
          << format_double(p.z()) << '\n';
  } else {
    throw UnknownFormat(path + ": cannot infer output format from extension");
  }
  write_text_file(path, out.str());
}

void save_result(const AbstractionResult& result, const std::string& path) {
  std::vector<int> counts(result.components.size(), 0);
  for (int z : result.labels) ++counts[z];

  json components = json::array();
  for (std::size_t j = 0; j < result.components.size(); ++j) {
    json c = params_to_json(result.components[j].theta);
    c["sigma2"] = result.components[j].sigma2;
    c["count"] = counts[j];
    components.push_back(std::move(c));
  }
  json trace = json::array();
  for (const TraceEntry& t : result.trace)
    trace.push_back(json::array({t.k, t.total_sq_distance}));

  const json doc{{"version", kResultVersion},
                 {"components", std::move(components)},
                 {"labels", result.labels},
                 {"trace", std::move(trace)}};
  write_text_file(path, doc.dump(1) + "\n");
}

AbstractionResult load_result(const std::string& path) {
  const json doc = read_json_file(path);
  try {
    if (!doc.contains("version") || !doc.at("version").is_string())
      throw VersionError(path + ": missing version field");
    if (doc.at("version").get<std::string>() != kResultVersion)
      throw VersionError(path + ": unsupported version " +
                         doc.at("version").get<std::string>());
    AbstractionResult result;
    for (const json& c : doc.at("components")) {
      GstmComponent comp;
      comp.theta = params_from_json(c);
      comp.sigma2 = c.at("sigma2").get<double>();
      result.components.push_back(comp);
    }
    result.labels = doc.at("labels").get<std::vector<int>>();
    for (int z : result.labels)
      if (z < 0 || z >= static_cast<int>(result.components.size()))
        throw IoError(path + ": label out of range");
    for (const json& t : doc.at("trace"))
      result.trace.push_back({t.at(0).get<int>(), t.at(1).get<double>()});
    return result;
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

void save_scene(const SceneDescription& scene, const std::string& path) {
  json components = json::array();
  for (const SceneComponent& c : scene.components) {
    json cj = params_to_json(c.params);
    cj["sigma2"] = c.sigma2;
    cj["count"] = c.count;
    components.push_back(std::move(cj));
  }
  const json doc{{"version", kSceneVersion},
                 {"seed", scene.seed},
                 {"components", std::move(components)}};
  write_text_file(path, doc.dump(1) + "\n");
}

SceneDescription load_scene(const std::string& path) {
  const json doc = read_json_file(path);
  try {
    if (!doc.contains("version") || !doc.at("version").is_string())
      throw VersionError(path + ": missing version field");
    if (doc.at("version").get<std::string>() != kSceneVersion)
      throw VersionError(path + ": unsupported version " +
                         doc.at("version").get<std::string>());
    SceneDescription scene;
    scene.seed = doc.value("seed", std::uint64_t{0});
    for (const json& c : doc.at("components")) {
      SceneComponent comp;
      comp.params = params_from_json(c);
      comp.sigma2 = c.at("sigma2").get<double>();
      comp.count = c.at("count").get<int>();
      if (comp.count < 1) throw IoError(path + ": component count must be >= 1");
      scene.components.push_back(comp);
    }
    return scene;
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

std::pair<PointCloud, std::vector<int>> synth_scene(const SceneDescription& scene, Rng& rng) {
  PointCloud cloud;
  std::vector<int> labels;
  for (std::size_t j = 0; j < scene.components.size(); ++j) {
    const SceneComponent& c = scene.components[j];
    GstmComponent g{c.params, c.sigma2};
    const Points part = gstm_samples(g, c.count, rng);
    cloud.points.insert(cloud.points.end(), part.begin(), part.end());
    labels.insert(labels.end(), c.count, static_cast<int>(j));
  }
  return {std::move(cloud), std::move(labels)};
}

namespace {

void append_obj(std::ostringstream& out, const TriangleMesh& m, int index_offset) {
  for (const Vec3& v : m.vertices)
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' '
        << format_double(v.z()) << '\n';
  for (const auto& t : m.triangles)
    out << "f " << t[0] + 1 + index_offset << ' ' << t[1] + 1 + index_offset << ' '
        << t[2] + 1 + index_offset << '\n';
}

}  // namespace

std::vector<std::string> export_meshes(const AbstractionResult& result,
                                       const std::string& path_prefix, int resolution) {
  // parts are numbered by final (size-ordered) label ids
  std::vector<int> counts(result.components.size(), 0);
  for (int z : result.labels) ++counts[z];
  std::vector<std::size_t> order(result.components.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });

  std::vector<std::string> written;
  std::ostringstream combined;
  int offset = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const TriangleMesh m = mesh(result.components[order[r]].theta, resolution);
    std::ostringstream part;
    append_obj(part, m, 0);
    const std::string part_path = path_prefix + "part" + std::to_string(r) + ".obj";
    write_text_file(part_path, part.str());
    written.push_back(part_path);
    append_obj(combined, m, offset);
    offset += static_cast<int>(m.vertices.size());
  }
  const std::string combined_path = path_prefix + "combined.obj";
  write_text_file(combined_path, combined.str());
  written.push_back(combined_path);
  return written;
}

void save_labels(const std::vector<int>& labels, const std::string& path) {
  std::ostringstream out;
  for (int z : labels) out << z << '\n';
  write_text_file(path, out.str());
}

SamplerConfig load_sampler_config(const std::string& path) {
  const json doc = read_json_file(path);
  SamplerConfig config;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "alpha") config.alpha = value.get<double>();
      else if (key == "p0") config.p0 = value.get<double>();
      else if (key == "iterations") config.iterations = value.get<int>();
      else if (key == "k_init") config.k_init = value.get<int>();
      else if (key == "seed") config.seed = value.get<std::uint64_t>();
      else if (key == "min_cluster_for_fit") config.min_cluster_for_fit = value.get<int>();
      else if (key == "split_enabled") config.split_enabled = value.get<bool>();
      else if (key == "merge_lambda") config.merge_lambda = value.get<double>();
      else if (key == "sentinel_distance") config.sentinel_distance = value.get<double>();
      else throw IoError(path + ": unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  return config;
}

}  // namespace sqabs
