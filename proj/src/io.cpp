#include "jprlc/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include "jprlc/error.hpp"

#ifndef JPRLC_VERSION
#define JPRLC_VERSION "0.0.0"
#endif

namespace jprlc::io {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw ParseError("invalid number '" + std::string(tok) + "'", line);
  return v;
}

// Line iterator that tolerates CRLF.
class Lines {
 public:
  explicit Lines(const std::string& text) : text_(text) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string::npos) end = text_.size();
    line = std::string_view(text_).substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++number_;
    return true;
  }

  std::size_t number() const noexcept { return number_; }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
  std::size_t number_ = 0;
};

PointCloud finish(std::vector<Point3>& pts, std::size_t lines) {
  if (pts.empty()) throw ParseError("file contains no points", lines);
  return PointCloud(pts);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

CloudFormat format_for(const std::filesystem::path& path) {
  return lower(path.extension().string()) == ".ply" ? CloudFormat::Ply : CloudFormat::Xyz;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

PointCloud parse_xyz(const std::string& text) {
  std::vector<Point3> pts;
  Lines lines(text);
  std::string_view line;
  while (lines.next(line)) {
    const auto tok = split_ws(line);
    if (tok.empty() || tok.front().front() == '#') continue;
    if (tok.size() != 3)
      throw ParseError("expected 3 coordinates, found " + std::to_string(tok.size()),
                       lines.number());
    pts.emplace_back(parse_double(tok[0], lines.number()), parse_double(tok[1], lines.number()),
                     parse_double(tok[2], lines.number()));
  }
  return finish(pts, lines.number());
}

PointCloud parse_ply(const std::string& text) {
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
  };
  Lines lines(text);
  std::string_view line;
  if (!lines.next(line) || split_ws(line) != std::vector<std::string_view>{"ply"})
    throw ParseError("missing 'ply' magic", lines.number());

  std::vector<Element> elements;
  bool ascii = false;
  bool header_done = false;
  while (lines.next(line)) {
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") {
      header_done = true;
      break;
    }
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii")
        throw ParseError("only ASCII PLY is supported", lines.number());
      ascii = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError("malformed element line", lines.number());
      Element e;
      e.name = std::string(tok[1]);
      e.count = static_cast<std::size_t>(parse_double(tok[2], lines.number()));
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty() || tok.size() < 3)
        throw ParseError("property outside an element", lines.number());
      elements.back().properties.emplace_back(tok.back());
    } else if (tok[0] != "comment" && tok[0] != "obj_info") {
      throw ParseError("unknown header keyword '" + std::string(tok[0]) + "'", lines.number());
    }
  }
  if (!header_done) throw ParseError("missing end_header", lines.number());
  if (!ascii) throw ParseError("missing format line", lines.number());

  std::vector<Point3> pts;
  bool found_vertex = false;
  for (const auto& e : elements) {
    if (e.name != "vertex") {
      for (std::size_t k = 0; k < e.count; ++k)
        if (!lines.next(line)) throw ParseError("truncated '" + e.name + "' data", lines.number());
      continue;
    }
    found_vertex = true;
    std::array<std::size_t, 3> col{};
    const char* names[3] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
      const auto it = std::find(e.properties.begin(), e.properties.end(), names[a]);
      if (it == e.properties.end())
        throw ParseError(std::string("vertex element lacks property ") + names[a], 0);
      col[static_cast<std::size_t>(a)] = static_cast<std::size_t>(it - e.properties.begin());
    }
    pts.reserve(e.count);
    while (pts.size() < e.count) {
      if (!lines.next(line)) throw ParseError("truncated vertex data", lines.number());
      const auto tok = split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() < e.properties.size())
        throw ParseError("vertex line has too few values", lines.number());
      pts.emplace_back(parse_double(tok[col[0]], lines.number()),
                       parse_double(tok[col[1]], lines.number()),
                       parse_double(tok[col[2]], lines.number()));
    }
  }
  if (!found_vertex) throw ParseError("no vertex element", lines.number());
  return finish(pts, lines.number());
}

PointCloud read_cloud(const std::filesystem::path& path, std::optional<CloudFormat> format) {
  const std::string text = read_text(path);
  try {
    return format.value_or(format_for(path)) == CloudFormat::Ply ? parse_ply(text)
                                                                 : parse_xyz(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.message(), e.line());
  }
}

std::string format_number(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw NumericError("cannot format number");
  return {buf.data(), ptr};
}

std::string format_xyz(const PointCloud& cloud) {
  std::string out;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Point3 p = cloud[i];
    out += format_number(p.x()) + ' ' + format_number(p.y()) + ' ' + format_number(p.z()) + '\n';
  }
  return out;
}

std::string format_ply(const PointCloud& cloud) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
                    "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  return out + format_xyz(cloud);
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                 std::optional<CloudFormat> format) {
  write_text(path, format.value_or(format_for(path)) == CloudFormat::Ply ? format_ply(cloud)
                                                                         : format_xyz(cloud));
}

nlohmann::json to_json(const RigidTransform& t) {
  nlohmann::json rot = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    rot.push_back({t.rotation()(r, 0), t.rotation()(r, 1), t.rotation()(r, 2)});
  return {{"rotation", rot},
          {"translation", {t.translation()[0], t.translation()[1], t.translation()[2]}}};
}

RigidTransform transform_from_json(const nlohmann::json& j) {
  try {
    Eigen::Matrix3d r;
    Eigen::Vector3d t;
    const auto& rot = j.at("rotation");
    const auto& tr = j.at("translation");
    if (rot.size() != 3 || tr.size() != 3) throw ConfigError("pose must be 3x3 + 3");
    for (int a = 0; a < 3; ++a) {
      if (rot.at(static_cast<std::size_t>(a)).size() != 3) throw ConfigError("rotation row must have 3 entries");
      for (int b = 0; b < 3; ++b)
        r(a, b) = rot.at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(b)).get<double>();
      t[a] = tr.at(static_cast<std::size_t>(a)).get<double>();
    }
    return {r, t};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed pose JSON: ") + e.what());
  }
}

void write_poses(std::span<const RigidTransform> poses, const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : poses) arr.push_back(to_json(p));
  write_text(path, arr.dump(2) + "\n");
}

std::vector<RigidTransform> read_poses(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw ConfigError(path.string() + ": pose file must hold a JSON array");
  std::vector<RigidTransform> out;
  for (const auto& p : j) out.push_back(transform_from_json(p));
  return out;
}

nlohmann::json to_json(const RegistrationConfig& c) {
  nlohmann::json j{{"lambda", c.lambda},
                   {"iterations", c.iterations},
                   {"k_neighbors", c.k_neighbors},
                   {"components", c.m_count},
                   {"outlier_weight", c.outlier_weight},
                   {"initial_variance", c.initial_variance},
                   {"early_stop_tolerance", c.early_stop_tolerance}};
  j["variance_floor"] = c.variance_floor ? nlohmann::json(*c.variance_floor) : nlohmann::json();
  return j;
}

nlohmann::json to_json(const TrialSpec& s) {
  return {{"seed", s.seed},
          {"noise_sigma", s.noise_sigma},
          {"outlier_ratio", s.outlier_ratio},
          {"rotation_range_deg", s.rotation_range},
          {"translation_range_mm", s.translation_range},
          {"cloud_sizes", s.cloud_sizes},
          {"success_threshold_mm", s.success_threshold},
          {"registration", to_json(s.registration)}};
}

nlohmann::json to_json(const TrialReport& r) {
  nlohmann::json gt = nlohmann::json::array(), est = nlohmann::json::array();
  for (const auto& t : r.ground_truth) gt.push_back(to_json(t));
  for (const auto& t : r.estimated) est.push_back(to_json(t));
  nlohmann::json j{{"seed", r.seed},
                   {"success", r.success},
                   {"objective_trace", r.objective_trace},
                   {"ground_truth", gt},
                   {"estimated", est}};
  // Wall time is left out so reruns give byte-identical files. JSON has no
  // infinity; a failed solve reports null.
  j["rmse_mm"] = std::isfinite(r.rmse) ? nlohmann::json(r.rmse) : nlohmann::json();
  if (!r.failure.empty()) j["failure"] = r.failure;
  return j;
}

std::string objective_csv(std::span<const double> pre_mstep, std::span<const double> post_mstep) {
  std::string out = "iteration,objective_before_mstep,objective\n";
  for (std::size_t q = 0; q < post_mstep.size(); ++q) {
    out += std::to_string(q + 1) + ',' +
           (q < pre_mstep.size() ? format_number(pre_mstep[q]) : std::string()) + ',' +
           format_number(post_mstep[q]) + '\n';
  }
  return out;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "level,trials,success_rate,mean_rmse_mm,std_rmse_mm\n";
  for (const auto& r : rows) {
    out += format_number(r.level) + ',' + std::to_string(r.trials) + ',' +
           format_number(r.success_rate) + ',' +
           (std::isnan(r.mean_rmse) ? std::string("nan") : format_number(r.mean_rmse)) + ',' +
           format_number(r.std_rmse) + '\n';
  }
  return out;
}

std::string file_sha256(const std::filesystem::path& path) {
  const std::string data = read_text(path);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 failed for '" + path.string() + "'");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 0xf];
  }
  return hex;
}

nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config,
                             std::span<const std::filesystem::path> inputs) {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::array<char, 32> stamp{};
  std::strftime(stamp.data(), stamp.size(), "%Y-%m-%dT%H:%M:%SZ", &utc);

  nlohmann::json files = nlohmann::json::array();
  for (const auto& p : inputs) files.push_back({{"path", p.string()}, {"sha256", file_sha256(p)}});
  return {{"tool", "jprlc"},
          {"version", JPRLC_VERSION},
          {"timestamp", stamp.data()},
          {"command", command},
          {"config", config},
          {"inputs", files}};
}

}  // namespace jprlc::io
