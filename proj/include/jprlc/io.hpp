#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jprlc/geometry.hpp"
#include "jprlc/solver.hpp"
#include "jprlc/synth.hpp"

namespace jprlc::io {

enum class CloudFormat { Xyz, Ply };

/// ".ply" (any case) selects PLY; everything else is XYZ.
CloudFormat format_for(const std::filesystem::path& path);

/// XYZ: one "x y z" line per point, '#' comment and blank lines skipped.
/// PLY: ASCII only; vertex x/y/z properties are read, everything else ignored.
/// Throws ParseError with the offending line, IoError if unreadable.
PointCloud read_cloud(const std::filesystem::path& path,
                      std::optional<CloudFormat> format = std::nullopt);
PointCloud parse_xyz(const std::string& text);
PointCloud parse_ply(const std::string& text);

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                 std::optional<CloudFormat> format = std::nullopt);
std::string format_xyz(const PointCloud& cloud);
std::string format_ply(const PointCloud& cloud);

/// Shortest decimal string that parses back to exactly `v`; locale-free.
std::string format_number(double v);

nlohmann::json to_json(const RigidTransform& t);
RigidTransform transform_from_json(const nlohmann::json& j);

/// Pose files are a JSON array of {"rotation": 3x3 row-major, "translation": [3]}.
void write_poses(std::span<const RigidTransform> poses, const std::filesystem::path& path);
std::vector<RigidTransform> read_poses(const std::filesystem::path& path);

nlohmann::json to_json(const RegistrationConfig& c);
nlohmann::json to_json(const TrialSpec& s);
nlohmann::json to_json(const TrialReport& r);

std::string objective_csv(std::span<const double> pre_mstep, std::span<const double> post_mstep);
/// Columns: level,trials,success_rate,mean_rmse_mm,std_rmse_mm.
std::string sweep_csv(std::span<const SweepRow> rows);

/// Lower-case hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

/// Run manifest: tool/version/timestamp, the command, its configuration and
/// digests of every input file.
nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config,
                             std::span<const std::filesystem::path> inputs);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace jprlc::io
