#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jprlc/geometry.hpp"
#include "jprlc/solver.hpp"

namespace jprlc {

/// Mixes a base seed with a stream id (splitmix64 finalizer). Every random
/// draw in a trial comes from its own derived stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Uniform sample of `n` points without replacement (partial Fisher-Yates).
PointCloud subsample(const PointCloud& cloud, Eigen::Index n, std::uint64_t seed);

/// Independent zero-mean normal perturbation of every coordinate.
PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma, std::uint64_t seed);

/// Appends ceil(ratio * |cloud|) points uniform in the cloud's bounding box
/// grown by 10% per axis (5% each side). Original points come first, untouched.
PointCloud add_outliers(const PointCloud& cloud, double ratio, std::uint64_t seed);

/// Rotation from intrinsic X-Y-Z Euler angles, each uniform in
/// [-rot_range_deg, rot_range_deg]; translation uniform per axis in
/// [-trans_range_mm, trans_range_mm].
RigidTransform random_rigid(double rot_range_deg, double trans_range_mm, std::uint64_t seed);

RigidTransform euler_xyz(double rx_rad, double ry_rad, double rz_rad,
                         const Eigen::Vector3d& translation = Eigen::Vector3d::Zero());

/// Deterministic tapered, cambered and twisted sheet, about 300 mm long,
/// sampled with a low-discrepancy sequence. Stand-in for a scanned blade.
PointCloud synthetic_surface(Eigen::Index count = 1000);

struct TrialSpec {
  std::uint64_t seed = 1;
  double noise_sigma = 0.0;      // mm
  double outlier_ratio = 0.0;    // fraction of each cloud's size
  double rotation_range = 60.0;  // degrees per axis
  double translation_range = 40.0;  // mm per axis
  std::vector<Eigen::Index> cloud_sizes{1000, 700, 500, 300};
  double success_threshold = 10.0;  // mm
  RegistrationConfig registration = desk_scale_config();

  static RegistrationConfig desk_scale_config() {
    RegistrationConfig c;
    c.m_count = 100;
    return c;
  }

  void validate() const;
};

struct TrialReport {
  std::uint64_t seed = 0;
  double rmse = 0.0;  // mm
  bool success = false;
  std::vector<double> objective_trace;
  double wall_time = 0.0;  // seconds
  std::string failure;     // empty unless the solver threw
  std::vector<RigidTransform> ground_truth;
  std::vector<RigidTransform> estimated;
};

/// The clouds a trial feeds the solver, plus what is needed to score it.
struct TrialData {
  std::vector<PointCloud> inputs;  // misaligned, noisy, with outliers
  std::vector<PointCloud> clean;   // misaligned only; RMSE is evaluated on these
  std::vector<RigidTransform> ground_truth;  // maps input j back to the base frame
};

/// subsample -> apply inverse ground truth -> noise -> outliers. Cloud 0 keeps
/// the identity pose.
TrialData make_trial_data(const TrialSpec& spec, const PointCloud& base);

/// A solver failure yields an unsuccessful report with `failure` set.
TrialReport run_trial(const TrialSpec& spec, const PointCloud& base);

enum class SweepAxis { Noise, Outliers, Lambda };

SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepSpec {
  SweepAxis axis = SweepAxis::Noise;
  std::vector<double> levels;
  int repeats = 10;
  std::uint64_t seed = 1;
  TrialSpec base_trial;  // values not on the swept axis
  unsigned threads = 0;  // 0: JPRLC_THREADS or hardware concurrency
};

struct SweepRow {
  double level = 0.0;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_rmse = 0.0;  // successful trials only; NaN if none
  double std_rmse = 0.0;   // sample std over successful trials; 0 if fewer than two
};

struct SweepTrial {
  double level = 0.0;
  int repeat = 0;
  TrialReport report;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepTrial> trials;  // level-major, repeat-minor
};

/// Repeat r at every level uses trial seed derive_seed(seed, r), so levels
/// are compared on identical ground truths and perturbation streams.
SweepResult run_sweep(const PointCloud& base, const SweepSpec& spec);

/// Row statistics from a level's trial reports.
SweepRow aggregate(double level, const std::vector<TrialReport>& reports);

/// Worker count from JPRLC_THREADS (0 or unset: hardware concurrency).
unsigned worker_count(unsigned requested = 0);

}  // namespace jprlc
