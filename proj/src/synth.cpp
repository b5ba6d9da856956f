#include "jprlc/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include "jprlc/error.hpp"

namespace jprlc {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

PointCloud subsample(const PointCloud& cloud, Eigen::Index n, std::uint64_t seed) {
  if (n < 1 || n > cloud.size())
    throw ConfigError("subsample: requested " + std::to_string(n) + " of " +
                      std::to_string(cloud.size()) + " points");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(cloud.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Eigen::Index>(i);
  std::mt19937_64 rng(seed);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, cloud.size() - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  Eigen::Matrix3Xd out(3, n);
  for (Eigen::Index i = 0; i < n; ++i) out.col(i) = cloud[idx[static_cast<std::size_t>(i)]];
  return PointCloud(std::move(out));
}

PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  if (sigma == 0.0) return cloud;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  Eigen::Matrix3Xd pts = cloud.points();
  for (Eigen::Index i = 0; i < pts.cols(); ++i)
    for (int k = 0; k < 3; ++k) pts(k, i) += gauss(rng);
  return PointCloud(std::move(pts));
}

PointCloud add_outliers(const PointCloud& cloud, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw ConfigError("outlier ratio must lie in [0, 1)");
  const auto extra = static_cast<Eigen::Index>(
      std::ceil(ratio * static_cast<double>(cloud.size()) - 1e-9));
  if (extra <= 0) return cloud;

  const Eigen::Vector3d lo = cloud.points().rowwise().minCoeff();
  const Eigen::Vector3d hi = cloud.points().rowwise().maxCoeff();
  const Eigen::Vector3d pad = 0.05 * (hi - lo);
  std::mt19937_64 rng(seed);
  std::array<std::uniform_real_distribution<double>, 3> axis{
      std::uniform_real_distribution<double>(lo[0] - pad[0], hi[0] + pad[0]),
      std::uniform_real_distribution<double>(lo[1] - pad[1], hi[1] + pad[1]),
      std::uniform_real_distribution<double>(lo[2] - pad[2], hi[2] + pad[2])};

  Eigen::Matrix3Xd pts(3, cloud.size() + extra);
  pts.leftCols(cloud.size()) = cloud.points();
  for (Eigen::Index i = cloud.size(); i < pts.cols(); ++i)
    for (int k = 0; k < 3; ++k) pts(k, i) = axis[static_cast<std::size_t>(k)](rng);
  return PointCloud(std::move(pts));
}

RigidTransform euler_xyz(double rx, double ry, double rz, const Eigen::Vector3d& translation) {
  const Eigen::Matrix3d r = (Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()) *
                             Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
                             Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()))
                                .toRotationMatrix();
  return {r, translation};
}

RigidTransform random_rigid(double rot_range_deg, double trans_range_mm, std::uint64_t seed) {
  if (!(rot_range_deg >= 0.0) || !(trans_range_mm >= 0.0))
    throw ConfigError("random_rigid: ranges must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double a = rot_range_deg * std::numbers::pi / 180.0;
  const double rx = a * unit(rng), ry = a * unit(rng), rz = a * unit(rng);
  Eigen::Vector3d t;
  for (int k = 0; k < 3; ++k) t[k] = trans_range_mm * unit(rng);
  return euler_xyz(rx, ry, rz, t);
}

PointCloud synthetic_surface(Eigen::Index count) {
  if (count < 1) throw ConfigError("synthetic_surface: count must be positive");
  // R2 low-discrepancy sequence on the unit square.
  constexpr double g = 1.32471795724474602596;
  constexpr double a1 = 1.0 / g, a2 = 1.0 / (g * g);
  Eigen::Matrix3Xd pts(3, count);
  for (Eigen::Index n = 0; n < count; ++n) {
    const double u = 2.0 * std::fmod(0.5 + a1 * static_cast<double>(n + 1), 1.0) - 1.0;
    const double v = 2.0 * std::fmod(0.5 + a2 * static_cast<double>(n + 1), 1.0) - 1.0;
    const double x = 150.0 * u;
    const double chord = 60.0 * (1.0 - 0.35 * u);
    const double y0 = chord * v;
    const double z0 = 35.0 * (1.0 - v * v) + 12.0 * u * v + 10.0 * u * u * u;
    const double twist = 0.5 * u;
    pts.col(n) << x, std::cos(twist) * y0 - std::sin(twist) * z0,
        std::sin(twist) * y0 + std::cos(twist) * z0;
  }
  return PointCloud(std::move(pts));
}

void TrialSpec::validate() const {
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  if (!(outlier_ratio >= 0.0 && outlier_ratio < 1.0))
    throw ConfigError("outlier ratio must lie in [0, 1)");
  if (!(rotation_range >= 0.0) || !(translation_range >= 0.0))
    throw ConfigError("transform ranges must be >= 0");
  if (cloud_sizes.size() < 2) throw ConfigError("a trial needs at least two clouds");
  for (const auto n : cloud_sizes)
    if (n < 1) throw ConfigError("cloud sizes must be >= 1");
  if (!(success_threshold > 0.0)) throw ConfigError("success threshold must be positive");
  registration.validate();
}

TrialData make_trial_data(const TrialSpec& spec, const PointCloud& base) {
  spec.validate();
  TrialData data;
  for (std::size_t j = 0; j < spec.cloud_sizes.size(); ++j) {
    const PointCloud sub = subsample(base, spec.cloud_sizes[j], derive_seed(spec.seed, 100 + j));
    const RigidTransform gt =
        j == 0 ? RigidTransform::identity()
               : random_rigid(spec.rotation_range, spec.translation_range,
                              derive_seed(spec.seed, 200 + j));
    PointCloud clean = apply_transform(inverse(gt), sub);
    const PointCloud noisy =
        add_gaussian_noise(clean, spec.noise_sigma, derive_seed(spec.seed, 300 + j));
    data.inputs.push_back(
        add_outliers(noisy, spec.outlier_ratio, derive_seed(spec.seed, 400 + j)));
    data.clean.push_back(std::move(clean));
    data.ground_truth.push_back(gt);
  }
  return data;
}

TrialReport run_trial(const TrialSpec& spec, const PointCloud& base) {
  const TrialData data = make_trial_data(spec, base);
  TrialReport report;
  report.seed = spec.seed;
  report.ground_truth = data.ground_truth;

  const auto start = std::chrono::steady_clock::now();
  try {
    RegistrationResult result = run_registration(data.inputs, spec.registration);
    report.objective_trace = std::move(result.objective_trace);
    report.estimated = std::move(result.transforms);
    report.rmse = rmse(report.estimated, report.ground_truth, data.clean);
    report.success = report.rmse < spec.success_threshold;
  } catch (const Error& e) {
    report.failure = e.what();
    report.rmse = std::numeric_limits<double>::infinity();
    report.success = false;
  }
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "noise") return SweepAxis::Noise;
  if (name == "outliers") return SweepAxis::Outliers;
  if (name == "lambda") return SweepAxis::Lambda;
  throw ConfigError("unknown sweep axis '" + name + "' (expected noise, outliers or lambda)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Noise: return "noise";
    case SweepAxis::Outliers: return "outliers";
    case SweepAxis::Lambda: return "lambda";
  }
  return "?";
}

unsigned worker_count(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("JPRLC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SweepRow aggregate(double level, const std::vector<TrialReport>& reports) {
  SweepRow row;
  row.level = level;
  row.trials = static_cast<int>(reports.size());
  double sum = 0.0;
  for (const auto& r : reports) {
    if (!r.success) continue;
    ++row.successes;
    sum += r.rmse;
  }
  row.success_rate =
      row.trials > 0 ? static_cast<double>(row.successes) / static_cast<double>(row.trials) : 0.0;
  if (row.successes == 0) {
    row.mean_rmse = std::numeric_limits<double>::quiet_NaN();
    return row;
  }
  row.mean_rmse = sum / row.successes;
  if (row.successes > 1) {
    double ss = 0.0;
    for (const auto& r : reports)
      if (r.success) ss += (r.rmse - row.mean_rmse) * (r.rmse - row.mean_rmse);
    row.std_rmse = std::sqrt(ss / (row.successes - 1));
  }
  return row;
}

SweepResult run_sweep(const PointCloud& base, const SweepSpec& spec) {
  if (spec.levels.empty()) throw ConfigError("sweep has no levels");
  if (spec.repeats < 1) throw ConfigError("sweep needs at least one repeat per level");

  std::vector<TrialSpec> jobs;
  SweepResult out;
  for (const double level : spec.levels) {
    for (int r = 0; r < spec.repeats; ++r) {
      TrialSpec t = spec.base_trial;
      t.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(r));
      switch (spec.axis) {
        case SweepAxis::Noise: t.noise_sigma = level; break;
        case SweepAxis::Outliers: t.outlier_ratio = level; break;
        case SweepAxis::Lambda: t.registration.lambda = level; break;
      }
      t.validate();
      jobs.push_back(std::move(t));
      out.trials.push_back({level, r, {}});
    }
  }

  // Each job writes only its own slot, so the result is independent of scheduling.
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
      out.trials[i].report = run_trial(jobs[i], base);
  };
  const unsigned n = std::min<unsigned>(worker_count(spec.threads),
                                        static_cast<unsigned>(jobs.size()));
  if (n <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(work);
  }

  for (std::size_t l = 0; l < spec.levels.size(); ++l) {
    std::vector<TrialReport> reports;
    for (int r = 0; r < spec.repeats; ++r)
      reports.push_back(out.trials[l * static_cast<std::size_t>(spec.repeats) +
                                   static_cast<std::size_t>(r)].report);
    out.rows.push_back(aggregate(spec.levels[l], reports));
  }
  return out;
}

}  // namespace jprlc
