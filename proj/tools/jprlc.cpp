// Command-line front end: register, bench, eval.
// Exit codes: 0 success, 1 runtime/solver failure, 2 usage/config error.

#include <CLI11.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "jprlc/error.hpp"
#include "jprlc/io.hpp"
#include "jprlc/solver.hpp"
#include "jprlc/synth.hpp"

namespace fs = std::filesystem;
using namespace jprlc;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("not a number: '" + s + "'");
  return v;
}

// "0,0.05,0.1" or "start:stop:step" (inclusive).
std::vector<double> parse_levels(const std::string& text) {
  std::vector<std::string> parts;
  const char sep = text.find(':') != std::string::npos ? ':' : ',';
  std::size_t start = 0;
  while (true) {
    const auto end = text.find(sep, start);
    parts.push_back(text.substr(start, end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  std::vector<double> out;
  if (sep == ',') {
    for (const auto& p : parts) out.push_back(parse_double(p));
    return out;
  }
  if (parts.size() != 3) throw ConfigError("range levels must be start:stop:step");
  const double a = parse_double(parts[0]), b = parse_double(parts[1]),
               step = parse_double(parts[2]);
  if (!(step > 0.0) || b < a) throw ConfigError("range levels need step > 0 and stop >= start");
  const auto count = static_cast<long>(std::floor((b - a) / step + 1e-9)) + 1;
  for (long k = 0; k < count; ++k) out.push_back(a + static_cast<double>(k) * step);
  return out;
}

std::string registered_name(const fs::path& input, std::size_t index) {
  return std::to_string(index) + "_" + input.stem().string() + "_registered" +
         input.extension().string();
}

struct RegisterArgs {
  std::vector<std::string> inputs;
  RegistrationConfig config;
  std::string out = "jprlc_out";
  std::uint64_t seed = 0;
};

int run_register(const RegisterArgs& a) {
  if (a.inputs.size() < 2) throw ConfigError("register needs at least two --input files");
  a.config.validate();
  std::vector<PointCloud> clouds;
  std::vector<fs::path> paths;
  for (const auto& p : a.inputs) {
    paths.emplace_back(p);
    clouds.push_back(io::read_cloud(p));
  }
  const RegistrationResult r = run_registration(clouds, a.config);

  const fs::path out(a.out);
  fs::create_directories(out);
  io::write_poses(r.transforms, out / "poses.json");
  for (std::size_t j = 0; j < clouds.size(); ++j)
    io::write_cloud(apply_transform(r.transforms[j], clouds[j]),
                    out / registered_name(paths[j], j));
  io::write_text(out / "objective.csv", io::objective_csv(r.pre_mstep_trace, r.objective_trace));

  nlohmann::json config = io::to_json(a.config);
  config["seed"] = a.seed;
  nlohmann::json manifest = io::make_manifest("register", config, paths);
  manifest["warnings"] = r.warnings;
  io::write_text(out / "manifest.json", manifest.dump(2) + "\n");
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

struct BenchArgs {
  std::string base;
  bool synthetic = false;
  std::string sweep;
  std::string levels;
  int repeats = 10;
  std::uint64_t seed = 1;
  std::string out = "jprlc_bench";
  TrialSpec trial;
  unsigned threads = 0;
};

int run_bench(BenchArgs a) {
  SweepSpec spec;
  spec.axis = parse_sweep_axis(a.sweep);
  spec.levels = parse_levels(a.levels);
  spec.repeats = a.repeats;
  spec.seed = a.seed;
  spec.base_trial = a.trial;
  spec.threads = a.threads;

  std::vector<fs::path> inputs;
  PointCloud base = a.synthetic ? synthetic_surface() : PointCloud(Eigen::Matrix3Xd::Zero(3, 1));
  if (!a.synthetic) {
    inputs.emplace_back(a.base);
    base = io::read_cloud(a.base);
  }

  const auto start = std::chrono::steady_clock::now();
  const SweepResult result = run_sweep(base, spec);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path out(a.out);
  fs::create_directories(out);
  io::write_text(out / "sweep.csv", io::sweep_csv(result.rows));
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : result.trials) {
    nlohmann::json j = io::to_json(t.report);
    j["level"] = t.level;
    j["repeat"] = t.repeat;
    trials.push_back(std::move(j));
  }
  io::write_text(out / "trials.json", trials.dump(2) + "\n");

  nlohmann::json config{{"sweep", to_string(spec.axis)},
                        {"levels", spec.levels},
                        {"repeats", spec.repeats},
                        {"seed", spec.seed},
                        {"base", a.synthetic ? "synthetic" : a.base},
                        {"trial", io::to_json(spec.base_trial)}};
  nlohmann::json manifest = io::make_manifest("bench", config, inputs);
  manifest["elapsed_s"] = elapsed;
  io::write_text(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << io::sweep_csv(result.rows);
  return 0;
}

struct EvalArgs {
  std::string calculated, ground_truth;
  std::vector<std::string> clouds;
};

int run_eval(const EvalArgs& a) {
  const auto calc = io::read_poses(a.calculated);
  const auto gt = io::read_poses(a.ground_truth);
  if (calc.size() != gt.size() || calc.size() != a.clouds.size())
    throw ConfigError("pose count mismatch: " + std::to_string(calc.size()) + " calculated, " +
                      std::to_string(gt.size()) + " ground truth, " +
                      std::to_string(a.clouds.size()) + " clouds");
  std::vector<PointCloud> clouds;
  for (const auto& p : a.clouds) clouds.push_back(io::read_cloud(p));
  std::cout << io::format_number(rmse(calc, gt, clouds)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint multi-cloud rigid registration with a local-consistency penalty"};
  app.set_version_flag("--version", std::string(JPRLC_VERSION));
  app.require_subcommand(1);

  RegisterArgs reg;
  auto* cmd_reg = app.add_subcommand("register", "Jointly register two or more point clouds");
  cmd_reg->add_option("--input", reg.inputs, "Cloud files (.xyz or .ply), two or more")
      ->required();
  cmd_reg->add_option("--lambda", reg.config.lambda, "Local-consistency weight")
      ->capture_default_str();
  cmd_reg->add_option("--components", reg.config.m_count, "Gaussian components M")
      ->capture_default_str();
  cmd_reg->add_option("--iterations", reg.config.iterations, "EM iterations")
      ->capture_default_str();
  cmd_reg->add_option("--outlier-weight", reg.config.outlier_weight, "Uniform-class weight")
      ->capture_default_str();
  cmd_reg->add_option("--k-neighbors", reg.config.k_neighbors, "Neighbors per point")
      ->capture_default_str();
  cmd_reg->add_option("--out", reg.out, "Output directory")->capture_default_str();
  cmd_reg->add_option("--seed", reg.seed,
                      "Recorded in the manifest; the solver itself is deterministic")
      ->capture_default_str();

  BenchArgs bench;
  auto* cmd_bench = app.add_subcommand("bench", "Seeded degradation sweep on one base cloud");
  auto* base_opt = cmd_bench->add_option("--base", bench.base, "Base cloud file");
  auto* synth_opt =
      cmd_bench->add_flag("--synthetic", bench.synthetic, "Use the built-in synthetic surface");
  base_opt->excludes(synth_opt);
  cmd_bench->add_option("--sweep", bench.sweep, "noise | outliers | lambda")->required();
  cmd_bench->add_option("--levels", bench.levels, "Comma list or start:stop:step")->required();
  cmd_bench->add_option("--repeats", bench.repeats, "Trials per level")->capture_default_str();
  cmd_bench->add_option("--seed", bench.seed, "Base seed")->capture_default_str();
  cmd_bench->add_option("--out", bench.out, "Output directory")->capture_default_str();
  cmd_bench->add_option("--noise", bench.trial.noise_sigma, "Noise sigma (mm) off the swept axis")
      ->capture_default_str();
  cmd_bench->add_option("--outliers", bench.trial.outlier_ratio, "Outlier ratio off the swept axis")
      ->capture_default_str();
  cmd_bench->add_option("--lambda", bench.trial.registration.lambda, "Lambda off the swept axis")
      ->capture_default_str();
  cmd_bench->add_option("--components", bench.trial.registration.m_count, "Gaussian components M")
      ->capture_default_str();
  cmd_bench->add_option("--iterations", bench.trial.registration.iterations, "EM iterations")
      ->capture_default_str();
  cmd_bench->add_option("--threads", bench.threads, "Worker threads (0: JPRLC_THREADS or auto)")
      ->capture_default_str();

  EvalArgs ev;
  auto* cmd_eval = app.add_subcommand("eval", "RMSE between calculated and ground-truth poses");
  cmd_eval->add_option("--calculated", ev.calculated, "Calculated pose JSON")->required();
  cmd_eval->add_option("--ground-truth", ev.ground_truth, "Ground-truth pose JSON")->required();
  cmd_eval->add_option("--clouds", ev.clouds, "Cloud files, one per pose")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (cmd_reg->parsed()) return run_register(reg);
    if (cmd_bench->parsed()) {
      if (bench.base.empty() && !bench.synthetic)
        throw ConfigError("bench needs --base <file> or --synthetic");
      return run_bench(bench);
    }
    return run_eval(ev);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}
