#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "jprlc/error.hpp"
#include "jprlc/io.hpp"
#include "jprlc/neighbor_graph.hpp"
#include "jprlc/solver.hpp"
#include "jprlc/synth.hpp"

namespace py = pybind11;
using namespace jprlc;

namespace {

using RowPoints = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

// Python side works in N x 3 arrays and 4 x 4 homogeneous matrices.
PointCloud to_cloud(const RowPoints& p) { return PointCloud(Eigen::Matrix3Xd(p.transpose())); }
RowPoints to_rows(const PointCloud& c) { return c.points().transpose(); }

std::vector<PointCloud> to_clouds(const std::vector<RowPoints>& arrays) {
  std::vector<PointCloud> out;
  out.reserve(arrays.size());
  for (const auto& a : arrays) out.push_back(to_cloud(a));
  return out;
}

RigidTransform to_transform(const Eigen::Matrix4d& h) {
  if ((h.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-12)
    throw ConfigError("pose matrix must have last row [0, 0, 0, 1]");
  return {h.topLeftCorner<3, 3>(), h.topRightCorner<3, 1>()};
}

std::vector<RigidTransform> to_transforms(const std::vector<Eigen::Matrix4d>& hs) {
  std::vector<RigidTransform> out;
  for (const auto& h : hs) out.push_back(to_transform(h));
  return out;
}

std::vector<Eigen::Matrix4d> to_matrices(const std::vector<RigidTransform>& ts) {
  std::vector<Eigen::Matrix4d> out;
  for (const auto& t : ts) out.push_back(t.homogeneous());
  return out;
}

py::dict report_dict(const TrialReport& r) {
  py::dict d;
  d["seed"] = r.seed;
  d["rmse"] = r.rmse;
  d["success"] = r.success;
  d["objective_trace"] = r.objective_trace;
  d["wall_time"] = r.wall_time;
  d["failure"] = r.failure;
  d["ground_truth"] = to_matrices(r.ground_truth);
  d["estimated"] = to_matrices(r.estimated);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint multi-cloud rigid registration (C++ core)";
  m.attr("__version__") = JPRLC_VERSION;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<RegistrationConfig>(m, "RegistrationConfig")
      .def(py::init<>())
      .def_readwrite("lambda_", &RegistrationConfig::lambda)
      .def_readwrite("iterations", &RegistrationConfig::iterations)
      .def_readwrite("k_neighbors", &RegistrationConfig::k_neighbors)
      .def_readwrite("components", &RegistrationConfig::m_count)
      .def_readwrite("outlier_weight", &RegistrationConfig::outlier_weight)
      .def_readwrite("initial_variance", &RegistrationConfig::initial_variance)
      .def_readwrite("variance_floor", &RegistrationConfig::variance_floor)
      .def_readwrite("early_stop_tolerance", &RegistrationConfig::early_stop_tolerance)
      .def("validate", &RegistrationConfig::validate);

  py::class_<RegistrationResult>(m, "RegistrationResult")
      .def_property_readonly("transforms",
                             [](const RegistrationResult& r) { return to_matrices(r.transforms); })
      .def_property_readonly("centroids",
                             [](const RegistrationResult& r) {
                               return RowPoints(r.model.centroids.transpose());
                             })
      .def_property_readonly("variances", [](const RegistrationResult& r) { return r.model.variances; })
      .def_property_readonly("weights", [](const RegistrationResult& r) { return r.model.weights; })
      .def_readonly("objective_trace", &RegistrationResult::objective_trace)
      .def_readonly("pre_mstep_trace", &RegistrationResult::pre_mstep_trace)
      .def_readonly("iterations_run", &RegistrationResult::iterations_run)
      .def_readonly("warnings", &RegistrationResult::warnings);

  m.def(
      "register",
      [](const std::vector<RowPoints>& clouds, const RegistrationConfig& config) {
        const auto set = to_clouds(clouds);
        py::gil_scoped_release release;
        return run_registration(set, config);
      },
      py::arg("clouds"), py::arg("config") = RegistrationConfig{},
      "Jointly register N x 3 point arrays; returns poses mapping each cloud into the model frame.");

  m.def(
      "rmse",
      [](const std::vector<Eigen::Matrix4d>& calculated,
         const std::vector<Eigen::Matrix4d>& ground_truth, const std::vector<RowPoints>& clouds) {
        return rmse(to_transforms(calculated), to_transforms(ground_truth), to_clouds(clouds));
      },
      py::arg("calculated"), py::arg("ground_truth"), py::arg("clouds"));

  m.def(
      "e_step",
      [](const std::vector<RowPoints>& clouds, const std::vector<Eigen::Matrix4d>& transforms,
         const RowPoints& centroids, const Eigen::VectorXd& variances,
         const Eigen::VectorXd& weights, double outlier_weight, double volume) {
        MixtureModel model;
        model.centroids = centroids.transpose();
        model.variances = variances;
        model.weights = weights;
        model.outlier_weight = outlier_weight;
        model.volume = volume;
        const auto post = e_step(to_clouds(clouds), to_transforms(transforms), model);
        std::vector<Eigen::MatrixXd> comps(post.components.begin(), post.components.end());
        return std::make_pair(comps, post.outlier);
      },
      py::arg("clouds"), py::arg("transforms"), py::arg("centroids"), py::arg("variances"),
      py::arg("weights"), py::arg("outlier_weight"), py::arg("volume"),
      "Posteriors per cloud: (list of N x M component tables, list of outlier shares).");

  m.def(
      "build_knn",
      [](const RowPoints& cloud, std::size_t k) {
        const NeighborGraph g = build_knn(to_cloud(cloud), k);
        Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(
            static_cast<Eigen::Index>(g.point_count()), static_cast<Eigen::Index>(g.degree()));
        for (std::size_t i = 0; i < g.point_count(); ++i) {
          const auto nb = g.neighbors(i);
          for (std::size_t r = 0; r < nb.size(); ++r)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = nb[r];
        }
        return out;
      },
      py::arg("cloud"), py::arg("k"));

  m.def(
      "random_rigid",
      [](double rot, double trans, std::uint64_t seed) {
        return random_rigid(rot, trans, seed).homogeneous();
      },
      py::arg("rotation_range_deg"), py::arg("translation_range_mm"), py::arg("seed"));

  m.def(
      "synthetic_surface", [](Eigen::Index count) { return to_rows(synthetic_surface(count)); },
      py::arg("count") = 1000);

  py::class_<TrialSpec>(m, "TrialSpec")
      .def(py::init<>())
      .def_readwrite("seed", &TrialSpec::seed)
      .def_readwrite("noise_sigma", &TrialSpec::noise_sigma)
      .def_readwrite("outlier_ratio", &TrialSpec::outlier_ratio)
      .def_readwrite("rotation_range", &TrialSpec::rotation_range)
      .def_readwrite("translation_range", &TrialSpec::translation_range)
      .def_readwrite("cloud_sizes", &TrialSpec::cloud_sizes)
      .def_readwrite("success_threshold", &TrialSpec::success_threshold)
      .def_readwrite("registration", &TrialSpec::registration);

  m.def(
      "run_trial",
      [](const TrialSpec& spec, std::optional<RowPoints> base) {
        const PointCloud cloud = base ? to_cloud(*base) : synthetic_surface();
        TrialReport r;
        {
          py::gil_scoped_release release;
          r = run_trial(spec, cloud);
        }
        return report_dict(r);
      },
      py::arg("spec"), py::arg("base") = py::none());

  m.def(
      "read_cloud", [](const std::filesystem::path& p) { return to_rows(io::read_cloud(p)); },
      py::arg("path"));
  m.def(
      "write_cloud",
      [](const RowPoints& cloud, const std::filesystem::path& p) {
        io::write_cloud(to_cloud(cloud), p);
      },
      py::arg("cloud"), py::arg("path"));
}
