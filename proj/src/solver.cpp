#include "jprlc/solver.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>
#include <string>

#include "jprlc/error.hpp"

namespace jprlc {

namespace {

constexpr double kZeroMass = 1e-12;

const NeighborGraph* graph_for(std::span<const NeighborGraph> graphs, std::size_t j) {
  return graphs.empty() ? nullptr : &graphs[j];
}

void check_graph(const NeighborGraph* graph, Eigen::Index n) {
  if (graph != nullptr && graph->point_count() != static_cast<std::size_t>(n))
    throw ConfigError("neighbor graph does not match cloud size");
}

// |phi(x_i) - y_m|^2 for every point/component pair of one cloud.
PosteriorTable squared_distances(const Eigen::Matrix3Xd& moved, const Eigen::Matrix3Xd& centroids) {
  PosteriorTable d(moved.cols(), centroids.cols());
  for (Eigen::Index i = 0; i < moved.cols(); ++i) {
    const Eigen::Vector3d p = moved.col(i);
    d.row(i) = (centroids.colwise() - p).colwise().squaredNorm();
  }
  return d;
}

// Re-throws numeric/degenerate failures with `where` prepended.
template <typename F>
decltype(auto) in_block(const std::string& where_, F&& f) {
  const std::string where = where_ + ": ";
  try {
    return f();
  } catch (const DegenerateError& e) {
    throw DegenerateError(where + e.what());
  } catch (const NumericError& e) {
    throw NumericError(where + e.what());
  }
}

}  // namespace

void RegistrationConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (k_neighbors < 1) throw ConfigError("k_neighbors must be >= 1");
  if (m_count < 1) throw ConfigError("component count must be >= 1");
  if (!(outlier_weight >= 0.0 && outlier_weight < 1.0))
    throw ConfigError("outlier weight must lie in [0, 1)");
  if (!(initial_variance > 0.0)) throw ConfigError("initial variance must be positive");
  if (variance_floor && !(*variance_floor > 0.0))
    throw ConfigError("variance floor must be positive");
  if (!(early_stop_tolerance >= 0.0)) throw ConfigError("early-stop tolerance must be >= 0");
}

double ObjectiveTerms::magnitude() const noexcept {
  return std::abs(residual) + std::abs(log_variance) + std::abs(log_weight) +
         std::abs(lambda * local_consistency);
}

double kl_similarity(std::span<const PointCloud> clouds, const PosteriorMatrix& posteriors,
                     std::span<const RigidTransform> transforms, const MixtureModel& model,
                     std::size_t j, Eigen::Index i, Eigen::Index b) {
  const Point3 xi = apply_transform(transforms[j], clouds[j][i]);
  const Point3 xb = apply_transform(transforms[j], clouds[j][b]);
  const PosteriorTable& p = posteriors.components[j];
  double d = 0.0;
  for (Eigen::Index m = 0; m < model.size(); ++m) {
    const Eigen::Vector3d y = model.centroids.col(m);
    d += (p(i, m) - p(b, m)) / (4.0 * model.variances[m]) *
         ((xb - y).squaredNorm() - (xi - y).squaredNorm());
  }
  return d;
}

ObjectiveTerms objective(std::span<const PointCloud> clouds,
                         std::span<const RigidTransform> transforms, const MixtureModel& model,
                         const PosteriorMatrix& posteriors, std::span<const NeighborGraph> graphs,
                         double lambda) {
  const Eigen::Index m = model.size();
  const Eigen::RowVectorXd inv_var = model.variances.cwiseInverse().transpose();
  Eigen::RowVectorXd mass = Eigen::RowVectorXd::Zero(m);
  ObjectiveTerms q;
  q.lambda = lambda;

  for (std::size_t j = 0; j < clouds.size(); ++j) {
    const PosteriorTable& p = posteriors.components[j];
    const PosteriorTable a =
        squared_distances(apply_transform(transforms[j], clouds[j].points()), model.centroids);
    q.residual += 0.5 * (p.array() * a.array()).matrix().colwise().sum().dot(inv_var);
    mass += p.colwise().sum();

    const NeighborGraph* graph = graph_for(graphs, j);
    check_graph(graph, clouds[j].size());
    if (graph == nullptr) continue;
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(m);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (const auto b : graph->neighbors(static_cast<std::size_t>(i))) {
        acc += ((p.row(i) - p.row(b)).array() * (a.row(b) - a.row(i)).array()).matrix();
      }
    }
    q.local_consistency += 0.25 * acc.dot(inv_var);
  }

  for (Eigen::Index c = 0; c < m; ++c) {
    if (mass[c] == 0.0) continue;
    q.log_variance += 1.5 * mass[c] * std::log(model.variances[c]);
    q.log_weight -= mass[c] * std::log(model.weights[c]);
  }

  if (!std::isfinite(q.residual)) throw NumericError("objective: residual term is not finite");
  if (!std::isfinite(q.log_variance))
    throw NumericError("objective: log-variance term is not finite");
  if (!std::isfinite(q.log_weight)) throw NumericError("objective: log-weight term is not finite");
  if (!std::isfinite(q.local_consistency))
    throw NumericError("objective: local-consistency term is not finite");
  return q;
}

TranslationStats translation_statistics(const PointCloud& cloud, const PosteriorTable& posteriors,
                                        const NeighborGraph* graph, const MixtureModel& model,
                                        double lambda) {
  check_graph(graph, cloud.size());
  const Eigen::VectorXd inv_var = model.variances.cwiseInverse();
  // s_i = sum_m p_im / s_m
  const Eigen::VectorXd s = posteriors * inv_var;
  const Eigen::Matrix3Xd& x = cloud.points();

  TranslationStats st;
  st.n_p = s.sum();
  if (!(st.n_p > 0.0)) throw DegenerateError("cloud carries no Gaussian posterior mass");
  st.mu_x = x * s;
  st.mu_y = model.centroids * (inv_var.asDiagonal() * posteriors.transpose().rowwise().sum());
  if (graph != nullptr && lambda != 0.0) {
    Eigen::Vector3d lc = Eigen::Vector3d::Zero();
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      for (const auto b : graph->neighbors(static_cast<std::size_t>(i))) {
        lc += (s[i] - s[b]) * (x.col(b) - x.col(i));
      }
    }
    st.mu_x += 0.5 * lambda * lc;
  }
  return st;
}

Eigen::Vector3d update_translation(const PointCloud& cloud, const PosteriorTable& posteriors,
                                   const NeighborGraph* graph, const Eigen::Matrix3d& rotation,
                                   const MixtureModel& model, double lambda) {
  const TranslationStats st = translation_statistics(cloud, posteriors, graph, model, lambda);
  return st.mu_y / st.n_p - rotation * (st.mu_x / st.n_p);
}

Eigen::Matrix3d rotation_maximizing_trace(const Eigen::Matrix3d& h, bool* degenerate) {
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  if (degenerate != nullptr) {
    const Eigen::Vector3d sv = svd.singularValues();
    *degenerate = !(sv[1] > 1e-12 * sv[0]);
  }
  Eigen::Vector3d d(1.0, 1.0, (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  return v * d.asDiagonal() * u.transpose();
}

RotationUpdate update_rotation(const PointCloud& cloud, const PosteriorTable& posteriors,
                               const NeighborGraph* graph, const MixtureModel& model,
                               double lambda) {
  const TranslationStats st = translation_statistics(cloud, posteriors, graph, model, lambda);
  const Eigen::VectorXd inv_var = model.variances.cwiseInverse();
  // g_i = sum_m p_im / s_m y_m, one column per point.
  const Eigen::Matrix3Xd g = model.centroids * inv_var.asDiagonal() * posteriors.transpose();
  const Eigen::Matrix3Xd xc = cloud.points().colwise() - st.mu_x / st.n_p;

  RotationUpdate out;
  out.h = xc * g.transpose();
  if (graph != nullptr && lambda != 0.0) {
    Eigen::Matrix3d h2 = Eigen::Matrix3d::Zero();
    for (Eigen::Index i = 0; i < xc.cols(); ++i) {
      for (const auto b : graph->neighbors(static_cast<std::size_t>(i))) {
        h2 += (xc.col(i) - xc.col(b)) * (g.col(b) - g.col(i)).transpose();
      }
    }
    out.h += 0.5 * lambda * h2;
  }
  if (!out.h.allFinite()) throw NumericError("rotation: H is not finite");
  out.rotation = rotation_maximizing_trace(out.h, &out.degenerate);
  return out;
}

Eigen::Matrix3Xd update_centroids(std::span<const PointCloud> clouds,
                                  const PosteriorMatrix& posteriors,
                                  std::span<const NeighborGraph> graphs,
                                  std::span<const RigidTransform> transforms,
                                  const MixtureModel& model, double lambda) {
  const Eigen::Index m = model.size();
  Eigen::Matrix3Xd weighted = Eigen::Matrix3Xd::Zero(3, m);
  Eigen::RowVectorXd mass = Eigen::RowVectorXd::Zero(m);

  for (std::size_t j = 0; j < clouds.size(); ++j) {
    const PosteriorTable& p = posteriors.components[j];
    Eigen::Matrix3Xd target = apply_transform(transforms[j], clouds[j].points());
    const NeighborGraph* graph = graph_for(graphs, j);
    check_graph(graph, clouds[j].size());
    if (graph != nullptr && lambda != 0.0) {
      // Per point: sum of R(x_i - x_b) over out-edges minus R(x_a - x_i) over
      // in-edges, so that sum_{i,b} (p_im - p_bm) R(x_i - x_b) = sum_i p_im c_i.
      const Eigen::Matrix3Xd& x = clouds[j].points();
      Eigen::Matrix3Xd c = Eigen::Matrix3Xd::Zero(3, x.cols());
      for (Eigen::Index i = 0; i < x.cols(); ++i) {
        for (const auto b : graph->neighbors(static_cast<std::size_t>(i))) {
          const Eigen::Vector3d d = x.col(i) - x.col(b);
          c.col(i) += d;
          c.col(b) -= d;
        }
      }
      target -= 0.5 * lambda * (transforms[j].rotation() * c);
    }
    weighted += target * p;
    mass += p.colwise().sum();
  }

  Eigen::Matrix3Xd out = model.centroids;
  for (Eigen::Index c = 0; c < m; ++c) {
    if (mass[c] < kZeroMass) continue;
    out.col(c) = weighted.col(c) / mass[c];
  }
  return out;
}

Eigen::VectorXd update_variances(std::span<const PointCloud> clouds,
                                 const PosteriorMatrix& posteriors,
                                 std::span<const NeighborGraph> graphs,
                                 std::span<const RigidTransform> transforms,
                                 const Eigen::Matrix3Xd& centroids, const MixtureModel& model,
                                 double lambda, double variance_floor) {
  const Eigen::Index m = model.size();
  Eigen::RowVectorXd mass = Eigen::RowVectorXd::Zero(m);
  Eigen::RowVectorXd base = Eigen::RowVectorXd::Zero(m);
  Eigen::RowVectorXd lc = Eigen::RowVectorXd::Zero(m);

  for (std::size_t j = 0; j < clouds.size(); ++j) {
    const PosteriorTable& p = posteriors.components[j];
    const PosteriorTable a =
        squared_distances(apply_transform(transforms[j], clouds[j].points()), centroids);
    mass += p.colwise().sum();
    base += (p.array() * a.array()).matrix().colwise().sum();
    const NeighborGraph* graph = graph_for(graphs, j);
    check_graph(graph, clouds[j].size());
    if (graph == nullptr || lambda == 0.0) continue;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (const auto b : graph->neighbors(static_cast<std::size_t>(i))) {
        lc += ((p.row(i) - p.row(b)).array() * (a.row(b) - a.row(i)).array()).matrix();
      }
    }
  }

  Eigen::VectorXd out = model.variances;
  for (Eigen::Index c = 0; c < m; ++c) {
    if (mass[c] < kZeroMass) continue;
    const double v = base[c] / (3.0 * mass[c]) + lambda * lc[c] / (6.0 * mass[c]);
    if (!std::isfinite(v)) throw NumericError("variance update is not finite");
    out[c] = std::max(v, variance_floor);
  }
  return out;
}

Eigen::VectorXd update_weights(const PosteriorMatrix& posteriors, double outlier_weight) {
  if (posteriors.components.empty()) throw DegenerateError("no posteriors");
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(posteriors.components.front().cols());
  for (const auto& p : posteriors.components) mass += p.colwise().sum().transpose();
  const double total = mass.sum();
  if (!(total > 0.0)) throw DegenerateError("total Gaussian posterior mass is zero");
  return (1.0 - outlier_weight) * (mass / total);
}

double default_variance_floor(std::span<const PointCloud> clouds) {
  const double d = 1e-4 * bounding_box_diagonal(clouds);
  return d > 0.0 ? d * d : 1e-12;
}

EmState initial_state(std::span<const PointCloud> clouds, const RegistrationConfig& config) {
  EmState state;
  state.model =
      init_mixture(clouds, config.m_count, config.outlier_weight, config.initial_variance);
  const Point3 center = bounding_sphere(clouds).center;
  state.transforms.reserve(clouds.size());
  for (const auto& c : clouds)
    state.transforms.push_back(RigidTransform::from_translation(center - c.centroid()));
  return state;
}

EmState m_step(std::span<const PointCloud> clouds, const PosteriorMatrix& posteriors,
               std::span<const NeighborGraph> graphs, const EmState& state, double lambda,
               double variance_floor, std::vector<std::string>* warnings) {
  EmState next;
  next.model = state.model;
  next.transforms.reserve(clouds.size());
  for (std::size_t j = 0; j < clouds.size(); ++j) {
    const NeighborGraph* graph = graph_for(graphs, j);
    const std::string tag = " (cloud " + std::to_string(j) + ")";
    const RotationUpdate rot = in_block("block 'rotation'" + tag, [&] {
      return update_rotation(clouds[j], posteriors.components[j], graph, state.model, lambda);
    });
    if (rot.degenerate && warnings != nullptr)
      warnings->push_back("cloud " + std::to_string(j) + ": rank-deficient rotation matrix H");
    const Eigen::Vector3d t = in_block("block 'translation'" + tag, [&] {
      return update_translation(clouds[j], posteriors.components[j], graph, rot.rotation,
                                state.model, lambda);
    });
    next.transforms.emplace_back(rot.rotation, t);
  }
  next.model.centroids = in_block("block 'centroids'", [&] {
    return update_centroids(clouds, posteriors, graphs, next.transforms, state.model, lambda);
  });
  next.model.variances = in_block("block 'variances'", [&] {
    return update_variances(clouds, posteriors, graphs, next.transforms, next.model.centroids,
                            state.model, lambda, variance_floor);
  });
  next.model.weights = in_block("block 'weights'", [&] {
    return update_weights(posteriors, state.model.outlier_weight);
  });
  return next;
}

RegistrationResult run_registration(std::span<const PointCloud> clouds,
                                    const RegistrationConfig& config) {
  config.validate();
  if (clouds.size() < 2) throw ConfigError("registration needs at least two clouds");
  for (const auto& c : clouds)
    if (c.empty()) throw ConfigError("registration input contains an empty cloud");

  const double floor = config.variance_floor.value_or(default_variance_floor(clouds));
  std::vector<NeighborGraph> graphs;
  if (config.lambda != 0.0) graphs = build_knn(clouds, config.k_neighbors);

  EmState state = initial_state(clouds, config);
  state.model.variances = state.model.variances.cwiseMax(floor);

  RegistrationResult result;
  for (int q = 1; q <= config.iterations; ++q) {
    const std::string at = "iteration " + std::to_string(q);
    const PosteriorMatrix post = in_block(at + ": block 'e-step'", [&] {
      return e_step(clouds, state.transforms, state.model);
    });
    const double before = in_block(at + ": block 'objective'", [&] {
      return objective(clouds, state.transforms, state.model, post, graphs, config.lambda).total();
    });
    state = in_block(at, [&] {
      return m_step(clouds, post, graphs, state, config.lambda, floor, &result.warnings);
    });
    const double after = in_block(at + ": block 'objective'", [&] {
      return objective(clouds, state.transforms, state.model, post, graphs, config.lambda).total();
    });
    result.pre_mstep_trace.push_back(before);
    result.objective_trace.push_back(after);
    result.iterations_run = q;
    if (config.early_stop_tolerance > 0.0 && result.objective_trace.size() >= 2) {
      const double prev = result.objective_trace[result.objective_trace.size() - 2];
      if (std::abs(after - prev) <= config.early_stop_tolerance * std::abs(after)) break;
    }
  }
  result.transforms = std::move(state.transforms);
  result.model = std::move(state.model);
  return result;
}

}  // namespace jprlc
