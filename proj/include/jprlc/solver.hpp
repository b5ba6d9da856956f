#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jprlc/geometry.hpp"
#include "jprlc/mixture.hpp"
#include "jprlc/neighbor_graph.hpp"

namespace jprlc {

struct RegistrationConfig {
  double lambda = 0.1;               // weight of the local-consistency term
  int iterations = 100;              // fixed EM iteration count
  std::size_t k_neighbors = 5;
  Eigen::Index m_count = 1000;       // Gaussian components
  double outlier_weight = 0.1;       // fixed weight of the uniform class
  double initial_variance = 1000.0;  // mm^2
  // Lower clamp on component variances, mm^2. Unset means
  // (1e-4 x bounding-box diagonal)^2 of the input set.
  std::optional<double> variance_floor;
  // Stop when |dQ| / |Q| falls below this. 0 disables (fixed iteration count).
  double early_stop_tolerance = 0.0;

  void validate() const;
};

struct RegistrationResult {
  std::vector<RigidTransform> transforms;
  MixtureModel model;
  // Objective after each M-step, evaluated with that iteration's posteriors.
  std::vector<double> objective_trace;
  // Same posteriors, parameters as they were before the M-step.
  std::vector<double> pre_mstep_trace;
  int iterations_run = 0;
  std::vector<std::string> warnings;
};

/// The four additive parts of the penalized objective, posteriors held fixed.
struct ObjectiveTerms {
  double residual = 0.0;           // sum p |phi(x) - y|^2 / (2 s)
  double log_variance = 0.0;       // 3/2 sum p log s
  double log_weight = 0.0;         // -sum p log pi
  double local_consistency = 0.0;  // sum over directed edges of D_jib
  double lambda = 0.0;

  double gmm() const noexcept { return residual + log_variance + log_weight; }
  double total() const noexcept { return gmm() + lambda * local_consistency; }
  // Sum of absolute term magnitudes, a scale for relative comparisons.
  double magnitude() const noexcept;
};

/// Posterior-dissimilarity of points i and b of cloud j in the closed form
///   sum_m (p_im - p_bm) / (4 s_m) (|phi(x_b) - y_m|^2 - |phi(x_i) - y_m|^2).
double kl_similarity(std::span<const PointCloud> clouds, const PosteriorMatrix& posteriors,
                     std::span<const RigidTransform> transforms, const MixtureModel& model,
                     std::size_t j, Eigen::Index i, Eigen::Index b);

/// Penalized objective. An empty `graphs` span means no neighbor edges.
ObjectiveTerms objective(std::span<const PointCloud> clouds,
                         std::span<const RigidTransform> transforms, const MixtureModel& model,
                         const PosteriorMatrix& posteriors, std::span<const NeighborGraph> graphs,
                         double lambda);

/// Translation sufficient statistics of one cloud. They do not depend on the
/// pose, so rotation and translation can be solved jointly from them.
struct TranslationStats {
  Eigen::Vector3d mu_x = Eigen::Vector3d::Zero();  // includes the neighbor-difference term
  Eigen::Vector3d mu_y = Eigen::Vector3d::Zero();
  double n_p = 0.0;
};

/// Throws DegenerateError when the cloud has no Gaussian posterior mass.
TranslationStats translation_statistics(const PointCloud& cloud, const PosteriorTable& posteriors,
                                        const NeighborGraph* graph, const MixtureModel& model,
                                        double lambda);

/// t* = mu_y / N_p - R mu_x / N_p.
Eigen::Vector3d update_translation(const PointCloud& cloud, const PosteriorTable& posteriors,
                                   const NeighborGraph* graph, const Eigen::Matrix3d& rotation,
                                   const MixtureModel& model, double lambda);

struct RotationUpdate {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();  // the matrix whose Tr(R H) is maximized
  bool degenerate = false;                      // H has rank < 2
};

/// Proper rotation maximizing Tr(R H) from the SVD of H, with the det
/// correction excluding reflections.
Eigen::Matrix3d rotation_maximizing_trace(const Eigen::Matrix3d& h, bool* degenerate = nullptr);

/// Builds H = H1 + H2 from centered coordinates and returns the optimal rotation.
RotationUpdate update_rotation(const PointCloud& cloud, const PosteriorTable& posteriors,
                               const NeighborGraph* graph, const MixtureModel& model,
                               double lambda);

/// New centroids given the just-updated poses. Components whose total
/// posterior mass is below 1e-12 keep their previous centroid.
Eigen::Matrix3Xd update_centroids(std::span<const PointCloud> clouds,
                                  const PosteriorMatrix& posteriors,
                                  std::span<const NeighborGraph> graphs,
                                  std::span<const RigidTransform> transforms,
                                  const MixtureModel& model, double lambda);

/// New variances given the just-updated centroids, clamped to `variance_floor`.
/// Zero-mass components keep their previous variance.
Eigen::VectorXd update_variances(std::span<const PointCloud> clouds,
                                 const PosteriorMatrix& posteriors,
                                 std::span<const NeighborGraph> graphs,
                                 std::span<const RigidTransform> transforms,
                                 const Eigen::Matrix3Xd& centroids, const MixtureModel& model,
                                 double lambda, double variance_floor);

/// pi_m = (1 - pi_out) mass_m / total mass. Throws DegenerateError on zero mass.
Eigen::VectorXd update_weights(const PosteriorMatrix& posteriors, double outlier_weight);

/// Parameters carried between EM iterations.
struct EmState {
  std::vector<RigidTransform> transforms;
  MixtureModel model;
};

/// Identity rotations, translations moving each cloud centroid onto the
/// mixture centre, and the sphere-initialized mixture.
EmState initial_state(std::span<const PointCloud> clouds, const RegistrationConfig& config);

double default_variance_floor(std::span<const PointCloud> clouds);

/// One full M-step (translation/rotation per cloud, centroids, variances,
/// weights) with posteriors held fixed. Appends rank warnings to `warnings`.
EmState m_step(std::span<const PointCloud> clouds, const PosteriorMatrix& posteriors,
               std::span<const NeighborGraph> graphs, const EmState& state, double lambda,
               double variance_floor, std::vector<std::string>* warnings = nullptr);

RegistrationResult run_registration(std::span<const PointCloud> clouds,
                                    const RegistrationConfig& config);

}  // namespace jprlc
