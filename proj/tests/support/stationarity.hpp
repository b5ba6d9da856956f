#pragma once

// Finite-difference checks that each closed-form M-step block sits at a
// stationary point of the penalized objective with posteriors held fixed.
// Gradients are reported as |dQ/dtheta| * L / S where L is the natural
// length scale of theta and S the sum of absolute objective terms.

#include <algorithm>
#include <cmath>

#include "jprlc/solver.hpp"
#include "support/oracles.hpp"

namespace jprlc::oracle {

struct Stationarity {
  double translation = 0, rotation = 0, centroid = 0, variance = 0, weight = 0;
  int clamped = 0;  // variances that hit the floor and are exempt

  double worst() const { return std::max({translation, rotation, centroid, variance, weight}); }
};

inline Eigen::Matrix3d small_rotation(int axis, double angle) {
  return Eigen::AngleAxisd(angle, Eigen::Vector3d::Unit(axis)).toRotationMatrix();
}

inline Stationarity check_stationarity(const Instance& inst) {
  const auto clouds = std::span<const PointCloud>(inst.clouds);
  const PosteriorMatrix post = e_step(clouds, inst.transforms, inst.model);
  const Edges edges = inst.lambda == 0.0 ? Edges{} : edges_of(inst.graphs);
  const double lambda = inst.lambda;
  const double floor = 1e-12;

  auto q = [&](const std::vector<RigidTransform>& t, const MixtureModel& m) {
    return objective(clouds, t, m, post, edges).total(lambda);
  };
  auto scale = [&](const std::vector<RigidTransform>& t, const MixtureModel& m) {
    return objective(clouds, t, m, post, edges).magnitude(lambda);
  };

  Stationarity out;
  const double length = std::sqrt(inst.model.variances.mean());

  // Poses, with the model held at its input value.
  std::vector<RigidTransform> poses;
  for (std::size_t j = 0; j < clouds.size(); ++j) {
    const NeighborGraph* g = lambda == 0.0 ? nullptr : &inst.graphs[j];
    const Eigen::Matrix3d r =
        update_rotation(clouds[j], post.components[j], g, inst.model, lambda).rotation;
    poses.emplace_back(r, update_translation(clouds[j], post.components[j], g, r, inst.model, lambda));
  }
  {
    const double s = scale(poses, inst.model);
    for (std::size_t j = 0; j < clouds.size(); ++j) {
      for (int k = 0; k < 3; ++k) {
        const double h = 1e-4 * length;
        const double gt = central(
            [&](double d) {
              auto p = poses;
              p[j] = RigidTransform(p[j].rotation(),
                                    p[j].translation() + d * Eigen::Vector3d::Unit(k));
              return q(p, inst.model);
            },
            h);
        out.translation = std::max(out.translation, std::abs(gt) * length / s);
        const double gr = central(
            [&](double d) {
              auto p = poses;
              p[j] = RigidTransform(small_rotation(k, d) * p[j].rotation(), p[j].translation());
              return q(p, inst.model);
            },
            1e-5);
        out.rotation = std::max(out.rotation, std::abs(gr) / s);
      }
    }
  }

  // Centroids given the new poses.
  MixtureModel m = inst.model;
  m.centroids = update_centroids(clouds, post, inst.graphs, poses, inst.model, lambda);
  {
    const double s = scale(poses, m);
    for (Eigen::Index c = 0; c < m.size(); ++c)
      for (int k = 0; k < 3; ++k) {
        const double g = central(
            [&](double d) {
              MixtureModel mm = m;
              mm.centroids(k, c) += d;
              return q(poses, mm);
            },
            1e-4 * length);
        out.centroid = std::max(out.centroid, std::abs(g) * length / s);
      }
  }

  // Variances given the new centroids.
  m.variances = update_variances(clouds, post, inst.graphs, poses, m.centroids, inst.model, lambda,
                                 floor);
  {
    const double s = scale(poses, m);
    for (Eigen::Index c = 0; c < m.size(); ++c) {
      if (m.variances[c] <= floor) {
        ++out.clamped;
        continue;
      }
      const double v = m.variances[c];
      const double g = central(
          [&](double d) {
            MixtureModel mm = m;
            mm.variances[c] += d;
            return q(poses, mm);
          },
          1e-5 * v);
      out.variance = std::max(out.variance, std::abs(g) * v / s);
    }
  }

  // Weights along the simplex.
  m.weights = update_weights(post, m.outlier_weight);
  {
    const double s = scale(poses, m);
    for (Eigen::Index a = 0; a < m.size(); ++a)
      for (Eigen::Index b = a + 1; b < m.size(); ++b) {
        const double l = std::min(m.weights[a], m.weights[b]);
        const double g = central(
            [&](double d) {
              MixtureModel mm = m;
              mm.weights[a] += d;
              mm.weights[b] -= d;
              return q(poses, mm);
            },
            1e-5 * l);
        out.weight = std::max(out.weight, std::abs(g) * l / s);
      }
  }
  return out;
}

}  // namespace jprlc::oracle
