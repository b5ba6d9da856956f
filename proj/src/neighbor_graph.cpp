#include "jprlc/neighbor_graph.hpp"

#include <algorithm>
#include <utility>

#include "jprlc/error.hpp"

namespace jprlc {

NeighborGraph::NeighborGraph(std::size_t point_count, std::size_t k,
                             std::vector<std::uint32_t> flat)
    : point_count_(point_count),
      k_(k),
      degree_(point_count > 0 ? std::min(k, point_count - 1) : 0),
      flat_(std::move(flat)) {
  if (flat_.size() != point_count_ * degree_)
    throw ConfigError("neighbor table size does not match point count and degree");
}

NeighborGraph build_knn(const PointCloud& cloud, std::size_t k) {
  if (k == 0) throw ConfigError("k-NN: k must be positive");
  const auto n = static_cast<std::size_t>(cloud.size());
  if (n < 2) throw ConfigError("k-NN: cloud needs at least two points");

  const std::size_t degree = std::min(k, n - 1);
  const Eigen::Matrix3Xd& pts = cloud.points();
  std::vector<std::uint32_t> flat;
  flat.reserve(n * degree);

  // (squared distance, index) sorts by distance then index, which is the tie rule.
  std::vector<std::pair<double, std::uint32_t>> cand(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p = pts.col(static_cast<Eigen::Index>(i));
    std::size_t c = 0;
    for (std::size_t b = 0; b < n; ++b) {
      if (b == i) continue;
      cand[c++] = {(pts.col(static_cast<Eigen::Index>(b)) - p).squaredNorm(),
                   static_cast<std::uint32_t>(b)};
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(degree),
                      cand.end());
    for (std::size_t r = 0; r < degree; ++r) flat.push_back(cand[r].second);
  }
  return {n, k, std::move(flat)};
}

std::vector<NeighborGraph> build_knn(std::span<const PointCloud> clouds, std::size_t k) {
  std::vector<NeighborGraph> graphs;
  graphs.reserve(clouds.size());
  for (const auto& c : clouds) graphs.push_back(build_knn(c, k));
  return graphs;
}

}  // namespace jprlc
