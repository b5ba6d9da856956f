#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "jprlc/geometry.hpp"

namespace jprlc {

/// Directed k-nearest-neighbor relation of one cloud. Every listed pair
/// (i, b) carries weight 1 in the local-consistency sums; all other pairs 0.
class NeighborGraph {
 public:
  NeighborGraph() = default;
  NeighborGraph(std::size_t point_count, std::size_t k, std::vector<std::uint32_t> flat);

  std::size_t point_count() const noexcept { return point_count_; }
  /// Entries per row: min(k, point_count - 1).
  std::size_t degree() const noexcept { return degree_; }
  std::size_t k() const noexcept { return k_; }

  std::span<const std::uint32_t> neighbors(std::size_t i) const {
    return {flat_.data() + i * degree_, degree_};
  }

 private:
  std::size_t point_count_ = 0;
  std::size_t k_ = 0;
  std::size_t degree_ = 0;
  std::vector<std::uint32_t> flat_;
};

/// Exact k-NN by Euclidean distance excluding the point itself; ties go to
/// the lower index. Throws ConfigError for k == 0 or a singleton cloud.
NeighborGraph build_knn(const PointCloud& cloud, std::size_t k);

std::vector<NeighborGraph> build_knn(std::span<const PointCloud> clouds, std::size_t k);

}  // namespace jprlc
