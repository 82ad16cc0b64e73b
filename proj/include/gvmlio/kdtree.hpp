#pragma once

#include <vector>

#include "gvmlio/common.hpp"

namespace gvmlio {

// Static exact k-d tree over 3D points, built once per scan. Ties are broken
// on (coordinate, index) so builds and queries are fully deterministic.
class KdTree3 {
 public:
  explicit KdTree3(const std::vector<Vec3>& points);

  // Indices of the k nearest points to `query` (the query point itself is a
  // candidate when it belongs to the indexed set), ordered by increasing
  // distance, ties by index.
  std::vector<int> knn(const Vec3& query, int k) const;

  int size() const { return static_cast<int>(points_.size()); }

 private:
  struct Node {
    int left = -1;
    int right = -1;
    int begin = 0;  // leaf range into order_
    int end = 0;
    int axis = 0;
    double split = 0.0;
  };

  int build(int begin, int end, int depth);

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
  static constexpr int kLeafSize = 16;
};

}  // namespace gvmlio
