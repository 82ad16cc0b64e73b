#include "gvmlio/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace gvmlio {

KdTree3::KdTree3(const std::vector<Vec3>& points) : points_(points) {
  order_.resize(points_.size());
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    root_ = build(0, static_cast<int>(points_.size()), 0);
  }
}

int KdTree3::build(int begin, int end, int depth) {
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin <= kLeafSize) {
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  // Split on the widest axis of the range's bounding box.
  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  node.axis = axis;

  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double pa = points_[a](axis), pb = points_[b](axis);
                     return pa < pb || (pa == pb && a < b);
                   });
  node.split = points_[order_[mid]](axis);

  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

std::vector<int> KdTree3::knn(const Vec3& query, int k) const {
  // Max-heap of the best k candidates by (distance^2, index).
  using Cand = std::pair<double, int>;
  std::priority_queue<Cand> heap;

  auto visit_leaf = [&](const Node& node) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const double d2 = (points_[idx] - query).squaredNorm();
      if (static_cast<int>(heap.size()) < k) {
        heap.emplace(d2, idx);
      } else if (Cand(d2, idx) < heap.top()) {
        heap.pop();
        heap.emplace(d2, idx);
      }
    }
  };

  // Iterative DFS, nearer child first.
  std::vector<int> stack;
  if (root_ >= 0) stack.push_back(root_);
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (node.left < 0) {
      visit_leaf(node);
      continue;
    }
    const double diff = query(node.axis) - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    if (static_cast<int>(heap.size()) < k || diff * diff <= heap.top().first) {
      stack.push_back(far);
    }
    stack.push_back(near);
  }

  std::vector<int> out(heap.size());
  for (int i = static_cast<int>(heap.size()) - 1; i >= 0; --i) {
    out[i] = heap.top().second;
    heap.pop();
  }
  return out;
}

}  // namespace gvmlio
