#include "peel/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace peel {

namespace {
constexpr int kLeafSize = 8;
}

KdTree3::KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!points_.empty()) build(0, static_cast<int>(points_.size()));
}

int KdTree3::build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end, -1, 0.0, -1, -1});
    if (end - begin <= kLeafSize) return id;

    Vec3 lo = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(begin)])];
    Vec3 hi = lo;
    for (int i = begin; i < end; ++i) {
        const Vec3& p = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                         const double pa = points_[static_cast<std::size_t>(a)][axis];
                         const double pb = points_[static_cast<std::size_t>(b)][axis];
                         return pa < pb || (pa == pb && a < b);
                     });
    const double split = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(mid)])][axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    Node& n = nodes_[static_cast<std::size_t>(id)];
    n.split_axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
}

void KdTree3::nearest_rec(int node, const Vec3& q, int& best, double& best_d2) const {
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    if (n.split_axis < 0) {
        for (int i = n.begin; i < n.end; ++i) {
            const int idx = order_[static_cast<std::size_t>(i)];
            const double d2 = (points_[static_cast<std::size_t>(idx)] - q).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
                best_d2 = d2;
                best = idx;
            }
        }
        return;
    }
    const double diff = q[n.split_axis] - n.split;
    const int first = diff <= 0.0 ? n.left : n.right;
    const int second = diff <= 0.0 ? n.right : n.left;
    nearest_rec(first, q, best, best_d2);
    // Equality keeps ties on the far side reachable.
    if (diff * diff <= best_d2) nearest_rec(second, q, best, best_d2);
}

int KdTree3::nearest(const Vec3& q, double* squared_distance) const {
    if (points_.empty()) return -1;
    int best = std::numeric_limits<int>::max();
    double best_d2 = std::numeric_limits<double>::infinity();
    nearest_rec(0, q, best, best_d2);
    if (squared_distance) *squared_distance = best_d2;
    return best;
}

void KdTree3::within_rec(int node, const Vec3& q, double r2, std::vector<int>& out) const {
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    if (n.split_axis < 0) {
        for (int i = n.begin; i < n.end; ++i) {
            const int idx = order_[static_cast<std::size_t>(i)];
            if ((points_[static_cast<std::size_t>(idx)] - q).squaredNorm() <= r2) out.push_back(idx);
        }
        return;
    }
    const double diff = q[n.split_axis] - n.split;
    if (diff <= 0.0 || diff * diff <= r2) within_rec(n.left, q, r2, out);
    if (diff >= 0.0 || diff * diff <= r2) within_rec(n.right, q, r2, out);
}

std::vector<int> KdTree3::within(const Vec3& q, double r2) const {
    std::vector<int> out;
    if (!points_.empty()) within_rec(0, q, r2, out);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace peel
