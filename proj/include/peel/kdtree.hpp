#pragma once

#include "peel/camera.hpp"

#include <vector>

namespace peel {

/// Static 3D k-d tree with exact nearest-neighbour queries.
class KdTree3 {
public:
    KdTree3() = default;
    explicit KdTree3(std::vector<Vec3> points);

    bool empty() const { return points_.empty(); }
    std::size_t size() const { return points_.size(); }
    const Vec3& point(std::size_t i) const { return points_[i]; }

    /// Index of the nearest point (lowest index among exact ties), -1 if empty.
    int nearest(const Vec3& q, double* squared_distance = nullptr) const;

    /// All indices with squared distance <= r2, ascending.
    std::vector<int> within(const Vec3& q, double r2) const;

private:
    struct Node {
        int begin;
        int end;
        int split_axis;  // -1 for leaf
        double split;
        int left;
        int right;
    };

    int build(int begin, int end);
    void nearest_rec(int node, const Vec3& q, int& best, double& best_d2) const;
    void within_rec(int node, const Vec3& q, double r2, std::vector<int>& out) const;

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

}  // namespace peel
