#pragma once

#include "peel/camera.hpp"
#include "peel/mesh.hpp"

#include <Eigen/Geometry>

#include <Eigen/Core>

#include <vector>

namespace peel {

struct RayHit {
    double t = 0.0;
    int prim = -1;
    Vec3 bary = Vec3::Zero();  // weights of the triangle's three corners
};

struct ClosestPoint {
    double distance = 0.0;
    int prim = -1;
    Vec3 point = Vec3::Zero();
    Vec3 bary = Vec3::Zero();
};

/// Axis-aligned BVH over triangles: median split on the longest centroid
/// extent, at most 8 triangles per leaf.
class TriangleBvh {
public:
    struct Triangle {
        Vec3 a, b, c;
        int mesh;
        int face;
    };

    TriangleBvh() = default;
    explicit TriangleBvh(std::vector<Triangle> triangles);
    /// Convenience: one mesh, prim index == face index.
    explicit TriangleBvh(const TriMesh& mesh);

    bool empty() const { return tris_.empty(); }
    std::size_t size() const { return tris_.size(); }
    const Triangle& triangle(int prim) const { return tris_[static_cast<std::size_t>(prim)]; }

    /// Every intersection with t > t_min along origin + t * dir, unsorted.
    void intersect_all(const Vec3& origin, const Vec3& dir, double t_min,
                       std::vector<RayHit>& hits) const;

    /// Exact closest point over all triangles; ties resolve to the lowest prim.
    ClosestPoint closest(const Vec3& q) const;

private:
    struct Node {
        Eigen::AlignedBox3d box;
        int begin;
        int end;
        int left;
        int right;
    };

    int build(int begin, int end);

    std::vector<Triangle> tris_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

/// Watertight ray/triangle test (edges and vertices count as hits).
bool intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                        const Vec3& c, double& t, Vec3& bary);

/// Closest point on triangle abc to p, with its barycentric weights.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                               Vec3& bary);

}  // namespace peel
