#include "peel/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace peel {

namespace {

constexpr int kMaxLeaf = 8;

Vec3 centroid(const TriangleBvh::Triangle& t) { return (t.a + t.b + t.c) / 3.0; }

bool ray_box(const Eigen::AlignedBox3d& box, const Vec3& origin, const Vec3& inv_dir) {
    double t0 = 0.0;
    double t1 = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
        double a = (box.min()[k] - origin[k]) * inv_dir[k];
        double b = (box.max()[k] - origin[k]) * inv_dir[k];
        if (std::isnan(a) || std::isnan(b)) {
            // Zero direction component with the origin on a slab plane.
            if (origin[k] < box.min()[k] || origin[k] > box.max()[k]) return false;
            continue;
        }
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
        if (t0 > t1 * (1.0 + 1e-12) + 1e-300) return false;
    }
    return true;
}

}  // namespace

TriangleBvh::TriangleBvh(std::vector<Triangle> triangles) : tris_(std::move(triangles)) {
    order_.resize(tris_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!tris_.empty()) build(0, static_cast<int>(tris_.size()));
}

TriangleBvh::TriangleBvh(const TriMesh& mesh) {
    std::vector<Triangle> tris;
    tris.reserve(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& fc = mesh.faces[f];
        tris.push_back({mesh.vertices[static_cast<std::size_t>(fc[0])],
                        mesh.vertices[static_cast<std::size_t>(fc[1])],
                        mesh.vertices[static_cast<std::size_t>(fc[2])], 0, static_cast<int>(f)});
    }
    *this = TriangleBvh(std::move(tris));
}

int TriangleBvh::build(int begin, int end) {
    Eigen::AlignedBox3d box;
    Eigen::AlignedBox3d cbox;
    for (int i = begin; i < end; ++i) {
        const Triangle& t = tris_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
        box.extend(t.a).extend(t.b).extend(t.c);
        cbox.extend(centroid(t));
    }
    // Pad so rays grazing a flat box are never rejected by rounding.
    const double pad = 1e-9 * (1.0 + box.min().cwiseAbs().cwiseMax(box.max().cwiseAbs()).maxCoeff());
    box.min().array() -= pad;
    box.max().array() += pad;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({box, begin, end, -1, -1});
    if (end - begin <= kMaxLeaf) return id;

    int axis = 0;
    cbox.sizes().maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int x, int y) {
                         const double cx = centroid(tris_[static_cast<std::size_t>(x)])[axis];
                         const double cy = centroid(tris_[static_cast<std::size_t>(y)])[axis];
                         return cx < cy || (cx == cy && x < y);
                     });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
}

bool intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                        const Vec3& c, double& t, Vec3& bary) {
    // Shear the triangle into a ray-aligned frame; the edge functions then
    // share exact evaluations across neighbouring triangles.
    int kz = 0;
    dir.cwiseAbs().maxCoeff(&kz);
    int kx = (kz + 1) % 3;
    int ky = (kx + 1) % 3;
    if (dir[kz] < 0.0) std::swap(kx, ky);
    const double sx = dir[kx] / dir[kz];
    const double sy = dir[ky] / dir[kz];
    const double sz = 1.0 / dir[kz];

    const Vec3 A = a - origin;
    const Vec3 B = b - origin;
    const Vec3 C = c - origin;
    const double ax = A[kx] - sx * A[kz];
    const double ay = A[ky] - sy * A[kz];
    const double bx = B[kx] - sx * B[kz];
    const double by = B[ky] - sy * B[kz];
    const double cx = C[kx] - sx * C[kz];
    const double cy = C[ky] - sy * C[kz];

    const double u = cx * by - cy * bx;
    const double v = ax * cy - ay * cx;
    const double w = bx * ay - by * ax;
    if ((u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0)) return false;
    const double det = u + v + w;
    if (det == 0.0) return false;

    const double az = sz * A[kz];
    const double bz = sz * B[kz];
    const double cz = sz * C[kz];
    const double tt = u * az + v * bz + w * cz;
    t = tt / det;
    bary = Vec3(u / det, v / det, w / det);
    return true;
}

void TriangleBvh::intersect_all(const Vec3& origin, const Vec3& dir, double t_min,
                                std::vector<RayHit>& hits) const {
    if (nodes_.empty()) return;
    const Vec3 inv(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
    int stack[128];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node& n = nodes_[static_cast<std::size_t>(stack[--sp])];
        if (!ray_box(n.box, origin, inv)) continue;
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                const int prim = order_[static_cast<std::size_t>(i)];
                const Triangle& tri = tris_[static_cast<std::size_t>(prim)];
                double t = 0.0;
                Vec3 bary;
                if (intersect_triangle(origin, dir, tri.a, tri.b, tri.c, t, bary) && t > t_min)
                    hits.push_back({t, prim, bary});
            }
            continue;
        }
        stack[sp++] = n.left;
        stack[sp++] = n.right;
    }
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                               Vec3& bary) {
    // Voronoi-region walk over vertices, edges, then the face interior.
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) {
        bary = Vec3(1, 0, 0);
        return a;
    }
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) {
        bary = Vec3(0, 1, 0);
        return b;
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        bary = Vec3(1 - v, v, 0);
        return a + v * ab;
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) {
        bary = Vec3(0, 0, 1);
        return c;
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        bary = Vec3(1 - w, 0, w);
        return a + w * ac;
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        bary = Vec3(0, 1 - w, w);
        return b + w * (c - b);
    }
    if (!(va + vb + vc > 0.0)) {
        // Zero-area triangle: nearest of its edges.
        auto seg = [&](const Vec3& s0, const Vec3& s1, double& param) {
            const Vec3 d = s1 - s0;
            const double len2 = d.squaredNorm();
            param = len2 > 0.0 ? std::clamp((p - s0).dot(d) / len2, 0.0, 1.0) : 0.0;
            return Vec3(s0 + param * d);
        };
        double s = 0.0;
        Vec3 best = seg(a, b, s);
        bary = Vec3(1 - s, s, 0);
        Vec3 cand = seg(a, c, s);
        if ((cand - p).squaredNorm() < (best - p).squaredNorm()) {
            best = cand;
            bary = Vec3(1 - s, 0, s);
        }
        cand = seg(b, c, s);
        if ((cand - p).squaredNorm() < (best - p).squaredNorm()) {
            best = cand;
            bary = Vec3(0, 1 - s, s);
        }
        return best;
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    bary = Vec3(1 - v - w, v, w);
    return a + ab * v + ac * w;
}

ClosestPoint TriangleBvh::closest(const Vec3& q) const {
    ClosestPoint best;
    best.distance = std::numeric_limits<double>::infinity();
    if (nodes_.empty()) return best;
    double best_d2 = std::numeric_limits<double>::infinity();
    int stack[128];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node& n = nodes_[static_cast<std::size_t>(stack[--sp])];
        if (n.box.squaredExteriorDistance(q) > best_d2) continue;
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                const int prim = order_[static_cast<std::size_t>(i)];
                const Triangle& t = tris_[static_cast<std::size_t>(prim)];
                Vec3 bary;
                const Vec3 p = closest_point_on_triangle(q, t.a, t.b, t.c, bary);
                const double d2 = (p - q).squaredNorm();
                if (d2 < best_d2 || (d2 == best_d2 && prim < best.prim)) {
                    best_d2 = d2;
                    best.prim = prim;
                    best.point = p;
                    best.bary = bary;
                }
            }
            continue;
        }
        // Visit the nearer child first.
        const Node& l = nodes_[static_cast<std::size_t>(n.left)];
        const Node& r = nodes_[static_cast<std::size_t>(n.right)];
        if (l.box.squaredExteriorDistance(q) <= r.box.squaredExteriorDistance(q)) {
            stack[sp++] = n.right;
            stack[sp++] = n.left;
        } else {
            stack[sp++] = n.left;
            stack[sp++] = n.right;
        }
    }
    best.distance = std::sqrt(best_d2);
    return best;
}

}  // namespace peel
