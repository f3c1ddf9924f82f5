#include "peel/reconstruct.hpp"

#include "peel/error.hpp"
#include "peel/kdtree.hpp"
#include "peel/parallel.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace peel {

LabeledPointCloud backproject(const PeelStack& stack) {
    if (const auto report = validate_stack(stack); !report.empty()) {
        const auto& v = report.front();
        throw Error(ErrorCode::InvalidStack,
                    std::to_string(report.size()) + " violation(s), first: " +
                        std::string(to_string(v.rule)) + " at layer " + std::to_string(v.layer + 1) +
                        " (" + std::to_string(v.x) + "," + std::to_string(v.y) + ") " + v.detail);
    }
    const PinholeCamera& cam = stack.camera();
    LabeledPointCloud cloud;
    for (int l = 0; l < stack.layers(); ++l) {
        for (int y = 0; y < stack.height(); ++y) {
            for (int x = 0; x < stack.width(); ++x) {
                if (!stack.valid(l, x, y)) continue;
                const Vec3 p = unproject(cam, Vec2(x, y), stack.depth(l, x, y));
                const Vec3 n = cam.direction_to_world(stack.normal(l, x, y).cast<double>()).normalized();
                cloud.push_back(p, n, stack.seg(l, x, y), l + 1, PixelRef{l + 1, x, y});
            }
        }
    }
    return cloud;
}

LabeledPointCloud extract_garment(const LabeledPointCloud& cloud, std::uint8_t label) {
    LabeledPointCloud out;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.labels[i] != label) continue;
        out.push_back(cloud.points[i], cloud.normals[i], cloud.labels[i], cloud.layer_ids[i],
                      cloud.source_pixel[i]);
    }
    return out;
}

double default_tau_disc(const PeelStack& stack, int layer_id) {
    const int l = layer_id - 1;
    std::vector<double> diffs;
    double depth_sum = 0.0;
    std::size_t depth_count = 0;
    for (int y = 0; y < stack.height(); ++y) {
        for (int x = 0; x < stack.width(); ++x) {
            if (!stack.valid(l, x, y)) continue;
            const double d = stack.depth(l, x, y);
            depth_sum += d;
            ++depth_count;
            if (x + 1 < stack.width() && stack.valid(l, x + 1, y))
                diffs.push_back(std::abs(stack.depth(l, x + 1, y) - d));
            if (y + 1 < stack.height() && stack.valid(l, x, y + 1))
                diffs.push_back(std::abs(stack.depth(l, x, y + 1) - d));
        }
    }
    if (diffs.empty()) return 0.0;
    const auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
    std::nth_element(diffs.begin(), mid, diffs.end());
    // Floor keeps float rounding on constant-depth layers from cutting the grid.
    const double floor = 1e-4 * depth_sum / static_cast<double>(depth_count);
    // Steep but continuous surfaces step by several footprints per texel near
    // silhouettes; only larger jumps count as discontinuities.
    const double steep = 8.0 * stack.camera().pixel_footprint(depth_sum / static_cast<double>(depth_count));
    return std::max({3.0 * *mid, floor, steep});
}

LayeredMesh meshify_layer(const PeelStack& stack, int layer_id, std::uint8_t label,
                          std::optional<double> tau_disc) {
    if (layer_id < 1 || layer_id > stack.layers())
        throw Error(ErrorCode::InvalidArgument, "layer id out of range");
    const int l = layer_id - 1;
    const double tau = tau_disc ? *tau_disc : default_tau_disc(stack, layer_id);
    const int w = stack.width();
    const int h = stack.height();
    const PinholeCamera& cam = stack.camera();

    LayeredMesh out;
    std::vector<int> index(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), -1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!stack.valid(l, x, y) || stack.seg(l, x, y) != label) continue;
            const Vec3 p = unproject(cam, Vec2(x, y), stack.depth(l, x, y));
            index[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)] =
                static_cast<int>(out.add_vertex(p, layer_id, PixelRef{layer_id, x, y}));
            out.mesh.normals.push_back(
                cam.direction_to_world(stack.normal(l, x, y).cast<double>()).normalized());
        }
    }

    const bool entering = (layer_id % 2) == 1;
    auto emit = [&](int p, int q, int r) {
        if (entering) out.mesh.faces.push_back({p, r, q});
        else out.mesh.faces.push_back({p, q, r});
    };

    struct Corner {
        int vertex;
        double depth;
    };
    auto gap_ok = [&](const Corner& u, const Corner& v) { return std::abs(u.depth - v.depth) <= tau; };
    auto tri_ok = [&](const Corner& u, const Corner& v, const Corner& s) {
        return u.vertex >= 0 && v.vertex >= 0 && s.vertex >= 0 && gap_ok(u, v) && gap_ok(v, s) &&
               gap_ok(u, s);
    };
    auto length = [&](const Corner& u, const Corner& v) {
        return (out.mesh.vertices[static_cast<std::size_t>(u.vertex)] -
                out.mesh.vertices[static_cast<std::size_t>(v.vertex)]).norm();
    };

    for (int y = 0; y + 1 < h; ++y) {
        for (int x = 0; x + 1 < w; ++x) {
            auto corner = [&](int cx, int cy) {
                const int v = index[static_cast<std::size_t>(cy) * static_cast<std::size_t>(w) + static_cast<std::size_t>(cx)];
                return Corner{v, v >= 0 ? static_cast<double>(stack.depth(l, cx, cy)) : 0.0};
            };
            // Cyclic order a b d c winds away from the camera.
            const Corner a = corner(x, y);
            const Corner b = corner(x + 1, y);
            const Corner c = corner(x, y + 1);
            const Corner d = corner(x + 1, y + 1);
            const int valid = (a.vertex >= 0) + (b.vertex >= 0) + (c.vertex >= 0) + (d.vertex >= 0);
            if (valid < 3) continue;

            if (valid == 3) {
                if (a.vertex < 0 && tri_ok(b, d, c)) emit(b.vertex, d.vertex, c.vertex);
                else if (b.vertex < 0 && tri_ok(a, d, c)) emit(a.vertex, d.vertex, c.vertex);
                else if (c.vertex < 0 && tri_ok(a, b, d)) emit(a.vertex, b.vertex, d.vertex);
                else if (d.vertex < 0 && tri_ok(a, b, c)) emit(a.vertex, b.vertex, c.vertex);
                continue;
            }

            // Split along the shorter 3D diagonal; ties go to a-d.
            const bool split_ad = length(a, d) <= length(b, c);
            struct Tri {
                Corner p, q, r;
            };
            const Tri ad1{a, b, d}, ad2{a, d, c}, bc1{a, b, c}, bc2{b, d, c};
            const Tri pref1 = split_ad ? ad1 : bc1;
            const Tri pref2 = split_ad ? ad2 : bc2;
            const Tri alt1 = split_ad ? bc1 : ad1;
            const Tri alt2 = split_ad ? bc2 : ad2;
            auto ok = [&](const Tri& t) { return tri_ok(t.p, t.q, t.r); };
            auto put = [&](const Tri& t) { emit(t.p.vertex, t.q.vertex, t.r.vertex); };
            if (ok(pref1) && ok(pref2)) {
                put(pref1);
                put(pref2);
            } else if (ok(alt1) && ok(alt2)) {
                put(alt1);
                put(alt2);
            } else {
                for (const Tri* t : {&pref1, &pref2, &alt1, &alt2}) {
                    if (ok(*t)) {
                        put(*t);
                        break;
                    }
                }
            }
        }
    }
    out.mesh.face_labels.assign(out.mesh.faces.size(), label);
    return out;
}

namespace {

struct CellKey {
    std::int64_t x, y, z;
    bool operator==(const CellKey&) const = default;
};

struct CellHash {
    std::size_t operator()(const CellKey& k) const {
        std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull;
        h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
        h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

/// Incremental welding index: vertices within eps of an earlier survivor map onto it.
class WeldIndex {
public:
    explicit WeldIndex(double eps) : eps_(eps) {}

    /// Returns the survivor index for p, or -1 when p starts a new vertex.
    int find(const Vec3& p, const std::vector<Vec3>& survivors) const {
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        const CellKey c = cell(p);
        const int reach = eps_ > 0.0 ? 1 : 0;
        for (int dz = -reach; dz <= reach; ++dz)
            for (int dy = -reach; dy <= reach; ++dy)
                for (int dx = -reach; dx <= reach; ++dx) {
                    auto it = grid_.find({c.x + dx, c.y + dy, c.z + dz});
                    if (it == grid_.end()) continue;
                    for (int s : it->second) {
                        const double d2 = (survivors[static_cast<std::size_t>(s)] - p).squaredNorm();
                        if (d2 <= eps_ * eps_ && (d2 < best_d2 || (d2 == best_d2 && s < best))) {
                            best = s;
                            best_d2 = d2;
                        }
                    }
                }
        return best;
    }

    void insert(const Vec3& p, int index) { grid_[cell(p)].push_back(index); }

private:
    CellKey cell(const Vec3& p) const {
        if (eps_ <= 0.0) {
            // Exact-duplicate mode: hash the coordinates themselves.
            auto bits = [](double v) {
                std::int64_t b;
                v = v == 0.0 ? 0.0 : v;
                std::memcpy(&b, &v, sizeof b);
                return b;
            };
            return {bits(p.x()), bits(p.y()), bits(p.z())};
        }
        return {static_cast<std::int64_t>(std::floor(p.x() / eps_)),
                static_cast<std::int64_t>(std::floor(p.y() / eps_)),
                static_cast<std::int64_t>(std::floor(p.z() / eps_))};
    }

    double eps_;
    std::unordered_map<CellKey, std::vector<int>, CellHash> grid_;
};

}  // namespace

LayeredMesh merge_layers(std::span<const LayeredMesh> parts, double eps_weld) {
    LayeredMesh out;
    WeldIndex index(eps_weld);
    bool all_normals = true;
    bool all_labels = true;
    for (const auto& part : parts) {
        all_normals = all_normals && part.mesh.normals.size() == part.mesh.vertices.size();
        all_labels = all_labels && part.mesh.face_labels.size() == part.mesh.faces.size();
    }
    for (const auto& part : parts) {
        std::vector<int> remap(part.mesh.vertices.size());
        for (std::size_t i = 0; i < part.mesh.vertices.size(); ++i) {
            const Vec3& p = part.mesh.vertices[i];
            int s = index.find(p, out.mesh.vertices);
            if (s < 0) {
                s = static_cast<int>(out.add_vertex(
                    p, i < part.vertex_layer.size() ? part.vertex_layer[i] : kFillLayer,
                    i < part.vertex_source.size() ? part.vertex_source[i] : std::nullopt));
                if (all_normals) out.mesh.normals.push_back(part.mesh.normals[i]);
                index.insert(p, s);
            }
            remap[i] = s;
        }
        for (std::size_t f = 0; f < part.mesh.faces.size(); ++f) {
            const Face& src = part.mesh.faces[f];
            const Face face{remap[static_cast<std::size_t>(src[0])], remap[static_cast<std::size_t>(src[1])],
                            remap[static_cast<std::size_t>(src[2])]};
            if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) continue;
            out.mesh.faces.push_back(face);
            if (all_labels) out.mesh.face_labels.push_back(part.mesh.face_labels[f]);
        }
    }
    return out;
}

namespace {

class Zipper {
public:
    Zipper(LayeredMesh& mesh, double max_bridge) : mesh_(mesh), max_bridge_(max_bridge) {
        for (const Face& f : mesh_.mesh.faces) register_face(f);
    }

    std::size_t faces_added() const { return added_; }

    /// Zips facing runs of two boundary loops. Returns true when any triangle
    /// was added. Triangle winding is left to a later orientation pass.
    bool zip_loops(const std::vector<int>& loop_a, const std::vector<int>& loop_b) {
        const std::vector<int>& A = loop_a;
        std::vector<int> B = loop_b;
        const int n = static_cast<int>(A.size());
        const int m = static_cast<int>(B.size());
        if (n < 2 || m < 2) return false;

        Matches ma = match(A, B);
        // Loops of separately meshed patches need not be oriented
        // consistently, so walk B in whichever sense A's matches advance.
        long net = 0;
        for (int i = 0; i < n; ++i) {
            const auto i0 = static_cast<std::size_t>(i);
            const auto i1 = static_cast<std::size_t>((i + 1) % n);
            if (ma.paired[i0] && ma.paired[i1]) net += wrapped_step(ma.near[i0], ma.near[i1], m);
        }
        if (net < 0) {
            std::reverse(B.begin(), B.end());
            ma = match(A, B);
        }
        const Matches mb = match(B, A);

        auto at = [](const std::vector<char>& v, int i) { return v[static_cast<std::size_t>(i)] != 0; };
        auto a_step_open = [&](int i) { return is_boundary(A[static_cast<std::size_t>(i % n)], A[static_cast<std::size_t>((i + 1) % n)]); };
        auto b_step_open = [&](int j) { return is_boundary(B[static_cast<std::size_t>(j % m)], B[static_cast<std::size_t>((j + 1) % m)]); };

        int cut = -1;
        for (int i = 0; i < n && cut < 0; ++i)
            if (!at(ma.paired, i) || !a_step_open(i)) cut = i;
        if (cut < 0) {
            bool ring = true;
            for (int j = 0; j < m && ring; ++j) ring = at(mb.paired, j) && b_step_open(j);
            if (ring) {
                const int i0 = static_cast<int>(std::min_element(ma.dist.begin(), ma.dist.end()) - ma.dist.begin());
                const int j0 = ma.near[static_cast<std::size_t>(i0)];
                std::vector<int> pa, pb;
                for (int k = 0; k <= n; ++k) pa.push_back(A[static_cast<std::size_t>((i0 + k) % n)]);
                for (int k = 0; k <= m; ++k) pb.push_back(B[static_cast<std::size_t>((j0 + k) % m)]);
                return zip_paths(pa, pb);
            }
            cut = static_cast<int>(std::max_element(ma.dist.begin(), ma.dist.end()) - ma.dist.begin());
        }

        // Runs of paired A vertices whose matched B stretch is paired and open too.
        bool any = false;
        int k = 0;
        while (k < n) {
            const int s = (cut + 1 + k) % n;
            if (!at(ma.paired, s)) {
                ++k;
                continue;
            }
            const int js = ma.near[static_cast<std::size_t>(s)];
            long jpos = 0;  // B offset from js, may dip below the furthest point reached
            long jmax = 0;
            int len = 0;
            while (k + len + 1 < n) {
                const int cur = (s + len) % n;
                const int nxt = (cur + 1) % n;
                if (!a_step_open(cur) || !at(ma.paired, nxt)) break;
                jpos += wrapped_step(ma.near[static_cast<std::size_t>(cur)], ma.near[static_cast<std::size_t>(nxt)], m);
                bool ok = true;
                for (long t = jmax; t < jpos && ok; ++t) {
                    const int j = static_cast<int>((js + t) % m);
                    ok = t + 1 < m && b_step_open(j) && at(mb.paired, (j + 1) % m);
                }
                if (!ok) break;
                jmax = std::max(jmax, jpos);
                ++len;
            }
            if (len >= 1) {
                std::vector<int> pa, pb;
                for (int t = 0; t <= len; ++t) pa.push_back(A[static_cast<std::size_t>((s + t) % n)]);
                for (long t = 0; t <= jmax; ++t) pb.push_back(B[static_cast<std::size_t>((js + t) % m)]);
                any = zip_paths(pa, pb) || any;
            }
            k += len + 1;
        }
        return any;
    }

private:
    struct Matches {
        std::vector<int> near;     // nearest vertex index in the other loop
        std::vector<double> dist;  // squared distance to it
        std::vector<char> paired;
    };

    static int wrapped_step(int from, int to, int m) {
        int step = ((to - from) % m + m) % m;
        return step > m / 2 ? step - m : step;
    }

    // A vertex pairs with its nearest vertex on the other loop when that is
    // within max_bridge and the partner has no much closer counterpart. This
    // keeps a rim from being bridged to an edge that already has a close
    // partner on the near side.
    Matches match(const std::vector<int>& from, const std::vector<int>& to) const {
        const KdTree3 tree_to(positions(to));
        const KdTree3 tree_from(positions(from));
        const double slack = 4.0 * median_step(from, to);
        Matches out;
        out.near.resize(from.size());
        out.dist.resize(from.size());
        out.paired.resize(from.size());
        for (std::size_t i = 0; i < from.size(); ++i) {
            double d2 = 0.0;
            const int j = tree_to.nearest(pos(from[i]), &d2);
            double back2 = 0.0;
            tree_from.nearest(pos(to[static_cast<std::size_t>(j)]), &back2);
            out.near[i] = j;
            out.dist[i] = d2;
            out.paired[i] = d2 <= max_bridge_ * max_bridge_ && std::sqrt(d2) <= 3.0 * std::sqrt(back2) + slack;
        }
        return out;
    }

    double median_step(const std::vector<int>& a, const std::vector<int>& b) const {
        std::vector<double> steps;
        for (const auto* loop : {&a, &b})
            for (std::size_t i = 0; i < loop->size(); ++i)
                steps.push_back((pos((*loop)[i]) - pos((*loop)[(i + 1) % loop->size()])).norm());
        const auto mid = steps.begin() + static_cast<std::ptrdiff_t>(steps.size() / 2);
        std::nth_element(steps.begin(), mid, steps.end());
        return *mid;
    }

    const Vec3& pos(int v) const { return mesh_.mesh.vertices[static_cast<std::size_t>(v)]; }

    std::vector<Vec3> positions(const std::vector<int>& ids) const {
        std::vector<Vec3> out;
        out.reserve(ids.size());
        for (int v : ids) out.push_back(pos(v));
        return out;
    }

    void register_face(const Face& f) {
        for (int k = 0; k < 3; ++k) {
            ++edge_count_[edge_key(f[k], f[(k + 1) % 3])];
        }
    }

    bool is_boundary(int a, int b) const {
        auto it = edge_count_.find(edge_key(a, b));
        return it != edge_count_.end() && it->second == 1;
    }

    bool try_add(int p, int q, int r) {
        if (p == q || q == r || p == r) return false;
        const int v[3] = {p, q, r};
        for (int k = 0; k < 3; ++k) {
            const int a = v[k];
            const int b = v[(k + 1) % 3];
            auto it = edge_count_.find(edge_key(a, b));
            if (it != edge_count_.end() && it->second >= 2) return false;
        }
        const Face f{p, q, r};
        mesh_.mesh.faces.push_back(f);
        register_face(f);
        ++added_;
        return true;
    }

    // Strip between paths walked in the same sense. The sequence of A/B
    // advances minimises the summed length of the rungs (a_i, b_j) it visits;
    // a purely local shorter-diagonal choice derails on silhouette loops whose
    // vertices zigzag in depth.
    bool zip_paths(const std::vector<int>& pa, const std::vector<int>& pb) {
        const std::size_t p = pa.size() - 1;
        const std::size_t q = pb.size() - 1;
        const std::size_t cols = q + 1;
        std::vector<double> cost((p + 1) * cols, std::numeric_limits<double>::infinity());
        std::vector<char> from_a((p + 1) * cols, 0);
        auto rung = [&](std::size_t i, std::size_t j) { return (pos(pa[i]) - pos(pb[j])).norm(); };
        cost[0] = rung(0, 0);
        for (std::size_t i = 0; i <= p; ++i) {
            for (std::size_t j = 0; j <= q; ++j) {
                if (i == 0 && j == 0) continue;
                const double via_a = i > 0 ? cost[(i - 1) * cols + j] : std::numeric_limits<double>::infinity();
                const double via_b = j > 0 ? cost[i * cols + j - 1] : std::numeric_limits<double>::infinity();
                const bool a_wins = via_a <= via_b;
                cost[i * cols + j] = (a_wins ? via_a : via_b) + rung(i, j);
                from_a[i * cols + j] = a_wins;
            }
        }
        std::vector<char> moves;
        moves.reserve(p + q);
        for (std::size_t i = p, j = q; i > 0 || j > 0;) {
            const bool a = from_a[i * cols + j];
            moves.push_back(a);
            if (a) --i;
            else --j;
        }
        bool any = false;
        std::size_t i = 0, j = 0;
        for (auto it = moves.rbegin(); it != moves.rend(); ++it) {
            if (*it) {
                any = try_add(pa[i], pa[i + 1], pb[j]) || any;
                ++i;
            } else {
                any = try_add(pa[i], pb[j + 1], pb[j]) || any;
                ++j;
            }
        }
        return any;
    }

    LayeredMesh& mesh_;
    double max_bridge_;
    std::unordered_map<std::uint64_t, int> edge_count_;
    std::size_t added_ = 0;
};

}  // namespace

LayeredMesh stitch_gaps(const LayeredMesh& mesh, double max_bridge, StitchReport* report) {
    LayeredMesh out = mesh;
    StitchReport rep;
    rep.boundary_edges_before = count_boundary_edges(out.mesh.faces);
    const std::uint8_t label = out.mesh.face_labels.empty() ? 0 : out.mesh.face_labels.front();

    auto loops = boundary_loops(out.mesh.faces);
    struct Box {
        Eigen::AlignedBox3d box;
    };
    std::vector<Eigen::AlignedBox3d> boxes;
    std::vector<KdTree3> trees;
    for (const auto& loop : loops) {
        Eigen::AlignedBox3d b;
        std::vector<Vec3> pts;
        for (int v : loop) {
            b.extend(out.mesh.vertices[static_cast<std::size_t>(v)]);
            pts.push_back(out.mesh.vertices[static_cast<std::size_t>(v)]);
        }
        boxes.push_back(b);
        trees.emplace_back(std::move(pts));
    }

    struct Candidate {
        double dist;
        int a, b;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < loops.size(); ++i) {
        for (std::size_t j = i + 1; j < loops.size(); ++j) {
            if (std::sqrt(boxes[i].squaredExteriorDistance(boxes[j].min())) > max_bridge + boxes[j].diagonal().norm())
                continue;
            double best = std::numeric_limits<double>::infinity();
            for (int v : loops[i]) {
                double d2 = 0.0;
                trees[j].nearest(out.mesh.vertices[static_cast<std::size_t>(v)], &d2);
                best = std::min(best, d2);
            }
            best = std::sqrt(best);
            if (best <= max_bridge) candidates.push_back({best, static_cast<int>(i), static_cast<int>(j)});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
        return x.dist < y.dist || (x.dist == y.dist && (x.a < y.a || (x.a == y.a && x.b < y.b)));
    });

    Zipper zipper(out, max_bridge);
    for (const auto& c : candidates) {
        if (zipper.zip_loops(loops[static_cast<std::size_t>(c.a)], loops[static_cast<std::size_t>(c.b)]))
            ++rep.loop_pairs;
    }
    rep.faces_added = zipper.faces_added();
    if (rep.faces_added > 0) orient_consistently(out.mesh);
    if (!out.mesh.face_labels.empty()) out.mesh.face_labels.resize(out.mesh.faces.size(), label);
    rep.boundary_edges_after = count_boundary_edges(out.mesh.faces);
    if (report) *report = rep;
    return out;
}

LayeredMesh merge_fill_mesh(const LayeredMesh& mesh, const TriMesh& fill, double eps_weld) {
    LayeredMesh part;
    part.mesh.vertices = fill.vertices;
    part.mesh.faces = fill.faces;
    if (!mesh.mesh.face_labels.empty())
        part.mesh.face_labels.assign(fill.faces.size(), mesh.mesh.face_labels.front());
    part.vertex_layer.assign(fill.vertices.size(), kFillLayer);
    part.vertex_source.assign(fill.vertices.size(), std::nullopt);
    LayeredMesh base = mesh;
    if (base.mesh.normals.size() == base.mesh.vertices.size()) base.mesh.normals.clear();
    const LayeredMesh parts[2] = {base, part};
    return merge_layers(parts, eps_weld);
}

double default_max_bridge(const PeelStack& stack) {
    const PinholeCamera& cam = stack.camera();
    const double footprint = stack.mean_pixel_footprint();
    double widest = 0.0;
    for (int l = 0; l + 1 < stack.layers(); ++l) {
        for (int y = 0; y < stack.height(); ++y) {
            for (int x = 0; x < stack.width(); ++x) {
                if (!stack.valid(l, x, y) || !stack.valid(l + 1, x, y)) continue;
                bool edge = false;
                for (const auto& [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                    const int nx = x + dx, ny = y + dy;
                    edge = edge || nx < 0 || ny < 0 || nx >= stack.width() || ny >= stack.height() ||
                           !stack.valid(l, nx, ny);
                }
                if (!edge) continue;
                const Vec3 ray = Vec3((x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0);
                const Vec3 dir = ray.normalized();
                const bool grazing =
                    std::abs(stack.normal(l, x, y).cast<double>().dot(dir)) < 0.35 &&
                    std::abs(stack.normal(l + 1, x, y).cast<double>().dot(dir)) < 0.35;
                if (!grazing) continue;
                widest = std::max(widest, (stack.depth(l + 1, x, y) - stack.depth(l, x, y)) * ray.norm());
            }
        }
    }
    return std::max(4.0 * footprint, 1.25 * widest + 2.0 * footprint);
}

ReconstructResult reconstruct_garment(const PeelStack& stack, std::uint8_t label,
                                      const ReconstructOptions& options) {
    if (const auto report = validate_stack(stack); !report.empty())
        throw Error(ErrorCode::InvalidStack, std::to_string(report.size()) + " stack violation(s), first: " +
                                                 std::string(to_string(report.front().rule)));
    ReconstructResult result;
    const int layers = stack.layers();
    std::vector<LayeredMesh> parts(static_cast<std::size_t>(layers));
    result.tau_disc.resize(static_cast<std::size_t>(layers));
    parallel_for(static_cast<std::size_t>(layers), options.threads, [&](std::size_t i) {
        const int layer_id = static_cast<int>(i) + 1;
        const double tau = options.tau_disc ? *options.tau_disc : default_tau_disc(stack, layer_id);
        result.tau_disc[i] = tau;
        parts[i] = meshify_layer(stack, layer_id, label, tau);
    });

    Eigen::AlignedBox3d box;
    for (const auto& p : parts)
        for (const Vec3& v : p.mesh.vertices) box.extend(v);
    const double diameter = box.isEmpty() ? 0.0 : box.diagonal().norm();
    result.eps_weld = options.eps_weld ? *options.eps_weld : 1e-5 * diameter;
    result.max_bridge = options.max_bridge ? *options.max_bridge : default_max_bridge(stack);

    result.merged = merge_layers(parts, result.eps_weld);
    result.mesh = options.stitch ? stitch_gaps(result.merged, result.max_bridge, &result.stitch)
                                 : result.merged;
    compact_vertices(result.mesh);
    return result;
}

}  // namespace peel
