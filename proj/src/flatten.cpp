#include "peel/flatten.hpp"

#include "peel/error.hpp"
#include "peel/parallel.hpp"

#include <Eigen/Geometry>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <unordered_map>

namespace peel {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Angle defects below this are ordinary surface curvature, not fold-over cones.
constexpr double kMinConeDefect = 0.05;

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
};

int corner_of(const Face& f, int v) {
    for (int k = 0; k < 3; ++k)
        if (f[k] == v) return k;
    return -1;
}

// Triangle corners in a 2D frame of its own plane, counter-clockwise w.r.t. the face winding.
std::array<Vec2, 3> local_frame(const Vec3& p0, const Vec3& p1, const Vec3& p2) {
    const Vec3 e1 = p1 - p0;
    const Vec3 e2 = p2 - p0;
    const double l1 = e1.norm();
    const Vec3 x = e1 / l1;
    const Vec3 n = e1.cross(e2).normalized();
    const Vec3 y = n.cross(x);
    return {Vec2(0.0, 0.0), Vec2(l1, 0.0), Vec2(e2.dot(x), e2.dot(y))};
}

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double corner_angle(const Vec2& a, const Vec2& b, const Vec2& c) {
    const Vec2 u = b - a;
    const Vec2 v = c - a;
    return std::atan2(std::abs(cross2(u, v)), u.dot(v));
}

double corner_angle3(const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 u = b - a;
    const Vec3 v = c - a;
    return std::atan2(u.cross(v).norm(), u.dot(v));
}

double percentile90(std::vector<double> values) {
    if (values.empty()) return 1.0;
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(values.size())));
    return values[std::max<std::size_t>(rank, 1) - 1];
}

std::unordered_map<std::uint64_t, std::vector<int>> edge_face_map(const std::vector<Face>& faces) {
    std::unordered_map<std::uint64_t, std::vector<int>> out;
    for (std::size_t f = 0; f < faces.size(); ++f)
        for (int k = 0; k < 3; ++k) out[edge_key(faces[f][k], faces[f][(k + 1) % 3])].push_back(static_cast<int>(f));
    return out;
}

}  // namespace

DistortionStats distortion_stats(const TriMesh& mesh, const std::vector<Vec2>& uv) {
    DistortionStats s;
    const std::size_t nf = mesh.faces.size();
    s.qc_ratio.assign(nf, 1.0);
    s.area_scale.assign(nf, 0.0);
    s.angle_error.assign(nf, 0.0);
    double area3 = 0.0;
    double area_uv = 0.0;
    std::vector<double> ratio(nf, 0.0);
    for (std::size_t f = 0; f < nf; ++f) {
        const Face& t = mesh.faces[f];
        const Vec3& p0 = mesh.vertices[static_cast<std::size_t>(t[0])];
        const Vec3& p1 = mesh.vertices[static_cast<std::size_t>(t[1])];
        const Vec3& p2 = mesh.vertices[static_cast<std::size_t>(t[2])];
        const Vec2& q0 = uv[static_cast<std::size_t>(t[0])];
        const Vec2& q1 = uv[static_cast<std::size_t>(t[1])];
        const Vec2& q2 = uv[static_cast<std::size_t>(t[2])];
        const double a3 = 0.5 * (p1 - p0).cross(p2 - p0).norm();
        const double auv = 0.5 * cross2(q1 - q0, q2 - q0);
        area3 += a3;
        area_uv += auv;
        if (!(a3 > 0.0)) continue;
        const auto local = local_frame(p0, p1, p2);
        Eigen::Matrix2d P;
        P.col(0) = local[1] - local[0];
        P.col(1) = local[2] - local[0];
        Eigen::Matrix2d Q;
        Q.col(0) = q1 - q0;
        Q.col(1) = q2 - q0;
        const Eigen::Matrix2d J = Q * P.inverse();
        const Eigen::JacobiSVD<Eigen::Matrix2d> svd(J);
        const Vec2 sv = svd.singularValues();
        s.qc_ratio[f] = sv[1] > 0.0 ? sv[0] / sv[1] : std::numeric_limits<double>::infinity();
        ratio[f] = auv / a3;
        double err = 0.0;
        err = std::max(err, std::abs(corner_angle(q0, q1, q2) - corner_angle3(p0, p1, p2)));
        err = std::max(err, std::abs(corner_angle(q1, q2, q0) - corner_angle3(p1, p2, p0)));
        err = std::max(err, std::abs(corner_angle(q2, q0, q1) - corner_angle3(p2, p0, p1)));
        s.angle_error[f] = err;
    }
    const double global = area3 > 0.0 ? area_uv / area3 : 0.0;
    for (std::size_t f = 0; f < nf; ++f) s.area_scale[f] = global != 0.0 ? ratio[f] / global : 0.0;
    s.qc_p90 = percentile90(s.qc_ratio);
    s.qc_max = nf ? *std::max_element(s.qc_ratio.begin(), s.qc_ratio.end()) : 1.0;
    s.angle_error_max = nf ? *std::max_element(s.angle_error.begin(), s.angle_error.end()) : 0.0;
    return s;
}

std::vector<SurfacePiece> split_surface(const TriMesh& mesh, const std::unordered_set<std::uint64_t>& cut_edges) {
    const auto& faces = mesh.faces;
    const std::size_t nf = faces.size();
    UnionFind corners(3 * nf);
    UnionFind face_sets(nf);
    const auto edges = edge_face_map(faces);
    for (const auto& [key, around] : edges) {
        if (around.size() != 2 || cut_edges.count(key)) continue;
        const int f1 = around[0];
        const int f2 = around[1];
        const int a = static_cast<int>(key >> 32);
        const int b = static_cast<int>(key & 0xffffffffu);
        for (int v : {a, b})
            corners.unite(3 * f1 + corner_of(faces[static_cast<std::size_t>(f1)], v),
                          3 * f2 + corner_of(faces[static_cast<std::size_t>(f2)], v));
        face_sets.unite(f1, f2);
    }

    std::vector<SurfacePiece> pieces;
    std::unordered_map<int, std::size_t> piece_of_root;
    std::vector<std::unordered_map<int, int>> vertex_of_corner;
    const bool normals = mesh.normals.size() == mesh.vertices.size();
    const bool labels = mesh.face_labels.size() == nf;
    const bool colors = mesh.face_colors.size() == nf;
    for (std::size_t f = 0; f < nf; ++f) {
        const int root = face_sets.find(static_cast<int>(f));
        auto [it, inserted] = piece_of_root.emplace(root, pieces.size());
        if (inserted) {
            pieces.emplace_back();
            vertex_of_corner.emplace_back();
        }
        SurfacePiece& piece = pieces[it->second];
        auto& index = vertex_of_corner[it->second];
        Face out{};
        for (int k = 0; k < 3; ++k) {
            const int c = corners.find(3 * static_cast<int>(f) + k);
            auto [vit, fresh] = index.emplace(c, static_cast<int>(piece.mesh.vertices.size()));
            if (fresh) {
                const auto v = static_cast<std::size_t>(faces[f][k]);
                piece.mesh.vertices.push_back(mesh.vertices[v]);
                if (normals) piece.mesh.normals.push_back(mesh.normals[v]);
                piece.vertex_origin.push_back(faces[f][k]);
            }
            out[k] = vit->second;
        }
        piece.mesh.faces.push_back(out);
        piece.face_origin.push_back(static_cast<int>(f));
        if (labels) piece.mesh.face_labels.push_back(mesh.face_labels[f]);
        if (colors) piece.mesh.face_colors.push_back(mesh.face_colors[f]);
    }
    return pieces;
}

bool is_disk(const std::vector<Face>& faces) {
    if (faces.empty()) return false;
    std::unordered_set<int> verts;
    std::unordered_set<std::uint64_t> edges;
    for (const Face& f : faces)
        for (int k = 0; k < 3; ++k) {
            verts.insert(f[k]);
            edges.insert(edge_key(f[k], f[(k + 1) % 3]));
        }
    const long long chi = static_cast<long long>(verts.size()) - static_cast<long long>(edges.size()) +
                          static_cast<long long>(faces.size());
    return chi == 1 && boundary_loops(faces).size() == 1;
}

DiskCut cut_to_disk(const TriMesh& mesh) {
    DiskCut out;
    if (is_disk(mesh.faces)) {
        out.piece.mesh = mesh;
        out.piece.vertex_origin.resize(mesh.vertices.size());
        std::iota(out.piece.vertex_origin.begin(), out.piece.vertex_origin.end(), 0);
        out.piece.face_origin.resize(mesh.faces.size());
        std::iota(out.piece.face_origin.begin(), out.piece.face_origin.end(), 0);
        return out;
    }
    if (mesh.faces.empty()) throw Error(ErrorCode::NonDiskTopology, "surface has no faces");

    const auto& faces = mesh.faces;
    const auto edges = edge_face_map(faces);

    // Breadth-first dual spanning tree.
    std::unordered_set<std::uint64_t> tree;
    std::vector<char> seen(faces.size(), 0);
    std::vector<int> queue{0};
    seen[0] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto f = static_cast<std::size_t>(queue[head]);
        for (int k = 0; k < 3; ++k) {
            const std::uint64_t key = edge_key(faces[f][k], faces[f][(k + 1) % 3]);
            const auto& around = edges.at(key);
            if (around.size() != 2) continue;
            const int g = around[0] == static_cast<int>(f) ? around[1] : around[0];
            if (seen[static_cast<std::size_t>(g)]) continue;
            seen[static_cast<std::size_t>(g)] = 1;
            tree.insert(key);
            queue.push_back(g);
        }
    }
    if (queue.size() != faces.size())
        throw Error(ErrorCode::NonDiskTopology, "surface is not edge-connected");

    // Primal edges not crossed by the tree; prune dangling branches.
    std::vector<std::uint64_t> graph;
    for (const auto& [key, around] : edges)
        if (!tree.count(key)) graph.push_back(key);
    std::sort(graph.begin(), graph.end());
    std::unordered_map<int, std::vector<int>> incident;
    for (std::size_t e = 0; e < graph.size(); ++e) {
        incident[static_cast<int>(graph[e] >> 32)].push_back(static_cast<int>(e));
        incident[static_cast<int>(graph[e] & 0xffffffffu)].push_back(static_cast<int>(e));
    }
    std::vector<char> alive(graph.size(), 1);
    std::unordered_map<int, int> degree;
    std::vector<int> leaves;
    for (const auto& [v, list] : incident) {
        degree[v] = static_cast<int>(list.size());
        if (list.size() == 1) leaves.push_back(v);
    }
    std::sort(leaves.begin(), leaves.end());
    while (!leaves.empty()) {
        const int v = leaves.back();
        leaves.pop_back();
        if (degree[v] != 1) continue;
        for (int e : incident[v]) {
            if (!alive[static_cast<std::size_t>(e)]) continue;
            alive[static_cast<std::size_t>(e)] = 0;
            const std::uint64_t key = graph[static_cast<std::size_t>(e)];
            const int a = static_cast<int>(key >> 32);
            const int other = a == v ? static_cast<int>(key & 0xffffffffu) : a;
            --degree[v];
            if (--degree[other] == 1) leaves.push_back(other);
            break;
        }
    }

    std::unordered_set<std::uint64_t> cuts;
    for (std::size_t e = 0; e < graph.size(); ++e)
        if (alive[e] && edges.at(graph[e]).size() == 2) cuts.insert(graph[e]);

    if (cuts.empty()) {
        // Closed sphere: open it along a two-edge path from the lowest vertex.
        std::vector<std::uint64_t> all;
        all.reserve(edges.size());
        for (const auto& [key, around] : edges) all.push_back(key);
        std::sort(all.begin(), all.end());
        auto lowest_neighbour = [&](int v, int exclude) {
            int best = -1;
            for (std::uint64_t key : all) {
                const int a = static_cast<int>(key >> 32);
                const int b = static_cast<int>(key & 0xffffffffu);
                const int other = a == v ? b : (b == v ? a : -1);
                if (other >= 0 && other != exclude && (best < 0 || other < best)) best = other;
            }
            return best;
        };
        const int v0 = static_cast<int>(all.front() >> 32);
        const int v1 = lowest_neighbour(v0, -1);
        const int v2 = lowest_neighbour(v1, v0);
        cuts.insert(edge_key(v0, v1));
        if (v2 >= 0) cuts.insert(edge_key(v1, v2));
    }

    auto pieces = split_surface(mesh, cuts);
    if (pieces.size() != 1 || !is_disk(pieces.front().mesh.faces))
        throw Error(ErrorCode::NonDiskTopology, "cutting did not produce a single disk");
    out.piece = std::move(pieces.front());
    std::vector<int> cut_verts;
    for (std::uint64_t key : cuts) {
        cut_verts.push_back(static_cast<int>(key >> 32));
        cut_verts.push_back(static_cast<int>(key & 0xffffffffu));
    }
    std::sort(cut_verts.begin(), cut_verts.end());
    cut_verts.erase(std::unique(cut_verts.begin(), cut_verts.end()), cut_verts.end());
    out.cut_vertices = std::move(cut_verts);
    return out;
}

namespace {

UVChart solve_lscm(const TriMesh& disk, const FlattenOptions& options, std::vector<int>& flipped) {
    if (!is_disk(disk.faces)) throw Error(ErrorCode::NonDiskTopology, "chart is not a topological disk");
    UVChart chart;
    chart.mesh = disk;
    orient_consistently(chart.mesh);
    const TriMesh& m = chart.mesh;
    const std::size_t n = m.vertices.size();

    // Farthest boundary pair, lowest indices on ties.
    std::vector<int> boundary;
    for (const auto& loop : boundary_loops(m.faces)) boundary.insert(boundary.end(), loop.begin(), loop.end());
    std::sort(boundary.begin(), boundary.end());
    boundary.erase(std::unique(boundary.begin(), boundary.end()), boundary.end());
    int pin_a = -1;
    int pin_b = -1;
    double far = -1.0;
    for (std::size_t i = 0; i < boundary.size(); ++i)
        for (std::size_t j = i + 1; j < boundary.size(); ++j) {
            const double d = (m.vertices[static_cast<std::size_t>(boundary[i])] -
                              m.vertices[static_cast<std::size_t>(boundary[j])]).squaredNorm();
            if (d > far) {
                far = d;
                pin_a = boundary[i];
                pin_b = boundary[j];
            }
        }
    if (pin_a < 0 || !(far > 0.0)) throw Error(ErrorCode::SolverSingular, "no distinct boundary pair to pin");
    chart.pinned = {pin_a, pin_b};

    std::vector<int> var(n, -1);
    int free_count = 0;
    for (std::size_t v = 0; v < n; ++v)
        if (static_cast<int>(v) != pin_a && static_cast<int>(v) != pin_b) var[v] = free_count++;
    std::vector<Vec2> pinned_uv(n, Vec2::Zero());
    pinned_uv[static_cast<std::size_t>(pin_b)] = Vec2(1.0, 0.0);

    chart.uv.assign(n, Vec2::Zero());
    chart.uv[static_cast<std::size_t>(pin_b)] = Vec2(1.0, 0.0);
    if (free_count > 0) {
        // Cauchy-Riemann residuals per triangle, scaled by sqrt(area):
        // (u_x - v_y, u_y + v_x). Columns [U; V] over free vertices.
        const int cols = 2 * free_count;
        std::vector<Eigen::Triplet<double>> triplets;
        std::vector<double> rhs_rows;
        int row = 0;
        for (const Face& t : m.faces) {
            const Vec3& p0 = m.vertices[static_cast<std::size_t>(t[0])];
            const Vec3& p1 = m.vertices[static_cast<std::size_t>(t[1])];
            const Vec3& p2 = m.vertices[static_cast<std::size_t>(t[2])];
            const double area = 0.5 * (p1 - p0).cross(p2 - p0).norm();
            if (!(area > 0.0)) continue;
            const auto q = local_frame(p0, p1, p2);
            const double s = std::sqrt(area);
            double b1 = 0.0;
            double b2 = 0.0;
            for (int k = 0; k < 3; ++k) {
                const Vec2 e = q[static_cast<std::size_t>((k + 2) % 3)] - q[static_cast<std::size_t>((k + 1) % 3)];
                const Vec2 g = Vec2(-e.y(), e.x()) / (2.0 * area);
                const auto v = static_cast<std::size_t>(t[k]);
                const double cu1 = s * g.x(), cv1 = -s * g.y();
                const double cu2 = s * g.y(), cv2 = s * g.x();
                if (var[v] >= 0) {
                    triplets.emplace_back(row, var[v], cu1);
                    triplets.emplace_back(row, free_count + var[v], cv1);
                    triplets.emplace_back(row + 1, var[v], cu2);
                    triplets.emplace_back(row + 1, free_count + var[v], cv2);
                } else {
                    b1 -= cu1 * pinned_uv[v].x() + cv1 * pinned_uv[v].y();
                    b2 -= cu2 * pinned_uv[v].x() + cv2 * pinned_uv[v].y();
                }
            }
            rhs_rows.push_back(b1);
            rhs_rows.push_back(b2);
            row += 2;
        }
        Eigen::SparseMatrix<double> A(row, cols);
        A.setFromTriplets(triplets.begin(), triplets.end());
        const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(rhs_rows.data(), row);
        const Eigen::SparseMatrix<double> normal = (A.transpose() * A).pruned();
        const Eigen::VectorXd rhs = A.transpose() * b;
        const double rhs_norm = rhs.norm();
        if (!(rhs_norm > 0.0)) throw Error(ErrorCode::SolverSingular, "pins produce no constraint");
        // Residual accumulated in extended precision so that its own rounding
        // does not dominate on badly scaled charts.
        auto residual_vector = [&](const Eigen::VectorXd& x) {
            std::vector<long double> acc(static_cast<std::size_t>(cols), 0.0L);
            for (int k = 0; k < normal.outerSize(); ++k)
                for (Eigen::SparseMatrix<double>::InnerIterator it(normal, k); it; ++it)
                    acc[static_cast<std::size_t>(it.row())] +=
                        static_cast<long double>(it.value()) * static_cast<long double>(x[it.col()]);
            Eigen::VectorXd r(cols);
            for (int i = 0; i < cols; ++i)
                r[i] = static_cast<double>(acc[static_cast<std::size_t>(i)] - static_cast<long double>(rhs[i]));
            return r;
        };
        auto residual = [&](const Eigen::VectorXd& x) { return residual_vector(x).norm() / rhs_norm; };

        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
        cg.setTolerance(options.cg_tolerance);
        cg.setMaxIterations(std::max(2000, 4 * cols));
        cg.compute(normal);
        Eigen::VectorXd x = cg.solve(rhs);
        chart.iterations = static_cast<int>(cg.iterations());
        chart.residual = x.allFinite() ? residual(x) : std::numeric_limits<double>::infinity();
        if (!(chart.residual <= options.max_residual)) {
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> direct(normal);
            if (direct.info() != Eigen::Success) throw Error(ErrorCode::SolverSingular, "factorization failed");
            x = direct.solve(rhs);
            if (direct.info() != Eigen::Success || !x.allFinite())
                throw Error(ErrorCode::SolverSingular, "direct solve failed");
            chart.direct_solve = true;
            chart.residual = residual(x);
            // Iterative refinement against the factorization's rounding error.
            for (int pass = 0; pass < 4 && chart.residual > options.max_residual; ++pass) {
                const Eigen::VectorXd refined = x - direct.solve(residual_vector(x));
                const double r = residual(refined);
                if (!(r < chart.residual)) break;
                x = refined;
                chart.residual = r;
            }
        }
        for (std::size_t v = 0; v < n; ++v)
            if (var[v] >= 0) chart.uv[v] = Vec2(x[var[v]], x[free_count + var[v]]);
    }

    flipped.clear();
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
        const Face& t = m.faces[f];
        const Vec2& a = chart.uv[static_cast<std::size_t>(t[0])];
        const Vec2& b = chart.uv[static_cast<std::size_t>(t[1])];
        const Vec2& c = chart.uv[static_cast<std::size_t>(t[2])];
        if (!(cross2(b - a, c - a) > 0.0)) flipped.push_back(static_cast<int>(f));
    }
    chart.stats = distortion_stats(m, chart.uv);
    return chart;
}

// Interior vertex of a flipped triangle with the largest angle defect
// |2 pi - sum of corner angles|, or the worst interior vertex of the chart.
int worst_cone(const TriMesh& mesh, const std::vector<int>& flipped) {
    std::vector<double> angle(mesh.vertices.size(), 0.0);
    for (const Face& t : mesh.faces)
        for (int k = 0; k < 3; ++k)
            angle[static_cast<std::size_t>(t[k])] += corner_angle3(mesh.vertices[static_cast<std::size_t>(t[k])],
                                                                   mesh.vertices[static_cast<std::size_t>(t[(k + 1) % 3])],
                                                                   mesh.vertices[static_cast<std::size_t>(t[(k + 2) % 3])]);
    std::vector<char> boundary(mesh.vertices.size(), 0);
    for (const auto& loop : boundary_loops(mesh.faces))
        for (int v : loop) boundary[static_cast<std::size_t>(v)] = 1;
    auto defect = [&](int v) { return std::abs(2.0 * kPi - angle[static_cast<std::size_t>(v)]); };
    int best = -1;
    for (int f : flipped)
        for (int v : mesh.faces[static_cast<std::size_t>(f)])
            if (!boundary[static_cast<std::size_t>(v)] && (best < 0 || defect(v) > defect(best) ||
                                                           (defect(v) == defect(best) && v < best)))
                best = v;
    if (best >= 0 && defect(best) > kMinConeDefect) return best;
    best = -1;
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        if (!boundary[v] && (best < 0 || defect(static_cast<int>(v)) > defect(best))) best = static_cast<int>(v);
    return best >= 0 && defect(best) > kMinConeDefect ? best : -1;
}

// Shortest edge path (3D length) from `source` to the nearest boundary vertex.
std::vector<std::uint64_t> path_to_boundary(const TriMesh& mesh, int source) {
    const std::size_t n = mesh.vertices.size();
    std::vector<std::vector<int>> adj(n);
    for (const Face& t : mesh.faces)
        for (int k = 0; k < 3; ++k) {
            adj[static_cast<std::size_t>(t[k])].push_back(t[(k + 1) % 3]);
            adj[static_cast<std::size_t>(t[(k + 1) % 3])].push_back(t[k]);
        }
    std::vector<char> boundary(n, 0);
    for (const auto& loop : boundary_loops(mesh.faces))
        for (int v : loop) boundary[static_cast<std::size_t>(v)] = 1;
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<int> prev(n, -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[static_cast<std::size_t>(source)] = 0.0;
    heap.emplace(0.0, source);
    int target = -1;
    while (!heap.empty()) {
        const auto [d, v] = heap.top();
        heap.pop();
        if (d > dist[static_cast<std::size_t>(v)]) continue;
        if (boundary[static_cast<std::size_t>(v)]) {
            target = v;
            break;
        }
        for (int w : adj[static_cast<std::size_t>(v)]) {
            const double nd = d + (mesh.vertices[static_cast<std::size_t>(v)] - mesh.vertices[static_cast<std::size_t>(w)]).norm();
            if (nd < dist[static_cast<std::size_t>(w)]) {
                dist[static_cast<std::size_t>(w)] = nd;
                prev[static_cast<std::size_t>(w)] = v;
                heap.emplace(nd, w);
            }
        }
    }
    std::vector<std::uint64_t> path;
    for (int v = target; v >= 0 && prev[static_cast<std::size_t>(v)] >= 0; v = prev[static_cast<std::size_t>(v)])
        path.push_back(edge_key(v, prev[static_cast<std::size_t>(v)]));
    return path;
}

}  // namespace

UVChart conformal_flatten(const TriMesh& disk, const FlattenOptions& options) {
    std::vector<int> flipped;
    UVChart chart = solve_lscm(disk, options, flipped);
    if (!flipped.empty())
        throw Error(ErrorCode::FlippedTriangles, std::to_string(flipped.size()) + " flipped uv triangles");
    return chart;
}

UVChart conformal_flatten(const Partition& partition, const FlattenOptions& options) {
    UVChart chart = conformal_flatten(partition.submesh, options);
    chart.layer = partition.layer;
    chart.vertex_origin = partition.vertex_origin;
    chart.face_origin = partition.face_origin;
    return chart;
}

namespace {

struct ChartJob {
    int partition = -1;
    int layer = 0;
    DiskCut cut;
    std::vector<int> vertex_origin;
    std::vector<int> face_origin;
};

std::vector<ChartJob> prepare_jobs(const Partition& partition, int partition_index) {
    std::vector<ChartJob> jobs;
    for (SurfacePiece& piece : split_surface(partition.submesh)) {
        orient_consistently(piece.mesh);
        ChartJob job;
        job.partition = partition_index;
        job.layer = partition.layer;
        job.cut = cut_to_disk(piece.mesh);
        auto to_mesh = [&](int piece_vertex) {
            return partition.vertex_origin[static_cast<std::size_t>(piece.vertex_origin[static_cast<std::size_t>(piece_vertex)])];
        };
        for (int v : job.cut.piece.vertex_origin) job.vertex_origin.push_back(to_mesh(v));
        for (int f : job.cut.piece.face_origin)
            job.face_origin.push_back(partition.face_origin[static_cast<std::size_t>(piece.face_origin[static_cast<std::size_t>(f)])]);
        for (int& v : job.cut.cut_vertices) v = to_mesh(v);
        std::sort(job.cut.cut_vertices.begin(), job.cut.cut_vertices.end());
        job.cut.cut_vertices.erase(std::unique(job.cut.cut_vertices.begin(), job.cut.cut_vertices.end()),
                                   job.cut.cut_vertices.end());
        jobs.push_back(std::move(job));
    }
    return jobs;
}

// Flattens a disk; while triangles flip, slits the chart from its worst cone
// vertex to the boundary and solves again.
UVChart run_job(const ChartJob& job, const FlattenOptions& options) {
    TriMesh disk = job.cut.piece.mesh;
    std::vector<int> vertex_origin = job.vertex_origin;
    std::vector<int> face_origin = job.face_origin;
    std::vector<int> cuts = job.cut.cut_vertices;
    std::vector<int> flipped;
    UVChart chart;
    for (int attempt = 0;; ++attempt) {
        chart = solve_lscm(disk, options, flipped);
        if (flipped.empty()) break;
        const int cone = attempt < options.max_cone_cuts ? worst_cone(chart.mesh, flipped) : -1;
        const auto path = cone >= 0 ? path_to_boundary(chart.mesh, cone) : std::vector<std::uint64_t>{};
        if (path.empty())
            throw Error(ErrorCode::FlippedTriangles, std::to_string(flipped.size()) + " flipped uv triangles");
        const std::unordered_set<std::uint64_t> slit(path.begin(), path.end());
        auto pieces = split_surface(chart.mesh, slit);
        if (pieces.size() != 1 || !is_disk(pieces.front().mesh.faces))
            throw Error(ErrorCode::NonDiskTopology, "slit did not keep the chart a disk");
        std::vector<int> next_vertex;
        std::vector<int> next_face;
        for (int v : pieces.front().vertex_origin) next_vertex.push_back(vertex_origin[static_cast<std::size_t>(v)]);
        for (int f : pieces.front().face_origin) next_face.push_back(face_origin[static_cast<std::size_t>(f)]);
        for (std::uint64_t key : path) {
            cuts.push_back(vertex_origin[static_cast<std::size_t>(key >> 32)]);
            cuts.push_back(vertex_origin[static_cast<std::size_t>(key & 0xffffffffu)]);
        }
        disk = std::move(pieces.front().mesh);
        vertex_origin = std::move(next_vertex);
        face_origin = std::move(next_face);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    chart.partition = job.partition;
    chart.layer = job.layer;
    chart.vertex_origin = std::move(vertex_origin);
    chart.face_origin = std::move(face_origin);
    chart.cut_vertices = std::move(cuts);
    return chart;
}

}  // namespace

std::vector<UVChart> flatten_partition(const Partition& partition, int partition_index, const FlattenOptions& options) {
    std::vector<UVChart> charts;
    for (const ChartJob& job : prepare_jobs(partition, partition_index)) charts.push_back(run_job(job, options));
    return charts;
}

std::vector<UVChart> flatten_partitions(const std::vector<Partition>& partitions, int threads,
                                        const FlattenOptions& options) {
    std::vector<ChartJob> jobs;
    for (std::size_t p = 0; p < partitions.size(); ++p) {
        auto more = prepare_jobs(partitions[p], static_cast<int>(p));
        std::move(more.begin(), more.end(), std::back_inserter(jobs));
    }
    std::vector<UVChart> charts(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) { charts[i] = run_job(jobs[i], options); });
    return charts;
}

Vec2 UVAtlas::atlas_uv(std::size_t chart, int vertex) const {
    const ChartPlacement& p = placement[chart];
    return p.scale * charts[chart].uv[static_cast<std::size_t>(vertex)] + p.translation;
}

double UVAtlas::utilization() const {
    double total = 0.0;
    for (std::size_t c = 0; c < charts.size(); ++c) {
        const TriMesh& m = charts[c].mesh;
        for (const Face& t : m.faces) {
            const Vec2 a = atlas_uv(c, t[0]);
            total += 0.5 * cross2(atlas_uv(c, t[1]) - a, atlas_uv(c, t[2]) - a);
        }
    }
    return total;
}

namespace {

struct ShelfRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

bool shelf_pack(const std::vector<Vec2>& extent, const std::vector<std::size_t>& order, double scale, int resolution,
                int gutter, std::vector<ShelfRect>* out) {
    std::vector<ShelfRect> rects(extent.size());
    int x = 0;
    int y = 0;
    int shelf = 0;
    for (std::size_t i : order) {
        const double fw = std::ceil(extent[i].x() * scale);
        const double fh = std::ceil(extent[i].y() * scale);
        if (fw > resolution || fh > resolution) return false;
        const int w = std::max(1, static_cast<int>(fw)) + 2 * gutter;
        const int h = std::max(1, static_cast<int>(fh)) + 2 * gutter;
        if (w > resolution || h > resolution) return false;
        if (x + w > resolution) {
            y += shelf;
            x = 0;
            shelf = 0;
        }
        if (y + h > resolution) return false;
        rects[i] = {x, y, w, h};
        x += w;
        shelf = std::max(shelf, h);
    }
    if (out) *out = std::move(rects);
    return true;
}

}  // namespace

namespace {

/// Rotates chart uv so its minimum-area bounding rectangle is axis aligned and
/// no taller than wide. Rigid, so angles and orientation are untouched.
void align_chart(UVChart& chart) {
    if (chart.uv.size() < 3) return;
    std::vector<Vec2> pts = chart.uv;
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    std::vector<Vec2> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross2(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross2(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k > 1 ? k - 1 : k);
    if (hull.size() < 3) return;

    double best_area = std::numeric_limits<double>::infinity();
    Vec2 best_dir(1.0, 0.0);
    Vec2 best_extent = Vec2::Zero();
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Vec2 e = hull[(i + 1) % hull.size()] - hull[i];
        const double len = e.norm();
        if (len == 0.0) continue;
        const Vec2 d = e / len;
        const Vec2 nrm(-d.y(), d.x());
        double u0 = std::numeric_limits<double>::infinity(), u1 = -u0, v0 = u0, v1 = -u0;
        for (const Vec2& p : hull) {
            u0 = std::min(u0, p.dot(d));
            u1 = std::max(u1, p.dot(d));
            v0 = std::min(v0, p.dot(nrm));
            v1 = std::max(v1, p.dot(nrm));
        }
        const double area = (u1 - u0) * (v1 - v0);
        if (area < best_area * (1.0 - 1e-12)) {
            best_area = area;
            best_dir = d;
            best_extent = Vec2(u1 - u0, v1 - v0);
        }
    }
    // Map best_dir to +x; when the box is taller than wide, map it to +y instead.
    Vec2 xdir = best_dir;
    if (best_extent.y() > best_extent.x()) xdir = Vec2(best_dir.y(), -best_dir.x());
    const Vec2 ydir(-xdir.y(), xdir.x());
    for (Vec2& p : chart.uv) p = Vec2(p.dot(xdir), p.dot(ydir));
}

}  // namespace

UVAtlas pack_atlas(std::vector<UVChart> charts, int resolution, int gutter) {
    if (resolution < 16) throw Error(ErrorCode::InvalidArgument, "atlas resolution must be at least 16");
    if (gutter < 1) throw Error(ErrorCode::InvalidArgument, "gutter must be at least 1 texel");
    if (2 * gutter >= resolution) throw Error(ErrorCode::CannotFit, "gutter leaves no room for charts");

    const std::size_t n = charts.size();
    std::vector<double> unit(n, 1.0);
    std::vector<Vec2> lo(n), extent(n);
    for (std::size_t c = 0; c < n; ++c) {
        align_chart(charts[c]);
        const UVChart& ch = charts[c];
        double a3 = 0.0;
        double auv = 0.0;
        for (std::size_t f = 0; f < ch.mesh.faces.size(); ++f) {
            const Face& t = ch.mesh.faces[f];
            a3 += ch.mesh.face_area(f);
            const Vec2& a = ch.uv[static_cast<std::size_t>(t[0])];
            auv += 0.5 * cross2(ch.uv[static_cast<std::size_t>(t[1])] - a, ch.uv[static_cast<std::size_t>(t[2])] - a);
        }
        if (!(auv > 0.0) || !(a3 > 0.0)) throw Error(ErrorCode::InvalidArgument, "chart has no positive area");
        unit[c] = std::sqrt(a3 / auv);
        Vec2 mn = Vec2::Constant(std::numeric_limits<double>::infinity());
        Vec2 mx = -mn;
        for (const Vec2& p : ch.uv) {
            mn = mn.cwiseMin(unit[c] * p);
            mx = mx.cwiseMax(unit[c] * p);
        }
        lo[c] = mn;
        extent[c] = mx - mn;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return extent[a].y() > extent[b].y(); });

    if (!shelf_pack(extent, order, 0.0, resolution, gutter, nullptr))
        throw Error(ErrorCode::CannotFit, "charts do not fit even at minimal scale");
    double largest = 0.0;
    for (const Vec2& e : extent) largest = std::max({largest, e.x(), e.y()});
    double hi = largest > 0.0 ? (resolution - 2 * gutter) / largest : 1.0;
    double best = 0.0;
    if (shelf_pack(extent, order, hi, resolution, gutter, nullptr)) {
        best = hi;
    } else {
        double low = 0.0;
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (low + hi);
            if (shelf_pack(extent, order, mid, resolution, gutter, nullptr))
                low = mid;
            else
                hi = mid;
        }
        best = low;
    }
    std::vector<ShelfRect> rects;
    shelf_pack(extent, order, best, resolution, gutter, &rects);

    UVAtlas atlas;
    atlas.resolution = resolution;
    atlas.gutter = gutter;
    atlas.placement.resize(n);
    const double R = resolution;
    for (std::size_t c = 0; c < n; ++c) {
        ChartPlacement& p = atlas.placement[c];
        const ShelfRect& r = rects[c];
        p.scale = best * unit[c] / R;
        p.translation = Vec2((r.x + gutter - best * lo[c].x()) / R, (r.y + gutter - best * lo[c].y()) / R);
        p.bbox_min = Vec2((r.x + gutter) / R, (r.y + gutter) / R);
        p.bbox_max = p.bbox_min + best * extent[c] / R;
        p.texel_x = r.x;
        p.texel_y = r.y;
        p.texel_w = r.w;
        p.texel_h = r.h;
    }
    atlas.charts = std::move(charts);
    return atlas;
}

}  // namespace peel
