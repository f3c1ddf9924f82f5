#include "peel/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace peel {

Vec3 TriMesh::face_normal(std::size_t face) const {
    const Face& f = faces[face];
    const Vec3 n = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

double TriMesh::face_area(std::size_t face) const {
    const Face& f = faces[face];
    return 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
}

double TriMesh::diameter() const {
    if (vertices.empty()) return 0.0;
    Vec3 lo = vertices.front();
    Vec3 hi = vertices.front();
    for (const Vec3& v : vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return (hi - lo).norm();
}

std::vector<std::string> TriMesh::validate() const {
    std::vector<std::string> issues;
    const int nv = static_cast<int>(vertices.size());
    for (std::size_t i = 0; i < faces.size(); ++i) {
        const Face& f = faces[i];
        for (int k = 0; k < 3; ++k) {
            if (f[k] < 0 || f[k] >= nv) {
                issues.push_back("face " + std::to_string(i) + " index out of range");
                break;
            }
        }
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
            issues.push_back("face " + std::to_string(i) + " is degenerate");
    }
    if (!normals.empty()) {
        if (normals.size() != vertices.size()) issues.push_back("normal count != vertex count");
        for (std::size_t i = 0; i < normals.size(); ++i) {
            if (std::abs(normals[i].norm() - 1.0) >= 1e-4) {
                issues.push_back("normal " + std::to_string(i) + " is not unit length");
                break;
            }
        }
    }
    if (!face_labels.empty() && face_labels.size() != faces.size())
        issues.push_back("face label count != face count");
    if (!face_colors.empty() && face_colors.size() != faces.size())
        issues.push_back("face color count != face count");
    if (!face_texcoords.empty()) {
        if (face_texcoords.size() != faces.size()) issues.push_back("uv face count != face count");
        const int nt = static_cast<int>(texcoords.size());
        for (const Face& f : face_texcoords) {
            if (f[0] < 0 || f[1] < 0 || f[2] < 0 || f[0] >= nt || f[1] >= nt || f[2] >= nt) {
                issues.push_back("uv index out of range");
                break;
            }
        }
    }
    return issues;
}

void LabeledPointCloud::push_back(const Vec3& p, const Vec3& n, std::uint8_t label, int layer,
                                  PixelRef src) {
    points.push_back(p);
    normals.push_back(n);
    labels.push_back(label);
    layer_ids.push_back(layer);
    source_pixel.push_back(src);
}

std::size_t LayeredMesh::add_vertex(const Vec3& p, int layer, std::optional<PixelRef> source) {
    mesh.vertices.push_back(p);
    vertex_layer.push_back(layer);
    vertex_source.push_back(source);
    return mesh.vertices.size() - 1;
}

std::size_t count_boundary_edges(const std::vector<Face>& faces) {
    std::unordered_map<std::uint64_t, int> count;
    count.reserve(faces.size() * 3);
    for (const Face& f : faces)
        for (int k = 0; k < 3; ++k) ++count[edge_key(f[k], f[(k + 1) % 3])];
    std::size_t n = 0;
    for (const auto& [key, c] : count) n += c == 1;
    return n;
}

std::vector<std::vector<int>> boundary_loops(const std::vector<Face>& faces) {
    std::unordered_map<std::uint64_t, int> count;
    count.reserve(faces.size() * 3);
    for (const Face& f : faces)
        for (int k = 0; k < 3; ++k) ++count[edge_key(f[k], f[(k + 1) % 3])];

    struct HalfEdge {
        int from;
        int to;
    };
    std::vector<HalfEdge> half_edges;
    std::unordered_map<int, std::vector<int>> outgoing;
    for (const Face& f : faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k];
            const int b = f[(k + 1) % 3];
            if (count[edge_key(a, b)] != 1) continue;
            outgoing[a].push_back(static_cast<int>(half_edges.size()));
            half_edges.push_back({a, b});
        }
    }

    std::vector<char> used(half_edges.size(), 0);
    std::vector<std::vector<int>> loops;
    for (std::size_t start = 0; start < half_edges.size(); ++start) {
        if (used[start]) continue;
        std::vector<int> loop;
        int he = static_cast<int>(start);
        const int origin = half_edges[start].from;
        while (he >= 0 && !used[static_cast<std::size_t>(he)]) {
            used[static_cast<std::size_t>(he)] = 1;
            loop.push_back(half_edges[static_cast<std::size_t>(he)].from);
            const int next_vertex = half_edges[static_cast<std::size_t>(he)].to;
            if (next_vertex == origin) break;
            he = -1;
            for (int cand : outgoing[next_vertex]) {
                if (!used[static_cast<std::size_t>(cand)]) {
                    he = cand;
                    break;
                }
            }
        }
        loops.push_back(std::move(loop));
    }
    return loops;
}

std::vector<int> face_components(const std::vector<Face>& faces, int* component_count) {
    std::unordered_map<std::uint64_t, std::vector<int>> edge_faces;
    edge_faces.reserve(faces.size() * 3);
    for (std::size_t i = 0; i < faces.size(); ++i)
        for (int k = 0; k < 3; ++k)
            edge_faces[edge_key(faces[i][k], faces[i][(k + 1) % 3])].push_back(static_cast<int>(i));

    std::vector<int> comp(faces.size(), -1);
    int next = 0;
    std::vector<int> stack;
    for (std::size_t seed = 0; seed < faces.size(); ++seed) {
        if (comp[seed] >= 0) continue;
        comp[seed] = next;
        stack.assign(1, static_cast<int>(seed));
        while (!stack.empty()) {
            const int f = stack.back();
            stack.pop_back();
            for (int k = 0; k < 3; ++k) {
                const auto& nb = edge_faces[edge_key(faces[f][k], faces[f][(k + 1) % 3])];
                for (int g : nb) {
                    if (comp[static_cast<std::size_t>(g)] < 0) {
                        comp[static_cast<std::size_t>(g)] = next;
                        stack.push_back(g);
                    }
                }
            }
        }
        ++next;
    }
    if (component_count) *component_count = next;
    return comp;
}

std::vector<int> compact_vertices(LayeredMesh& lm) {
    TriMesh& m = lm.mesh;
    std::vector<int> remap(m.vertices.size(), -1);
    for (const Face& f : m.faces)
        for (int v : f) remap[static_cast<std::size_t>(v)] = 0;
    int next = 0;
    for (auto& r : remap)
        if (r == 0) r = next++;
    auto keep = [&](auto& vec) {
        if (vec.size() != remap.size()) return;
        std::size_t w = 0;
        for (std::size_t i = 0; i < remap.size(); ++i)
            if (remap[i] >= 0) vec[w++] = vec[i];
        vec.resize(w);
    };
    keep(m.vertices);
    keep(m.normals);
    keep(lm.vertex_layer);
    keep(lm.vertex_source);
    for (Face& f : m.faces)
        for (int& v : f) v = remap[static_cast<std::size_t>(v)];
    return remap;
}

std::size_t orient_consistently(TriMesh& mesh) {
    auto& faces = mesh.faces;
    std::unordered_map<std::uint64_t, std::vector<int>> edge_faces;
    for (std::size_t f = 0; f < faces.size(); ++f)
        for (int k = 0; k < 3; ++k)
            edge_faces[edge_key(faces[f][k], faces[f][(k + 1) % 3])].push_back(static_cast<int>(f));

    const bool uv = mesh.face_texcoords.size() == faces.size();
    auto flip = [&](std::size_t f) {
        std::swap(faces[f][1], faces[f][2]);
        if (uv) std::swap(mesh.face_texcoords[f][1], mesh.face_texcoords[f][2]);
    };
    auto has_directed = [&](const Face& f, int a, int b) {
        for (int k = 0; k < 3; ++k)
            if (f[k] == a && f[(k + 1) % 3] == b) return true;
        return false;
    };

    std::size_t flipped = 0;
    std::vector<char> seen(faces.size(), 0);
    std::vector<int> queue;
    for (std::size_t seed = 0; seed < faces.size(); ++seed) {
        if (seen[seed]) continue;
        seen[seed] = 1;
        queue.assign(1, static_cast<int>(seed));
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const auto f = static_cast<std::size_t>(queue[head]);
            for (int k = 0; k < 3; ++k) {
                const int a = faces[f][k];
                const int b = faces[f][(k + 1) % 3];
                const auto& around = edge_faces[edge_key(a, b)];
                if (around.size() != 2) continue;  // boundary or non-manifold
                const auto g = static_cast<std::size_t>(around[0] == static_cast<int>(f) ? around[1] : around[0]);
                if (seen[g]) continue;
                seen[g] = 1;
                if (has_directed(faces[g], a, b)) {
                    flip(g);
                    ++flipped;
                }
                queue.push_back(static_cast<int>(g));
            }
        }
    }
    return flipped;
}

}  // namespace peel
