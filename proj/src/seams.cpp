#include "peel/seams.hpp"

#include "peel/error.hpp"
#include "peel/kdtree.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

namespace peel {

std::vector<int> assign_layers(const LayeredMesh& mesh) {
    const auto& tags = mesh.vertex_layer;
    if (tags.size() != mesh.mesh.vertices.size())
        throw Error(ErrorCode::InvalidArgument, "vertex_layer size does not match vertex count");
    std::vector<Vec3> anchors;
    std::vector<int> anchor_layer;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] == kFillLayer) continue;
        anchors.push_back(mesh.mesh.vertices[i]);
        anchor_layer.push_back(tags[i]);
    }
    if (anchors.empty() && !tags.empty()) throw Error(ErrorCode::AllVerticesFill, "every vertex is tagged FILL");
    std::vector<int> out = tags;
    if (anchors.size() == tags.size()) return out;
    const KdTree3 tree(std::move(anchors));
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] != kFillLayer) continue;
        const Vec3& q = mesh.mesh.vertices[i];
        double d2 = 0.0;
        tree.nearest(q, &d2);
        int best = std::numeric_limits<int>::max();
        for (int a : tree.within(q, d2)) best = std::min(best, anchor_layer[static_cast<std::size_t>(a)]);
        out[i] = best;
    }
    return out;
}

SeamSet estimate_seams(const TriMesh& mesh, const std::vector<int>& vertex_layer) {
    if (vertex_layer.size() != mesh.vertices.size())
        throw Error(ErrorCode::InvalidArgument, "vertex layer count does not match vertex count");
    std::vector<int> face_layer;
    face_layer.reserve(mesh.faces.size());
    for (const Face& f : mesh.faces)
        face_layer.push_back(std::min({vertex_layer[static_cast<std::size_t>(f[0])],
                                       vertex_layer[static_cast<std::size_t>(f[1])],
                                       vertex_layer[static_cast<std::size_t>(f[2])]}));
    return seams_from_face_layers(mesh, std::move(face_layer));
}

SeamSet seams_from_face_layers(const TriMesh& mesh, std::vector<int> face_layer) {
    if (face_layer.size() != mesh.faces.size())
        throw Error(ErrorCode::InvalidArgument, "face layer count does not match face count");
    SeamSet out;
    out.face_layer = std::move(face_layer);
    // Smallest and largest face layer seen at every vertex.
    std::vector<int> lo(mesh.vertices.size(), std::numeric_limits<int>::max());
    std::vector<int> hi(mesh.vertices.size(), std::numeric_limits<int>::min());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        for (int v : mesh.faces[f]) {
            lo[static_cast<std::size_t>(v)] = std::min(lo[static_cast<std::size_t>(v)], out.face_layer[f]);
            hi[static_cast<std::size_t>(v)] = std::max(hi[static_cast<std::size_t>(v)], out.face_layer[f]);
        }
    out.is_seam.assign(mesh.vertices.size(), 0);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (hi[v] >= lo[v] && hi[v] != lo[v]) {
            out.is_seam[v] = 1;
            out.vertices.push_back(static_cast<int>(v));
        }
    }
    return out;
}

std::vector<int> merge_small_partitions(const TriMesh& mesh, const std::vector<int>& face_layer) {
    std::vector<int> layers = face_layer;
    std::unordered_map<std::uint64_t, std::vector<int>> edge_faces;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        for (int k = 0; k < 3; ++k)
            edge_faces[edge_key(mesh.faces[f][k], mesh.faces[f][(k + 1) % 3])].push_back(static_cast<int>(f));

    for (;;) {
        std::map<int, std::size_t> counts;
        for (int l : layers) ++counts[l];
        if (counts.size() < 2) break;
        int small = -1;
        for (const auto& [l, c] : counts)
            if (c < kMinPartitionFaces) {
                small = l;
                break;
            }
        if (small < 0) break;

        // Shared boundary length with every other layer.
        std::map<int, double> shared;
        for (const auto& [key, faces] : edge_faces) {
            bool touches = false;
            for (int f : faces) touches = touches || layers[static_cast<std::size_t>(f)] == small;
            if (!touches) continue;
            const int a = static_cast<int>(key >> 32);
            const int b = static_cast<int>(key & 0xffffffffu);
            const double len = (mesh.vertices[static_cast<std::size_t>(a)] - mesh.vertices[static_cast<std::size_t>(b)]).norm();
            for (int f : faces) {
                const int l = layers[static_cast<std::size_t>(f)];
                if (l != small) shared[l] += len;
            }
        }
        int target = -1;
        double best = -1.0;
        for (const auto& [l, len] : shared)
            if (len > best) {
                best = len;
                target = l;
            }
        if (target < 0) {
            // Isolated: attach to the nearest larger layer so the loop ends.
            for (const auto& [l, c] : counts)
                if (l != small && c >= kMinPartitionFaces) {
                    target = l;
                    break;
                }
            if (target < 0) break;
        }
        for (int& l : layers)
            if (l == small) l = target;
    }
    return layers;
}

std::vector<Partition> split_partitions(const TriMesh& mesh, const std::vector<int>& face_layer,
                                        const std::vector<char>& is_seam, const std::vector<int>& vertex_layer) {
    if (face_layer.size() != mesh.faces.size())
        throw Error(ErrorCode::InvalidArgument, "face layer count does not match face count");
    const std::vector<int>& layers = face_layer;

    std::vector<int> occupied(layers.begin(), layers.end());
    std::sort(occupied.begin(), occupied.end());
    occupied.erase(std::unique(occupied.begin(), occupied.end()), occupied.end());
    std::vector<Partition> parts(occupied.size());
    auto slot = [&](int layer) {
        return static_cast<std::size_t>(std::lower_bound(occupied.begin(), occupied.end(), layer) - occupied.begin());
    };

    // Membership per vertex and partition.
    const std::size_t nv = mesh.vertices.size();
    std::vector<std::vector<char>> uses(parts.size(), std::vector<char>(nv, 0));
    std::vector<char> referenced(nv, 0);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        for (int v : mesh.faces[f]) {
            uses[slot(layers[f])][static_cast<std::size_t>(v)] = 1;
            referenced[static_cast<std::size_t>(v)] = 1;
        }
    for (std::size_t v = 0; v < nv && !parts.empty(); ++v) {
        if (referenced[v]) continue;
        std::size_t s = 0;
        if (v < vertex_layer.size()) {
            const auto it = std::find(occupied.begin(), occupied.end(), vertex_layer[v]);
            if (it != occupied.end()) s = static_cast<std::size_t>(it - occupied.begin());
        }
        uses[s][v] = 1;
    }

    std::vector<int> copies(nv, 0);
    for (const auto& u : uses)
        for (std::size_t v = 0; v < nv; ++v) copies[v] += u[v];

    const bool normals = mesh.normals.size() == nv;
    const bool labels = mesh.face_labels.size() == mesh.faces.size();
    for (std::size_t p = 0; p < parts.size(); ++p) {
        Partition& part = parts[p];
        part.layer = occupied[p];
        std::vector<int> local(nv, -1);
        for (std::size_t v = 0; v < nv; ++v) {
            if (!uses[p][v]) continue;
            local[v] = static_cast<int>(part.vertex_origin.size());
            part.vertex_origin.push_back(static_cast<int>(v));
            part.submesh.vertices.push_back(mesh.vertices[v]);
            if (normals) part.submesh.normals.push_back(mesh.normals[v]);
            part.is_seam.push_back(copies[v] > 1 || (v < is_seam.size() && is_seam[v]));
        }
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            if (slot(layers[f]) != p) continue;
            const Face& src = mesh.faces[f];
            part.submesh.faces.push_back({local[static_cast<std::size_t>(src[0])], local[static_cast<std::size_t>(src[1])],
                                          local[static_cast<std::size_t>(src[2])]});
            part.face_origin.push_back(static_cast<int>(f));
            if (labels) part.submesh.face_labels.push_back(mesh.face_labels[f]);
        }
    }
    return parts;
}

}  // namespace peel
