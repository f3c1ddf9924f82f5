#pragma once

#include "peel/camera.hpp"
#include "peel/image.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace peel {

using Face = std::array<int, 3>;

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    /// Optional per-vertex unit normals (empty when absent).
    std::vector<Vec3> normals;
    /// Optional per-face segmentation label (empty when absent).
    std::vector<std::uint8_t> face_labels;
    /// Optional per-face base color, used where no texture applies.
    std::vector<Rgb8> face_colors;
    /// Optional OBJ-style texture coordinates with their own per-face indices.
    /// A per-vertex parametrization uses face_texcoords == faces.
    std::vector<Vec2> texcoords;
    std::vector<Face> face_texcoords;
    std::shared_ptr<const RgbImage> texture;
    std::string texture_name;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t face_count() const { return faces.size(); }
    bool has_uv() const { return !texcoords.empty() && face_texcoords.size() == faces.size(); }
    Vec2 corner_uv(std::size_t face, int corner) const {
        return texcoords[static_cast<std::size_t>(face_texcoords[face][corner])];
    }
    Vec3 face_normal(std::size_t face) const;
    double face_area(std::size_t face) const;
    /// Bounding-box diagonal.
    double diameter() const;

    /// Empty when face indices are in range, faces are non-degenerate and
    /// optional arrays have matching sizes.
    std::vector<std::string> validate() const;
};

struct PixelRef {
    int layer = 0;  // layer id, 1-based
    int x = 0;
    int y = 0;
    bool operator==(const PixelRef&) const = default;
};

struct LabeledPointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<std::uint8_t> labels;
    std::vector<int> layer_ids;
    std::vector<PixelRef> source_pixel;

    std::size_t size() const { return points.size(); }
    void push_back(const Vec3& p, const Vec3& n, std::uint8_t label, int layer, PixelRef src);
};

/// Layer tag for vertices that did not originate from a peel layer.
inline constexpr int kFillLayer = 0;

struct LayeredMesh {
    TriMesh mesh;
    std::vector<int> vertex_layer;
    std::vector<std::optional<PixelRef>> vertex_source;

    std::size_t add_vertex(const Vec3& p, int layer, std::optional<PixelRef> source = std::nullopt);
};

// ---- connectivity helpers ----

inline std::uint64_t edge_key(int a, int b) {
    const auto lo = static_cast<std::uint32_t>(a < b ? a : b);
    const auto hi = static_cast<std::uint32_t>(a < b ? b : a);
    return (static_cast<std::uint64_t>(lo) << 32) | hi;
}

/// Number of undirected edges used by exactly one face.
std::size_t count_boundary_edges(const std::vector<Face>& faces);

/// Boundary loops as vertex sequences following the half-edge direction of
/// the faces that own them. Non-manifold boundary vertices may repeat.
std::vector<std::vector<int>> boundary_loops(const std::vector<Face>& faces);

/// Number of edge-connected face components, with the component id per face.
std::vector<int> face_components(const std::vector<Face>& faces, int* component_count = nullptr);

/// Flips faces so the two faces of every manifold edge traverse it in
/// opposite directions. Each edge-connected component keeps the winding of its
/// lowest-index face. Returns the number of flipped faces.
std::size_t orient_consistently(TriMesh& mesh);

/// Drops vertices referenced by no face. Returns old->new index map (-1 for removed).
std::vector<int> compact_vertices(LayeredMesh& mesh);

}  // namespace peel
