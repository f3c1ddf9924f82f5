#pragma once

#include "peel/mesh.hpp"

#include <vector>

namespace peel {

struct Partition {
    TriMesh submesh;
    int layer = 0;
    /// submesh vertex -> original mesh vertex
    std::vector<int> vertex_origin;
    /// submesh face -> original mesh face
    std::vector<int> face_origin;
    std::vector<char> is_seam;
};

/// Peel layer per vertex. FILL vertices take the layer of their nearest
/// non-FILL vertex (exact k-d tree search, ties to the lower layer).
/// Throws AllVerticesFill.
std::vector<int> assign_layers(const LayeredMesh& mesh);

struct SeamSet {
    /// min of the three vertex layers
    std::vector<int> face_layer;
    /// ascending vertex ids incident to faces of two or more face layers
    std::vector<int> vertices;
    std::vector<char> is_seam;
};

SeamSet estimate_seams(const TriMesh& mesh, const std::vector<int>& vertex_layer);

/// Seam set for given face layers (e.g. after merge_small_partitions).
SeamSet seams_from_face_layers(const TriMesh& mesh, std::vector<int> face_layer);

/// Partitions with fewer faces than this are merged into a neighbour.
inline constexpr std::size_t kMinPartitionFaces = 3;

/// Face layers after merging every partition smaller than kMinPartitionFaces
/// into the adjacent partition sharing the longest boundary.
std::vector<int> merge_small_partitions(const TriMesh& mesh, const std::vector<int>& face_layer);

/// One partition per occupied layer holding exactly that layer's faces.
/// Callers merge small partitions first. Vertices keep ascending original order; a vertex
/// used by several partitions is replicated into each. Unreferenced vertices
/// go to the partition of their own layer (or the first partition).
std::vector<Partition> split_partitions(const TriMesh& mesh, const std::vector<int>& face_layer,
                                        const std::vector<char>& is_seam,
                                        const std::vector<int>& vertex_layer = {});

}  // namespace peel
