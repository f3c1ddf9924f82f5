#pragma once

#include "peel/mesh.hpp"
#include "peel/seams.hpp"

#include <array>
#include <cstdint>
#include <unordered_set>
#include <vector>

namespace peel {

struct DistortionStats {
    /// Per triangle: ratio of the singular values of the 3D -> uv map (>= 1).
    std::vector<double> qc_ratio;
    /// Per triangle: uv/3D area ratio divided by the chart-wide ratio.
    std::vector<double> area_scale;
    /// Per triangle: largest absolute corner-angle change, radians.
    std::vector<double> angle_error;
    double qc_p90 = 1.0;
    double qc_max = 1.0;
    double angle_error_max = 0.0;
};

DistortionStats distortion_stats(const TriMesh& mesh, const std::vector<Vec2>& uv);

/// A surface piece with provenance back to the mesh it was cut from.
struct SurfacePiece {
    TriMesh mesh;
    std::vector<int> vertex_origin;
    std::vector<int> face_origin;
};

/// Splits `mesh` into edge-connected pieces. Two faces are joined across an
/// edge only when exactly two faces use it and it is not in `cut_edges`
/// (edge_key values); vertices are replicated per piece and per fan, so every
/// piece is a manifold surface.
std::vector<SurfacePiece> split_surface(const TriMesh& mesh,
                                        const std::unordered_set<std::uint64_t>& cut_edges = {});

/// Euler characteristic 1 and exactly one boundary loop.
bool is_disk(const std::vector<Face>& faces);

struct DiskCut {
    SurfacePiece piece;
    /// Input vertices lying on a cut (ascending).
    std::vector<int> cut_vertices;
};

/// Cuts a connected manifold surface into a disk along the primal edges left
/// over by a breadth-first dual spanning tree (dangling branches pruned). A
/// closed genus-0 surface is opened along a two-edge path. Throws
/// NonDiskTopology if the result is still not a disk.
DiskCut cut_to_disk(const TriMesh& mesh);

struct FlattenOptions {
    /// Relative residual target for the conjugate-gradient solve.
    double cg_tolerance = 1e-11;
    /// Accepted relative residual of the normal equations; a direct solve is
    /// used if the iterative one ends above it.
    double max_residual = 1e-10;
    /// Slits from cone vertices to the boundary tried before giving up on a
    /// chart with flipped triangles (pipeline charts only).
    int max_cone_cuts = 64;
};

struct UVChart {
    int partition = -1;
    int layer = 0;
    TriMesh mesh;
    /// chart vertex -> vertex of the mesh the partitions were split from
    std::vector<int> vertex_origin;
    /// chart face -> face of that mesh
    std::vector<int> face_origin;
    std::vector<Vec2> uv;
    std::array<int, 2> pinned{-1, -1};
    /// Relative residual |A^T A x - A^T b| / |A^T b| of the final solution.
    double residual = 0.0;
    int iterations = 0;
    bool direct_solve = false;
    /// Mesh vertices introduced into seams by cutting this chart to a disk.
    std::vector<int> cut_vertices;
    DistortionStats stats;
};

/// Least-squares conformal map of a disk surface with the farthest boundary
/// pair (ties to lowest indices) pinned to (0,0) and (1,0). Throws
/// NonDiskTopology, SolverSingular or FlippedTriangles.
UVChart conformal_flatten(const TriMesh& disk, const FlattenOptions& options = {});

/// Flattens a partition that is already a single disk. Throws NonDiskTopology otherwise.
UVChart conformal_flatten(const Partition& partition, const FlattenOptions& options = {});

/// Splits a partition into connected pieces, cuts each to a disk and flattens it.
std::vector<UVChart> flatten_partition(const Partition& partition, int partition_index,
                                       const FlattenOptions& options = {});

/// All partitions, pieces flattened in parallel; output order is deterministic.
std::vector<UVChart> flatten_partitions(const std::vector<Partition>& partitions, int threads,
                                        const FlattenOptions& options = {});

struct ChartPlacement {
    /// atlas_uv = scale * chart_uv + translation
    double scale = 1.0;
    Vec2 translation = Vec2::Zero();
    /// Chart bounding box in atlas uv.
    Vec2 bbox_min = Vec2::Zero();
    Vec2 bbox_max = Vec2::Zero();
    /// Reserved texel rectangle including gutter; y counts up from the bottom row.
    int texel_x = 0;
    int texel_y = 0;
    int texel_w = 0;
    int texel_h = 0;
};

struct UVAtlas {
    int resolution = 0;
    int gutter = 0;
    std::vector<UVChart> charts;
    std::vector<ChartPlacement> placement;

    Vec2 atlas_uv(std::size_t chart, int vertex) const;
    /// Sum of chart uv areas in the unit square.
    double utilization() const;
};

/// Shelf packing by descending chart height with the global texels-per-meter
/// scale maximised by bisection. Each chart is first rotated so its
/// minimum-area bounding rectangle lies axis aligned and wider than tall, then
/// rescaled so its uv area equals its 3D area. Throws CannotFit.
UVAtlas pack_atlas(std::vector<UVChart> charts, int resolution, int gutter);

}  // namespace peel
