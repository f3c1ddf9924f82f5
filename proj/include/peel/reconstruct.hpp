#pragma once

#include "peel/mesh.hpp"
#include "peel/peel_stack.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace peel {

/// One world-space point per valid texel. Throws InvalidStack when the stack
/// fails validate_stack.
LabeledPointCloud backproject(const PeelStack& stack);

/// Points whose label equals `label`, in original order.
LabeledPointCloud extract_garment(const LabeledPointCloud& cloud, std::uint8_t label);

/// Discontinuity threshold for one layer (layer id is 1-based): the larger of
/// 3x the median inter-texel depth difference and 8 pixel footprints at the
/// layer's mean depth.
double default_tau_disc(const PeelStack& stack, int layer_id);

/// Grid meshification of one peel layer restricted to one label. Vertices are
/// added in row-major texel order and tagged with `layer_id`. Faces are wound
/// so entering surfaces (odd layers) face the camera.
LayeredMesh meshify_layer(const PeelStack& stack, int layer_id, std::uint8_t label,
                          std::optional<double> tau_disc = std::nullopt);

/// Concatenates parts and welds vertices within `eps_weld` of an earlier
/// surviving vertex. Degenerate faces after remapping are dropped.
LayeredMesh merge_layers(std::span<const LayeredMesh> parts, double eps_weld);

struct StitchReport {
    std::size_t boundary_edges_before = 0;
    std::size_t boundary_edges_after = 0;
    std::size_t faces_added = 0;
    std::size_t loop_pairs = 0;
};

/// Zippers facing runs of open boundary loops whose vertices lie within
/// `max_bridge` of each other with triangle strips; the order of advances
/// along the two runs minimises the summed rung length. Existing vertices are
/// never moved and no vertex is added.
LayeredMesh stitch_gaps(const LayeredMesh& mesh, double max_bridge, StitchReport* report = nullptr);

/// Appends an externally produced fill mesh, tagging its vertices FILL and
/// welding them onto existing vertices within `eps_weld`.
LayeredMesh merge_fill_mesh(const LayeredMesh& mesh, const TriMesh& fill, double eps_weld);

struct ReconstructOptions {
    std::optional<double> tau_disc;
    std::optional<double> eps_weld;    // default 1e-5 * scene diameter
    std::optional<double> max_bridge;  // default: see default_max_bridge
    bool stitch = true;
    int threads = 0;
};

/// Default bridging distance, estimated from the stack: 1.25x the widest
/// along-ray gap between consecutive layers at grazing silhouette texels plus
/// two pixel footprints, and never below four footprints.
double default_max_bridge(const PeelStack& stack);

struct ReconstructResult {
    LayeredMesh mesh;
    LayeredMesh merged;  // before stitching
    StitchReport stitch;
    double eps_weld = 0.0;
    double max_bridge = 0.0;
    std::vector<double> tau_disc;  // per layer
};

/// meshify every layer -> merge -> stitch -> drop unreferenced vertices.
ReconstructResult reconstruct_garment(const PeelStack& stack, std::uint8_t label,
                                      const ReconstructOptions& options = {});

}  // namespace peel
