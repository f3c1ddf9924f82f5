#pragma once

#include "peel/error.hpp"
#include "peel/fixtures.hpp"
#include "peel/flatten.hpp"
#include "peel/reconstruct.hpp"
#include "peel/seams.hpp"
#include "peel/texture.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace peel {

inline constexpr const char* kReportSchema = "peelreport/1";
inline constexpr const char* kAtlasSchema = "peelatlas/1";
inline constexpr const char* kSeamsSchema = "peelseams/1";

/// Pass/fail limits of a round trip.
struct Thresholds {
    /// P2S limit in mean pixel footprints of the rendered stack.
    double p2s_footprints = 2.0;
    /// Lowest accepted per-class IOU of the re-rendered reconstruction.
    double iou_min = 0.85;
    double nre_max = 0.1;
    /// Fraction of FILLED texels within `texture_tolerance` of the source color.
    double texture_match_min = 0.95;
    int texture_tolerance = 2;
    /// Largest accepted p90 quasi-conformal ratio of any chart.
    double qc_p90_max = 2.0;
    double lscm_residual_max = 1e-10;
};

struct PipelineParams {
    int layers = kDefaultLayers;
    ReconstructOptions reconstruct;
    int atlas_resolution = 1024;
    int gutter = 2;
    FlattenOptions flatten;
    /// depth_tolerance is the bake agreement threshold in footprints.
    BakeOptions bake;
    InpaintMode inpaint = InpaintMode::Exemplar;
    InpaintOptions inpaint_options;
    std::optional<RgbImage> patch;
    int dilate_texels = 2;
    Thresholds thresholds;
    int threads = 0;
    /// Fault injection: swaps two layers at one texel before reconstruction.
    bool corrupt_stack = false;
    bool write_inspection = true;
};

/// Parameters that shape results, as recorded in manifests and reports.
nlohmann::json params_to_json(const PipelineParams& params);

// ---- unwrap ----

struct UnwrapResult {
    std::vector<int> vertex_layer;
    SeamSet seams;
    /// Face layers after small-partition merging.
    std::vector<int> face_layer;
    std::vector<Partition> partitions;
    UVAtlas atlas;
};

/// assign_layers -> estimate_seams -> split_partitions -> flatten -> pack.
UnwrapResult unwrap(const LayeredMesh& mesh, int atlas_resolution, int gutter, int threads = 0,
                    const FlattenOptions& options = {});

/// All charts concatenated (vertices replicated per chart) with atlas uv as a
/// per-vertex parametrization. Chart c owns a contiguous vertex and face range.
TriMesh atlas_mesh(const UVAtlas& atlas);

nlohmann::json atlas_to_json(const UVAtlas& atlas);
/// Rebuilds an atlas from its layout and the mesh written by atlas_mesh; the
/// charts carry atlas uv directly (unit scale, zero translation).
UVAtlas atlas_from_json(const nlohmann::json& layout, const TriMesh& mesh);

nlohmann::json seams_to_json(const UnwrapResult& unwrapped);

// ---- texture ----

struct TextureResult {
    BakeResult baked;
    /// Inpainted and gutter-dilated.
    RgbImage texture;
};

/// 0 outside, 128 unfilled, 255 filled.
GrayImage mask_image(const ValidityMask& mask);

TextureResult texture_atlas(const UVAtlas& atlas, const PeelStack& stack, const PipelineParams& params);

struct TextureCheck {
    std::size_t filled = 0;
    std::size_t matched = 0;
    double match_fraction = 0.0;
    /// Mean absolute channel difference over FILLED texels, in [0,1].
    double mean_abs_error = 0.0;
};

/// Compares every FILLED texel with the source surface color at the closest
/// point of the scene's `label` faces to the texel's surface position.
TextureCheck check_texture(const BakeResult& baked, const Scene& scene, std::uint8_t label, int tolerance,
                           int threads = 0);

// ---- round trip ----

/// Points compared against a reference surface by P2S: every vertex followed
/// by every face centroid.
std::vector<Vec3> surface_samples(const TriMesh& mesh);

/// Faces of every scene mesh carrying `label`, as one mesh.
TriMesh label_submesh(const Scene& scene, std::uint8_t label);

/// The scene with the faces of each reconstructed label replaced by its reconstruction.
Scene substitute_garments(const Scene& scene, const std::vector<std::uint8_t>& labels,
                          const std::vector<TriMesh>& reconstructions);

/// Stage failure: carries the failing stage and the original error code.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause)
        : Error(cause.code(), "stage " + stage + ": " + detail(cause)), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    static std::string detail(const Error& e) {
        const std::string what = e.what();
        const std::string prefix = std::string(to_string(e.code())) + ": ";
        return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
    }

    std::string stage_;
};

/// render -> reconstruct -> unwrap -> bake -> evaluate for every garment
/// label of the fixture. Artifacts, report.json and run_manifest.json go to
/// `out_dir` when it is non-empty. The report carries no timings and no thread
/// count, so identical inputs give identical reports. Throws StageError; the
/// manifest then holds every stage up to and including the failed one.
nlohmann::json run_roundtrip(const Fixture& fixture, const PipelineParams& params,
                             const std::filesystem::path& out_dir = {});

// ---- inspection images ----

/// Rows: depth, color, normal, label; one column per layer.
RgbImage contact_sheet(const PeelStack& stack);
/// Texture darkened with chart triangle edges drawn on top, at most `max_size` texels wide.
RgbImage uv_wireframe(const UVAtlas& atlas, const RgbImage& texture, int max_size = 1024);
/// Each chart triangle colored by its quasi-conformal ratio (1 blue, >= 2 red).
RgbImage distortion_heatmap(const UVAtlas& atlas, int size = 512);

}  // namespace peel
