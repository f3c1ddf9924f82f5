#pragma once

#include "peel/flatten.hpp"
#include "peel/image.hpp"
#include "peel/peel_stack.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace peel {

enum class TexelState : std::uint8_t { Outside = 0, Unfilled = 1, Filled = 2 };

struct ValidityMask {
    Image2D<TexelState> state;
    /// Owning chart per texel, -1 outside every chart.
    Image2D<int> chart;
    /// Top-left texel (column, row from the top) of each chart's bounding box;
    /// patch tiling is aligned to it.
    std::vector<std::array<int, 2>> chart_origin;

    int width() const { return state.width(); }
    int height() const { return state.height(); }
    std::size_t count(TexelState s) const;
};

/// Single chart (origin 0,0) covering every texel, all in state `fill`.
ValidityMask uniform_mask(int width, int height, TexelState fill);

struct BakeOptions {
    /// Depth agreement tolerance in pixel footprints at the projected depth.
    double depth_tolerance = 3.0;
    /// Below this fraction of chart texels agreeing with the stack, bake
    /// reports CameraMismatch.
    double min_agreement = 0.1;
    int threads = 0;
};

struct BakeResult {
    RgbImage texture;
    ValidityMask mask;
    /// Surface point of every texel inside a chart (zero elsewhere).
    Image2D<Vec3> position;
    double agreement = 0.0;
};

/// Texel centers of every chart triangle are lifted to 3D, projected with the
/// stack camera and read from the chart's layer at the nearest peel texel when
/// that texel is valid and its depth agrees. Rows run top to bottom, so atlas
/// v = 1 - (row + 0.5) / resolution.
BakeResult bake(const UVAtlas& atlas, const PeelStack& stack, const BakeOptions& options = {});

/// Texel (column, row) center in atlas uv.
Vec2 texel_center_uv(int column, int row, int resolution);

enum class InpaintMode { Diffusion, Exemplar, PatchTile };

InpaintMode parse_inpaint_mode(std::string_view name);
std::string_view to_string(InpaintMode mode);

struct InpaintOptions {
    int patch_size = 7;
    int pyramid_levels = 4;
    int iterations = 5;
    std::uint32_t seed = 1;
};

/// Fills every Unfilled texel; Filled and Outside texels are returned bit-unchanged.
/// Throws NoBoundary (diffusion region without a Filled neighbour, or no
/// Filled texel at all for exemplar) and MissingPatch.
RgbImage inpaint(const RgbImage& image, const ValidityMask& mask, InpaintMode mode,
                 const RgbImage* patch = nullptr, const InpaintOptions& options = {});

/// Writes `texels` rings of Outside texels around the charts with the mean of
/// their already-colored 8-neighbours. Only Outside texels change.
void dilate_gutter(RgbImage& image, const ValidityMask& mask, int texels = 2);

}  // namespace peel
