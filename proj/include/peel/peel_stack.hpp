#pragma once

#include "peel/camera.hpp"
#include "peel/image.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace peel {

using Vec3f = Eigen::Vector3f;

inline constexpr int kDefaultLayers = 4;
inline constexpr int kMaxLayers = 8;

/// L pixel-aligned peel layers. Storage is indexed by zero-based layer `l`;
/// the public notion of a "layer id" elsewhere in the library is l + 1.
/// Background texels hold depth 0, seg 0 and normal (0,0,0).
class PeelStack {
public:
    PeelStack() = default;
    PeelStack(const PinholeCamera& camera, int layers);

    const PinholeCamera& camera() const { return camera_; }
    int width() const { return camera_.width; }
    int height() const { return camera_.height; }
    int layers() const { return layers_; }
    std::size_t texels_per_layer() const {
        return static_cast<std::size_t>(width()) * static_cast<std::size_t>(height());
    }

    std::size_t index(int l, int x, int y) const {
        return static_cast<std::size_t>(l) * texels_per_layer() +
               static_cast<std::size_t>(y) * static_cast<std::size_t>(width()) +
               static_cast<std::size_t>(x);
    }

    float& depth(int l, int x, int y) { return depth_[index(l, x, y)]; }
    float depth(int l, int x, int y) const { return depth_[index(l, x, y)]; }
    Rgb8& rgb(int l, int x, int y) { return rgb_[index(l, x, y)]; }
    const Rgb8& rgb(int l, int x, int y) const { return rgb_[index(l, x, y)]; }
    std::uint8_t& seg(int l, int x, int y) { return seg_[index(l, x, y)]; }
    std::uint8_t seg(int l, int x, int y) const { return seg_[index(l, x, y)]; }
    Vec3f& normal(int l, int x, int y) { return normal_[index(l, x, y)]; }
    const Vec3f& normal(int l, int x, int y) const { return normal_[index(l, x, y)]; }

    bool valid(int l, int x, int y) const { return depth(l, x, y) != 0.0f; }

    std::vector<float>& depth_data() { return depth_; }
    const std::vector<float>& depth_data() const { return depth_; }
    std::vector<Rgb8>& rgb_data() { return rgb_; }
    const std::vector<Rgb8>& rgb_data() const { return rgb_; }
    std::vector<std::uint8_t>& seg_data() { return seg_; }
    const std::vector<std::uint8_t>& seg_data() const { return seg_; }
    std::vector<Vec3f>& normal_data() { return normal_; }
    const std::vector<Vec3f>& normal_data() const { return normal_; }

    std::size_t valid_count() const;
    /// Mean of depth / fx over valid texels in all layers (0 when empty).
    double mean_pixel_footprint() const;

private:
    PinholeCamera camera_;
    int layers_ = 0;
    std::vector<float> depth_;
    std::vector<Rgb8> rgb_;
    std::vector<std::uint8_t> seg_;
    std::vector<Vec3f> normal_;
};

enum class StackRule { Dimensions, Camera, Monotonicity, Coherence, NormalLength };

std::string_view to_string(StackRule rule);

struct StackViolation {
    StackRule rule;
    int layer = -1;  // zero-based, -1 when not texel-specific
    int x = -1;
    int y = -1;
    std::string detail;
};

std::vector<StackViolation> validate_stack(const PeelStack& stack);

}  // namespace peel
