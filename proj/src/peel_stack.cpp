#include "peel/peel_stack.hpp"

#include "peel/error.hpp"

#include <cmath>
#include <sstream>

namespace peel {

PeelStack::PeelStack(const PinholeCamera& camera, int layers) : camera_(camera), layers_(layers) {
    if (layers < 1 || layers > kMaxLayers)
        throw Error(ErrorCode::InvalidArgument, "layer count must be in [1, 8]");
    if (camera.width <= 0 || camera.height <= 0)
        throw Error(ErrorCode::InvalidArgument, "camera has empty image");
    const std::size_t n = texels_per_layer() * static_cast<std::size_t>(layers);
    depth_.assign(n, 0.0f);
    rgb_.assign(n, Rgb8{0, 0, 0});
    seg_.assign(n, 0);
    normal_.assign(n, Vec3f::Zero());
}

std::size_t PeelStack::valid_count() const {
    std::size_t n = 0;
    for (float d : depth_) n += d != 0.0f;
    return n;
}

double PeelStack::mean_pixel_footprint() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (float d : depth_) {
        if (d == 0.0f) continue;
        sum += camera_.pixel_footprint(d);
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

std::string_view to_string(StackRule rule) {
    switch (rule) {
        case StackRule::Dimensions: return "dimensions";
        case StackRule::Camera: return "camera";
        case StackRule::Monotonicity: return "monotonicity";
        case StackRule::Coherence: return "coherence";
        case StackRule::NormalLength: return "normal_length";
    }
    return "unknown";
}

std::vector<StackViolation> validate_stack(const PeelStack& stack) {
    std::vector<StackViolation> out;
    for (const auto& issue : stack.camera().validate())
        out.push_back({StackRule::Camera, -1, -1, -1, issue});

    const std::size_t n = stack.texels_per_layer() * static_cast<std::size_t>(stack.layers());
    if (stack.layers() < 1 || stack.depth_data().size() != n || stack.rgb_data().size() != n ||
        stack.seg_data().size() != n || stack.normal_data().size() != n) {
        out.push_back({StackRule::Dimensions, -1, -1, -1, "channel sizes disagree with W x H x L"});
        return out;
    }

    for (int y = 0; y < stack.height(); ++y) {
        for (int x = 0; x < stack.width(); ++x) {
            float prev = 0.0f;
            for (int l = 0; l < stack.layers(); ++l) {
                const float d = stack.depth(l, x, y);
                const bool has_depth = d != 0.0f;
                const bool has_seg = stack.seg(l, x, y) != 0;
                const Vec3f& nrm = stack.normal(l, x, y);
                const bool has_normal = !nrm.isZero(0.0f);
                if (has_depth != has_seg || has_depth != has_normal) {
                    std::ostringstream os;
                    os << "depth " << (has_depth ? "set" : "empty") << ", seg "
                       << (has_seg ? "set" : "empty") << ", normal "
                       << (has_normal ? "set" : "empty");
                    out.push_back({StackRule::Coherence, l, x, y, os.str()});
                }
                if (has_normal && std::abs(nrm.cast<double>().norm() - 1.0) >= 1e-4) {
                    out.push_back({StackRule::NormalLength, l, x, y, "normal is not unit length"});
                }
                if (has_depth) {
                    if (!std::isfinite(d) || d < 0.0f) {
                        out.push_back({StackRule::Monotonicity, l, x, y, "depth not positive finite"});
                    } else if (prev != 0.0f && !(d > prev)) {
                        std::ostringstream os;
                        os << "depth " << d << " does not exceed previous valid depth " << prev;
                        out.push_back({StackRule::Monotonicity, l, x, y, os.str()});
                    }
                    prev = d;
                }
            }
        }
    }
    return out;
}

}  // namespace peel
