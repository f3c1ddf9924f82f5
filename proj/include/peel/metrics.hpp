#pragma once

#include "peel/mesh.hpp"
#include "peel/peel_stack.hpp"

#include <cstdint>
#include <vector>

namespace peel {

/// Compensated summation; the result does not depend on how terms were
/// produced as long as they are added in the same order.
class KahanSum {
public:
    void add(double v) {
        const double y = v - carry_;
        const double t = sum_ + y;
        carry_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

enum class Reduction {
    Sum,
    /// Divided by the number of layer texels valid in either input.
    Mean,
};

/// L1 over every layer and texel. Throws DimensionMismatch.
double l_depth(const PeelStack& pred, const PeelStack& gt, Reduction reduction = Reduction::Sum);
/// L1 over rgb channels scaled to [0,1].
double l_rgb(const PeelStack& pred, const PeelStack& gt, Reduction reduction = Reduction::Sum);
/// Sum of squared normal component differences.
double l_norm(const PeelStack& pred, const PeelStack& gt, Reduction reduction = Reduction::Sum);

/// Per-texel class distributions, texel-major: prob[texel * classes + class].
struct SegProbabilities {
    int classes = 0;
    std::vector<double> prob;

    std::size_t texels() const { return classes > 0 ? prob.size() / static_cast<std::size_t>(classes) : 0; }
};

SegProbabilities one_hot(const std::vector<std::uint8_t>& labels, int classes);

/// Cross-entropy sum of -log p(gt) with p clamped at 1e-12. Throws
/// NotADistribution (row sum off by more than 1e-6 or negative entry),
/// DimensionMismatch and InvalidArgument (label outside the class range).
double l_seg(const SegProbabilities& pred, const std::vector<std::uint8_t>& gt,
             Reduction reduction = Reduction::Sum);

struct LossWeights {
    double depth = 1.0;
    double seg = 0.1;
    double norm = 1.0;
    double rgb = 0.05;

    static LossWeights final_preset() { return {1.0, 0.1, 1.0, 0.05}; }
    /// Earlier preset (1, 1, 0.1, 0.001), read in the same depth/seg/norm/rgb order.
    static LossWeights draft_preset() { return {1.0, 1.0, 0.1, 0.001}; }
    /// Throws InvalidArgument unless every weight is finite and non-negative.
    void validate() const;
};

struct ComponentLosses {
    double depth = 0.0;
    double seg = 0.0;
    double norm = 0.0;
    double rgb = 0.0;
};

/// Predicted stack plus its per-texel class distribution (layer-major texels).
struct PeelPrediction {
    PeelStack stack;
    SegProbabilities seg;
};

ComponentLosses component_losses(const PeelPrediction& pred, const PeelStack& gt,
                                 Reduction reduction = Reduction::Sum);
double total_loss(const ComponentLosses& losses, const LossWeights& weights);
double total_loss(const PeelPrediction& pred, const PeelStack& gt, const LossWeights& weights,
                  Reduction reduction = Reduction::Sum);

/// Mean exact point-to-triangle distance. Throws EmptyInput.
double p2s(const std::vector<Vec3>& points, const TriMesh& surface, int threads = 0);
/// Per-point distances, same contract as p2s.
std::vector<double> point_distances(const std::vector<Vec3>& points, const TriMesh& surface, int threads = 0);

/// |pred == c and gt == c| / |pred == c or gt == c|; 1 when the class is absent
/// from both. Throws DimensionMismatch.
double iou(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt, std::uint8_t label);
double iou(const PeelStack& pred, const PeelStack& gt, std::uint8_t label);

struct NreResult {
    double value = 0.0;
    std::size_t texels = 0;
};

/// Mean |n_pred - n_gt| over texels where both normals are non-zero (0 when
/// there are none). Throws DimensionMismatch.
NreResult nre(const Image2D<Vec3f>& pred, const Image2D<Vec3f>& gt);

}  // namespace peel
