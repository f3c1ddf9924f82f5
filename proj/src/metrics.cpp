#include "peel/metrics.hpp"

#include "peel/bvh.hpp"
#include "peel/error.hpp"
#include "peel/parallel.hpp"

#include <cmath>
#include <string>

namespace peel {

namespace {

void check_same_shape(const PeelStack& a, const PeelStack& b) {
    if (a.width() != b.width() || a.height() != b.height() || a.layers() != b.layers())
        throw Error(ErrorCode::DimensionMismatch, "stacks differ in size: " + std::to_string(a.width()) + "x" +
                                                      std::to_string(a.height()) + "x" + std::to_string(a.layers()) +
                                                      " vs " + std::to_string(b.width()) + "x" +
                                                      std::to_string(b.height()) + "x" + std::to_string(b.layers()));
}

double reduce(const KahanSum& sum, const PeelStack& a, const PeelStack& b, Reduction reduction) {
    if (reduction == Reduction::Sum) return sum.value();
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.depth_data().size(); ++i)
        if (a.depth_data()[i] != 0.0f || b.depth_data()[i] != 0.0f) ++n;
    return n ? sum.value() / static_cast<double>(n) : 0.0;
}

}  // namespace

double l_depth(const PeelStack& pred, const PeelStack& gt, Reduction reduction) {
    check_same_shape(pred, gt);
    KahanSum sum;
    for (std::size_t i = 0; i < gt.depth_data().size(); ++i)
        sum.add(std::abs(static_cast<double>(pred.depth_data()[i]) - static_cast<double>(gt.depth_data()[i])));
    return reduce(sum, pred, gt, reduction);
}

double l_rgb(const PeelStack& pred, const PeelStack& gt, Reduction reduction) {
    check_same_shape(pred, gt);
    KahanSum sum;
    for (std::size_t i = 0; i < gt.rgb_data().size(); ++i)
        for (std::size_t c = 0; c < 3; ++c)
            sum.add(std::abs(static_cast<double>(pred.rgb_data()[i][c]) - static_cast<double>(gt.rgb_data()[i][c])) /
                    255.0);
    return reduce(sum, pred, gt, reduction);
}

double l_norm(const PeelStack& pred, const PeelStack& gt, Reduction reduction) {
    check_same_shape(pred, gt);
    KahanSum sum;
    for (std::size_t i = 0; i < gt.normal_data().size(); ++i)
        for (int c = 0; c < 3; ++c) {
            const double d = static_cast<double>(pred.normal_data()[i][c]) - static_cast<double>(gt.normal_data()[i][c]);
            sum.add(d * d);
        }
    return reduce(sum, pred, gt, reduction);
}

SegProbabilities one_hot(const std::vector<std::uint8_t>& labels, int classes) {
    SegProbabilities out;
    out.classes = classes;
    out.prob.assign(labels.size() * static_cast<std::size_t>(classes), 0.0);
    for (std::size_t t = 0; t < labels.size(); ++t) {
        if (labels[t] >= classes) throw Error(ErrorCode::InvalidArgument, "label outside class range");
        out.prob[t * static_cast<std::size_t>(classes) + labels[t]] = 1.0;
    }
    return out;
}

double l_seg(const SegProbabilities& pred, const std::vector<std::uint8_t>& gt, Reduction reduction) {
    if (pred.classes <= 0 || pred.prob.size() != gt.size() * static_cast<std::size_t>(pred.classes))
        throw Error(ErrorCode::DimensionMismatch, "probabilities do not match the label count");
    const auto C = static_cast<std::size_t>(pred.classes);
    KahanSum sum;
    for (std::size_t t = 0; t < gt.size(); ++t) {
        double row = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            const double p = pred.prob[t * C + c];
            if (!(p >= 0.0)) throw Error(ErrorCode::NotADistribution, "negative probability at texel " + std::to_string(t));
            row += p;
        }
        if (std::abs(row - 1.0) > 1e-6)
            throw Error(ErrorCode::NotADistribution, "texel " + std::to_string(t) + " sums to " + std::to_string(row));
        if (gt[t] >= C) throw Error(ErrorCode::InvalidArgument, "label outside class range");
        sum.add(-std::log(std::max(pred.prob[t * C + gt[t]], 1e-12)));
    }
    if (reduction == Reduction::Mean) return gt.empty() ? 0.0 : sum.value() / static_cast<double>(gt.size());
    return sum.value();
}

void LossWeights::validate() const {
    for (double w : {depth, seg, norm, rgb})
        if (!std::isfinite(w) || w < 0.0) throw Error(ErrorCode::InvalidArgument, "loss weights must be finite and >= 0");
}

ComponentLosses component_losses(const PeelPrediction& pred, const PeelStack& gt, Reduction reduction) {
    ComponentLosses c;
    c.depth = l_depth(pred.stack, gt, reduction);
    c.seg = l_seg(pred.seg, gt.seg_data(), reduction);
    c.norm = l_norm(pred.stack, gt, reduction);
    c.rgb = l_rgb(pred.stack, gt, reduction);
    return c;
}

double total_loss(const ComponentLosses& c, const LossWeights& w) {
    w.validate();
    return w.depth * c.depth + w.seg * c.seg + w.norm * c.norm + w.rgb * c.rgb;
}

double total_loss(const PeelPrediction& pred, const PeelStack& gt, const LossWeights& weights, Reduction reduction) {
    return total_loss(component_losses(pred, gt, reduction), weights);
}

std::vector<double> point_distances(const std::vector<Vec3>& points, const TriMesh& surface, int threads) {
    if (points.empty()) throw Error(ErrorCode::EmptyInput, "no points");
    if (surface.faces.empty()) throw Error(ErrorCode::EmptyInput, "surface has no faces");
    const TriangleBvh bvh(surface);
    std::vector<double> d(points.size());
    parallel_for(points.size(), threads, [&](std::size_t i) { d[i] = bvh.closest(points[i]).distance; });
    return d;
}

double p2s(const std::vector<Vec3>& points, const TriMesh& surface, int threads) {
    const auto d = point_distances(points, surface, threads);
    KahanSum sum;
    for (double v : d) sum.add(v);
    return sum.value() / static_cast<double>(d.size());
}

double iou(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt, std::uint8_t label) {
    if (pred.size() != gt.size()) throw Error(ErrorCode::DimensionMismatch, "label arrays differ in size");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool a = pred[i] == label;
        const bool b = gt[i] == label;
        inter += a && b;
        uni += a || b;
    }
    return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

double iou(const PeelStack& pred, const PeelStack& gt, std::uint8_t label) {
    check_same_shape(pred, gt);
    return iou(pred.seg_data(), gt.seg_data(), label);
}

NreResult nre(const Image2D<Vec3f>& pred, const Image2D<Vec3f>& gt) {
    if (pred.width() != gt.width() || pred.height() != gt.height())
        throw Error(ErrorCode::DimensionMismatch, "normal maps differ in size");
    KahanSum sum;
    NreResult r;
    for (std::size_t i = 0; i < gt.data().size(); ++i) {
        const Vec3f& a = pred.data()[i];
        const Vec3f& b = gt.data()[i];
        if (a.isZero(0.0f) || b.isZero(0.0f)) continue;
        sum.add((a.cast<double>() - b.cast<double>()).norm());
        ++r.texels;
    }
    r.value = r.texels ? sum.value() / static_cast<double>(r.texels) : 0.0;
    return r;
}

}  // namespace peel
