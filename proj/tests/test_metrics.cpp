#include "oracles.hpp"

#include "peel/error.hpp"
#include "peel/fixtures.hpp"
#include "peel/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace peel;

namespace {

ErrorCode code_of(const auto& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Io;  // sentinel: no throw
}

SegProbabilities random_probs(std::mt19937& rng, std::size_t texels, int classes) {
    std::uniform_real_distribution<double> u(0.01, 1.0);
    SegProbabilities p;
    p.classes = classes;
    for (std::size_t t = 0; t < texels; ++t) {
        std::vector<double> row(static_cast<std::size_t>(classes));
        double s = 0;
        for (double& v : row) s += (v = u(rng));
        for (double v : row) p.prob.push_back(v / s);
    }
    return p;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

}  // namespace

TEST_CASE("stack losses match plain loops on random 4x4x4 stacks") {
    std::mt19937 rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const PeelStack a = oracle::random_stack(rng, 4, 4, 4);
        const PeelStack b = oracle::random_stack(rng, 4, 4, 4);
        CHECK(rel(l_depth(a, b), oracle::loop_l_depth(a, b)) <= 1e-6);
        CHECK(rel(l_rgb(a, b), oracle::loop_l_rgb(a, b)) <= 1e-6);
        CHECK(rel(l_norm(a, b), oracle::loop_l_norm(a, b)) <= 1e-6);
        const SegProbabilities p = random_probs(rng, b.seg_data().size(), 8);
        CHECK(rel(l_seg(p, b.seg_data()), oracle::loop_l_seg(p.prob, 8, b.seg_data())) <= 1e-6);
    }
}

TEST_CASE("loss identities and one-term examples") {
    std::mt19937 rng(1);
    const PeelStack a = oracle::random_stack(rng, 4, 4, 4);
    CHECK(l_depth(a, a) == 0.0);
    CHECK(l_rgb(a, a) == 0.0);
    CHECK(l_norm(a, a) == 0.0);

    PeelStack b = a;
    b.depth(2, 1, 3) += 0.5f;
    CHECK(l_depth(b, a) == doctest::Approx(0.5).epsilon(1e-6));
    PeelStack c = a;
    c.normal(0, 0, 0) = Vec3f(0.f, 0.f, 0.f);
    c.normal(0, 0, 0)[1] = a.normal(0, 0, 0)[1] + 0.2f;
    c.normal(0, 0, 0)[0] = a.normal(0, 0, 0)[0];
    c.normal(0, 0, 0)[2] = a.normal(0, 0, 0)[2];
    CHECK(l_norm(c, a) == doctest::Approx(0.04).epsilon(1e-5));
    PeelStack d = a;
    d.rgb(1, 2, 2)[0] = static_cast<std::uint8_t>(a.rgb(1, 2, 2)[0] ^ 0xff);
    CHECK(l_rgb(d, a) == doctest::Approx(std::abs(int(d.rgb(1, 2, 2)[0]) - int(a.rgb(1, 2, 2)[0])) / 255.0));

    // Losses are non-negative and symmetric.
    const PeelStack e = oracle::random_stack(rng, 4, 4, 4);
    CHECK(l_depth(a, e) > 0.0);
    CHECK(l_depth(a, e) == doctest::Approx(l_depth(e, a)));
    CHECK(l_norm(a, e) == doctest::Approx(l_norm(e, a)));
}

TEST_CASE("mean reduction divides by texels valid in either stack") {
    PeelStack a(oracle::simple_camera(3, 2, 5.0), 2);
    PeelStack b = a;
    a.depth(0, 0, 0) = 1.0f;
    b.depth(0, 0, 0) = 1.5f;
    b.depth(1, 2, 1) = 2.0f;
    CHECK(l_depth(a, b, Reduction::Sum) == doctest::Approx(2.5));
    CHECK(l_depth(a, b, Reduction::Mean) == doctest::Approx(2.5 / 2.0));
    CHECK(l_depth(a, a, Reduction::Mean) == 0.0);
}

TEST_CASE("cross-entropy examples") {
    const std::vector<std::uint8_t> gt = {2};
    SegProbabilities uniform{4, {0.25, 0.25, 0.25, 0.25}};
    CHECK(l_seg(uniform, gt) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(l_seg(uniform, gt) == doctest::Approx(1.3863).epsilon(1e-4));
    CHECK(l_seg(one_hot({0, 3, 1}, 4), {0, 3, 1}) == 0.0);
    // Zero probability is clamped, not infinite.
    CHECK(l_seg(SegProbabilities{2, {1.0, 0.0}}, {1}) == doctest::Approx(-std::log(1e-12)));

    CHECK(code_of([] { l_seg(SegProbabilities{2, {0.7, 0.7}}, {0}); }) == ErrorCode::NotADistribution);
    CHECK(code_of([] { l_seg(SegProbabilities{2, {1.2, -0.2}}, {0}); }) == ErrorCode::NotADistribution);
    CHECK(code_of([] { l_seg(SegProbabilities{2, {0.5, 0.5}}, {0, 1}); }) == ErrorCode::DimensionMismatch);
    CHECK(code_of([] { l_seg(SegProbabilities{2, {0.5, 0.5}}, {2}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("total loss: weights, 2.15 example, linearity, presets") {
    const LossWeights w = LossWeights::final_preset();
    CHECK(w.depth == 1.0);
    CHECK(w.seg == 0.1);
    CHECK(w.norm == 1.0);
    CHECK(w.rgb == 0.05);
    CHECK(total_loss(ComponentLosses{0, 0, 0, 0}, w) == 0.0);
    CHECK(total_loss(ComponentLosses{1, 1, 1, 1}, w) == doctest::Approx(2.15).epsilon(1e-12));
    const ComponentLosses c{0.3, 1.7, 0.25, 4.0};
    const ComponentLosses c2{0.6, 3.4, 0.5, 8.0};
    CHECK(total_loss(c2, w) == doctest::Approx(2.0 * total_loss(c, w)).epsilon(1e-12));
    CHECK(total_loss(c, w) == doctest::Approx(0.3 * 1.0 + 1.7 * 0.1 + 0.25 * 1.0 + 4.0 * 0.05));

    const LossWeights draft = LossWeights::draft_preset();
    CHECK(total_loss(ComponentLosses{1, 1, 1, 1}, draft) == doctest::Approx(1.0 + 1.0 + 0.1 + 0.001));

    LossWeights bad;
    bad.seg = -1.0;
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
    bad.seg = std::nan("");
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("total loss of a prediction equals the weighted component sum") {
    std::mt19937 rng(9);
    const PeelStack gt = oracle::random_stack(rng, 4, 4, 4);
    PeelPrediction pred{oracle::random_stack(rng, 4, 4, 4), {}};
    pred.seg = random_probs(rng, gt.seg_data().size(), 7);
    const ComponentLosses c = component_losses(pred, gt);
    CHECK(c.depth == doctest::Approx(oracle::loop_l_depth(pred.stack, gt)).epsilon(1e-9));
    CHECK(c.seg == doctest::Approx(oracle::loop_l_seg(pred.seg.prob, 7, gt.seg_data())).epsilon(1e-9));
    const LossWeights w = LossWeights::final_preset();
    CHECK(total_loss(pred, gt, w) == doctest::Approx(c.depth + 0.1 * c.seg + c.norm + 0.05 * c.rgb).epsilon(1e-12));
    PeelPrediction self{gt, one_hot(gt.seg_data(), 7)};
    CHECK(total_loss(self, gt, w) == 0.0);
}

TEST_CASE("dimension mismatches are reported") {
    std::mt19937 rng(3);
    const PeelStack a = oracle::random_stack(rng, 4, 4, 4);
    const PeelStack b = oracle::random_stack(rng, 4, 3, 4);
    const PeelStack c = oracle::random_stack(rng, 4, 4, 3);
    CHECK(code_of([&] { l_depth(a, b); }) == ErrorCode::DimensionMismatch);
    CHECK(code_of([&] { l_rgb(a, c); }) == ErrorCode::DimensionMismatch);
    CHECK(code_of([&] { l_norm(b, a); }) == ErrorCode::DimensionMismatch);
    CHECK(code_of([&] { iou(a, c, 1); }) == ErrorCode::DimensionMismatch);
    CHECK(code_of([&] { nre(Image2D<Vec3f>(2, 2), Image2D<Vec3f>(2, 3)); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("p2s against brute force on 100 points and 500 faces") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TriMesh m;
    for (int f = 0; f < 500; ++f) {
        const Vec3 c(u(rng), u(rng), u(rng));
        for (int k = 0; k < 3; ++k) m.vertices.push_back(c + 0.2 * Vec3(u(rng), u(rng), u(rng)));
        m.faces.push_back({3 * f, 3 * f + 1, 3 * f + 2});
    }
    std::vector<Vec3> pts;
    for (int i = 0; i < 100; ++i) pts.emplace_back(1.5 * u(rng), 1.5 * u(rng), 1.5 * u(rng));
    const std::vector<double> d = point_distances(pts, m, 4);
    double mean = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double b = oracle::brute_distance(pts[i], m);
        CHECK(std::abs(d[i] - b) <= 1e-12);
        mean += b;
    }
    CHECK(std::abs(p2s(pts, m) - mean / 100.0) <= 1e-12);
    // Translating both leaves the value unchanged.
    TriMesh moved = m;
    std::vector<Vec3> moved_pts = pts;
    const Vec3 shift(0.25, -0.5, 2.0);
    for (Vec3& v : moved.vertices) v += shift;
    for (Vec3& p : moved_pts) p += shift;
    CHECK(p2s(moved_pts, moved) == doctest::Approx(p2s(pts, m)).epsilon(1e-9));
    // Deterministic across thread counts.
    CHECK(p2s(pts, m, 1) == p2s(pts, m, 8));
}

TEST_CASE("p2s: on-surface points give zero; unit sphere points against a radius-1.1 sphere give 0.1") {
    const TriMesh s = make_icosphere(4, 1.0);
    CHECK(p2s(s.vertices, s) <= 1e-9);
    std::vector<Vec3> centroids;
    for (const Face& f : s.faces) centroids.push_back((s.vertices[f[0]] + s.vertices[f[1]] + s.vertices[f[2]]) / 3.0);
    CHECK(p2s(centroids, s) <= 1e-9);

    const TriMesh big = make_icosphere(4, 1.1);
    // Largest radial gap between the faceted radius-1.1 mesh and its sphere.
    double chord = 0.0;
    for (std::size_t f = 0; f < big.faces.size(); ++f)
        chord = std::max(chord, 1.1 - std::abs(big.face_normal(f).dot(big.vertices[big.faces[f][0]])));
    std::mt19937 rng(4);
    std::normal_distribution<double> g;
    std::vector<Vec3> pts;
    for (int i = 0; i < 2000; ++i) pts.push_back(Vec3(g(rng), g(rng), g(rng)).normalized());
    CHECK(std::abs(p2s(pts, big) - 0.1) <= 2.0 * chord);
}

TEST_CASE("p2s rejects empty inputs") {
    const TriMesh s = make_icosphere(1, 1.0);
    CHECK(code_of([&] { p2s({}, s); }) == ErrorCode::EmptyInput);
    CHECK(code_of([&] { p2s({Vec3::Zero()}, TriMesh{}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("iou examples and properties") {
    // 2x2 masks: pred covers the top row, gt the left column.
    const std::vector<std::uint8_t> pred = {1, 1, 0, 0};
    const std::vector<std::uint8_t> gt = {1, 0, 1, 0};
    CHECK(iou(pred, gt, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(iou(gt, pred, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(iou(pred, pred, 1) == 1.0);
    CHECK(iou(std::vector<std::uint8_t>{1, 1, 0, 0}, std::vector<std::uint8_t>{0, 0, 1, 1}, 1) == 0.0);
    CHECK(iou(pred, gt, 7) == 1.0);  // absent from both

    std::mt19937 rng(8);
    const PeelStack a = oracle::random_stack(rng, 4, 4, 4);
    const PeelStack b = oracle::random_stack(rng, 4, 4, 4);
    for (std::uint8_t c = 1; c <= 6; ++c) {
        CHECK(iou(a, b, c) == doctest::Approx(iou(b, a, c)));
        CHECK(iou(a, a, c) == 1.0);
        const double v = iou(a, b, c);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    // Growing the intersection (turning a pred-only texel into a match) never lowers IOU.
    std::vector<std::uint8_t> p2 = pred;
    p2[2] = 1;  // now matches gt at index 2
    CHECK(iou(p2, gt, 1) >= iou(pred, gt, 1));
}

TEST_CASE("nre: identical, anti-parallel, background ignored, loop oracle") {
    Image2D<Vec3f> a(3, 3, Vec3f(0, 0, -1));
    a.at(1, 1) = Vec3f::Zero();
    CHECK(nre(a, a).value == 0.0);
    Image2D<Vec3f> b = a;
    for (auto& n : b.data()) n = -n;
    const NreResult anti = nre(a, b);
    CHECK(anti.value == doctest::Approx(2.0));
    CHECK(anti.texels == 8);
    CHECK(nre(Image2D<Vec3f>(2, 2), Image2D<Vec3f>(2, 2)).value == 0.0);

    std::mt19937 rng(12);
    std::uniform_real_distribution<float> u(-1, 1);
    Image2D<Vec3f> p(16, 12), q(16, 12);
    long double sum = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < p.data().size(); ++i) {
        p.data()[i] = i % 7 == 0 ? Vec3f::Zero() : Vec3f(u(rng), u(rng), u(rng)).normalized();
        q.data()[i] = i % 5 == 0 ? Vec3f::Zero() : Vec3f(u(rng), u(rng), u(rng)).normalized();
        if (p.data()[i] != Vec3f::Zero() && q.data()[i] != Vec3f::Zero()) {
            sum += (p.data()[i].cast<double>() - q.data()[i].cast<double>()).norm();
            ++count;
        }
    }
    const NreResult r = nre(p, q);
    CHECK(r.texels == count);
    CHECK(r.value == doctest::Approx(static_cast<double>(sum / count)).epsilon(1e-9));
}
