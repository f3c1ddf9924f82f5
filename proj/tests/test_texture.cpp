#include "oracles.hpp"

#include "peel/error.hpp"
#include "peel/fixtures.hpp"
#include "peel/pipeline.hpp"
#include "peel/texture.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

using namespace peel;

namespace {

struct Baked {
    Fixture fixture;
    PeelStack stack;
    UnwrapResult unwrapped;
    BakeResult result;
};

Baked bake_fixture(const std::string& name, TexturePattern pattern, std::uint8_t label, int res = 96,
                   int atlas = 256) {
    Baked b{make_fixture(name, res, pattern), {}, {}, {}};
    b.stack = peel_render(b.fixture.scene);
    b.unwrapped = unwrap(reconstruct_garment(b.stack, label).mesh, atlas, 2);
    b.result = bake(b.unwrapped.atlas, b.stack);
    return b;
}

ValidityMask hole_mask(int w, int h, int x0, int y0, int x1, int y1) {
    ValidityMask m = uniform_mask(w, h, TexelState::Filled);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) m.state.at(x, y) = TexelState::Unfilled;
    return m;
}

const InpaintMode kModes[] = {InpaintMode::Diffusion, InpaintMode::Exemplar, InpaintMode::PatchTile};

}  // namespace

TEST_CASE("constant-colour sphere bakes that colour exactly") {
    const Baked b = bake_fixture("sphere", TexturePattern::Constant, kLabelTop);
    const Rgb8 want = make_texture(TexturePattern::Constant, 4, 0).at(0, 0);
    std::size_t filled = 0;
    for (int y = 0; y < b.result.mask.height(); ++y)
        for (int x = 0; x < b.result.mask.width(); ++x)
            if (b.result.mask.state.at(x, y) == TexelState::Filled) {
                ++filled;
                CHECK(b.result.texture.at(x, y) == want);
            }
    CHECK(filled > 1000);
}

TEST_CASE("outside texels are exactly those covered by no chart triangle") {
    const Baked b = bake_fixture("cylinder_skirt", TexturePattern::Stripes, kLabelBottom, 64, 128);
    const UVAtlas& a = b.unwrapped.atlas;
    const int res = a.resolution;
    int mismatched = 0;
    for (int row = 0; row < res; ++row)
        for (int col = 0; col < res; ++col) {
            const Vec2 q = texel_center_uv(col, row, res);
            bool covered = false;
            for (std::size_t c = 0; c < a.charts.size() && !covered; ++c)
                for (const Face& f : a.charts[c].mesh.faces) {
                    const Vec2 p0 = a.atlas_uv(c, f[0]), p1 = a.atlas_uv(c, f[1]), p2 = a.atlas_uv(c, f[2]);
                    auto side = [&](const Vec2& u, const Vec2& v) {
                        return (v.x() - u.x()) * (q.y() - u.y()) - (v.y() - u.y()) * (q.x() - u.x());
                    };
                    if (side(p0, p1) >= 0 && side(p1, p2) >= 0 && side(p2, p0) >= 0) {
                        covered = true;
                        break;
                    }
                }
            mismatched += covered != (b.result.mask.state.at(col, row) != TexelState::Outside);
        }
    CHECK(mismatched == 0);
    CHECK(texel_center_uv(0, 0, 4) == Vec2(0.125, 0.875));
}

TEST_CASE("charts fully visible in their layer leave nothing unfilled") {
    const Baked b = bake_fixture("stacked_planes", TexturePattern::Checker, kLabelTop);
    REQUIRE(b.unwrapped.atlas.charts.size() == 2);
    CHECK(b.result.mask.count(TexelState::Unfilled) == 0);
    CHECK(b.result.mask.count(TexelState::Filled) > 0);
}

TEST_CASE("the occluded plane never receives front-plane colours") {
    const Baked b = bake_fixture("stacked_planes", TexturePattern::Checker, kLabelTop);
    const RgbImage front = make_texture(TexturePattern::Checker, 64, 0);
    const std::set<Rgb8> front_colors(front.data().begin(), front.data().end());
    const UVAtlas& a = b.unwrapped.atlas;
    std::size_t back_texels = 0;
    for (int y = 0; y < b.result.mask.height(); ++y)
        for (int x = 0; x < b.result.mask.width(); ++x) {
            const int c = b.result.mask.chart.at(x, y);
            if (c < 0 || a.charts[static_cast<std::size_t>(c)].layer != 2) continue;
            if (b.result.mask.state.at(x, y) != TexelState::Filled) continue;
            ++back_texels;
            CHECK(front_colors.count(b.result.texture.at(x, y)) == 0);
        }
    CHECK(back_texels > 1000);
}

TEST_CASE("checkerboard sphere: >= 95% of filled texels match a ray-cast of the source within 2/255") {
    const Baked b = bake_fixture("sphere", TexturePattern::Checker, kLabelTop, 128, 512);
    const PeelRaycaster caster(b.fixture.scene);
    const Vec3 eye = b.stack.camera().center();
    std::size_t filled = 0, matched = 0;
    for (int y = 0; y < b.result.mask.height(); ++y)
        for (int x = 0; x < b.result.mask.width(); ++x) {
            if (b.result.mask.state.at(x, y) != TexelState::Filled) continue;
            ++filled;
            // Hit of the eye ray through the texel's surface point nearest to that point.
            const Vec3 p = b.result.position.at(x, y);
            const Vec3 dir = (p - eye).normalized();
            const auto hits = caster.peel_ray(eye, dir, 1e-9);
            if (hits.empty()) continue;
            const double t = (p - eye).norm();
            const SurfaceHit* best = &hits[0];
            for (const auto& h : hits)
                if (std::abs(h.depth - t) < std::abs(best->depth - t)) best = &h;
            const Rgb8 want = surface_color(b.fixture.scene.meshes[best->mesh], best->face, best->bary, false);
            const Rgb8 got = b.result.texture.at(x, y);
            bool ok = true;
            for (int c = 0; c < 3; ++c) ok = ok && std::abs(int(want[c]) - int(got[c])) <= 2;
            matched += ok;
        }
    REQUIRE(filled > 1000);
    CHECK(static_cast<double>(matched) / static_cast<double>(filled) >= 0.95);
}

TEST_CASE("a stack labelled with the wrong camera is a camera mismatch") {
    const Baked b = bake_fixture("sphere", TexturePattern::Checker, kLabelTop);
    // Same pixels, camera metadata from another viewpoint. A sphere looks alike
    // from every direction, so the distance changes too.
    PeelStack other(PinholeCamera::look_at({1.5, 0.5, -4.0}, {0, 0, 0}, {0, 1, 0}, 96, 96, 1.2), b.stack.layers());
    other.depth_data() = b.stack.depth_data();
    other.rgb_data() = b.stack.rgb_data();
    other.seg_data() = b.stack.seg_data();
    other.normal_data() = b.stack.normal_data();
    try {
        bake(b.unwrapped.atlas, other);
        FAIL("expected CameraMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::CameraMismatch);
    }
}

TEST_CASE("inpaint with nothing to fill returns the input") {
    std::mt19937 rng(2);
    RgbImage img(24, 24);
    for (auto& p : img.data()) p = {std::uint8_t(rng()), std::uint8_t(rng()), std::uint8_t(rng())};
    const ValidityMask m = uniform_mask(24, 24, TexelState::Filled);
    const RgbImage patch(4, 4, Rgb8{1, 2, 3});
    for (InpaintMode mode : kModes) CHECK(inpaint(img, m, mode, &patch) == img);
}

TEST_CASE("constant surroundings fill with the constant in every mode") {
    const Rgb8 c{90, 140, 30};
    RgbImage img(32, 32, c);
    const ValidityMask m = hole_mask(32, 32, 10, 8, 20, 22);
    for (int y = 8; y < 22; ++y)
        for (int x = 10; x < 20; ++x) img.at(x, y) = {0, 0, 0};
    const RgbImage patch(5, 3, c);
    for (InpaintMode mode : kModes) {
        const RgbImage out = inpaint(img, m, mode, &patch);
        for (const Rgb8& p : out.data()) CHECK(p == c);
    }
}

TEST_CASE("patch_tile extends vertical stripes exactly") {
    const Rgb8 a{200, 30, 30}, b{20, 20, 180};
    RgbImage img(64, 40);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 64; ++x) img.at(x, y) = (x / 8) % 2 ? b : a;
    const RgbImage truth = img;
    const ValidityMask m = hole_mask(64, 40, 13, 9, 45, 31);
    for (int y = 9; y < 31; ++y)
        for (int x = 13; x < 45; ++x) img.at(x, y) = {0, 0, 0};
    RgbImage patch(16, 2);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 16; ++x) patch.at(x, y) = x < 8 ? a : b;
    CHECK(inpaint(img, m, InpaintMode::PatchTile, &patch) == truth);
}

TEST_CASE("diffusion reproduces a linear ramp inside a hole") {
    RgbImage img(40, 30);
    for (int y = 0; y < 30; ++y)
        for (int x = 0; x < 40; ++x) img.at(x, y) = {std::uint8_t(5 * x), std::uint8_t(100 + 3 * y), 77};
    const RgbImage truth = img;
    const ValidityMask m = hole_mask(40, 30, 6, 5, 33, 24);
    for (int y = 5; y < 24; ++y)
        for (int x = 6; x < 33; ++x) img.at(x, y) = {0, 0, 0};
    const RgbImage out = inpaint(img, m, InpaintMode::Diffusion);
    int worst = 0;
    for (std::size_t i = 0; i < out.data().size(); ++i)
        for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(int(out.data()[i][c]) - int(truth.data()[i][c])));
    CHECK(worst <= 1);
}

TEST_CASE("inpaint errors") {
    RgbImage img(16, 16, Rgb8{1, 1, 1});
    // Unfilled island enclosed by Outside texels.
    ValidityMask island = uniform_mask(16, 16, TexelState::Filled);
    for (int y = 4; y < 12; ++y)
        for (int x = 4; x < 12; ++x) island.state.at(x, y) = TexelState::Outside;
    for (int y = 6; y < 10; ++y)
        for (int x = 6; x < 10; ++x) island.state.at(x, y) = TexelState::Unfilled;
    auto code = [&](const ValidityMask& m, InpaintMode mode, const RgbImage* patch) {
        try {
            inpaint(img, m, mode, patch);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io;
    };
    CHECK(code(island, InpaintMode::Diffusion, nullptr) == ErrorCode::NoBoundary);
    CHECK(code(uniform_mask(16, 16, TexelState::Unfilled), InpaintMode::Exemplar, nullptr) == ErrorCode::NoBoundary);
    CHECK(code(hole_mask(16, 16, 2, 2, 5, 5), InpaintMode::PatchTile, nullptr) == ErrorCode::MissingPatch);
    CHECK(parse_inpaint_mode("patch_tile") == InpaintMode::PatchTile);
    CHECK(to_string(InpaintMode::Exemplar) == "exemplar");
}

TEST_CASE("inpaint is mask-monotone: Filled and Outside texels are bit-identical in every mode") {
    std::mt19937 rng(5);
    const int w = 48, h = 40;
    RgbImage img(w, h);
    for (auto& p : img.data()) p = {std::uint8_t(rng()), std::uint8_t(rng()), std::uint8_t(rng())};
    for (int trial = 0; trial < 3; ++trial) {
        ValidityMask m = uniform_mask(w, h, TexelState::Filled);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const unsigned r = rng() % 10;
                if (x > 2 && y > 2 && r < 3) m.state.at(x, y) = TexelState::Unfilled;
                if (r == 9) {
                    m.state.at(x, y) = TexelState::Outside;
                    m.chart.at(x, y) = -1;
                }
            }
        RgbImage patch(6, 6);
        for (auto& p : patch.data()) p = {std::uint8_t(rng()), std::uint8_t(rng()), std::uint8_t(rng())};
        InpaintOptions o;
        o.seed = static_cast<std::uint32_t>(trial + 1);
        for (InpaintMode mode : kModes) {
            const RgbImage out = inpaint(img, m, mode, &patch, o);
            int changed = 0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (m.state.at(x, y) != TexelState::Unfilled) changed += out.at(x, y) != img.at(x, y);
            CHECK(changed == 0);
            CHECK(inpaint(img, m, mode, &patch, o) == out);  // seeded, deterministic
        }
    }
}

TEST_CASE("gutter dilation writes only Outside texels next to charts") {
    const Baked b = bake_fixture("two_garment_mannequin", TexturePattern::Checker, kLabelTop, 96, 256);
    RgbImage img = inpaint(b.result.texture, b.result.mask, InpaintMode::Exemplar);
    const RgbImage before = img;
    const int rings = 2;
    dilate_gutter(img, b.result.mask, rings);
    const ValidityMask& m = b.result.mask;
    int written = 0, bad = 0;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            if (img.at(x, y) == before.at(x, y)) continue;
            ++written;
            if (m.state.at(x, y) != TexelState::Outside) {
                ++bad;
                continue;
            }
            bool near = false;
            for (int dy = -rings; dy <= rings && !near; ++dy)
                for (int dx = -rings; dx <= rings; ++dx)
                    if (m.state.contains(x + dx, y + dy) && m.state.at(x + dx, y + dy) != TexelState::Outside) near = true;
            bad += !near;
        }
    CHECK(written > 0);
    CHECK(bad == 0);
}
