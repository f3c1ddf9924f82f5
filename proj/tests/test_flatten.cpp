#include "oracles.hpp"

#include "peel/error.hpp"
#include "peel/fixtures.hpp"
#include "peel/flatten.hpp"
#include "peel/pipeline.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <unordered_set>

using namespace peel;

namespace {

TriMesh flat_grid(int n, double step) {
    TriMesh m;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) m.vertices.emplace_back(i * step + 0.01 * j * j * step, j * step, 0.0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int a = j * (n + 1) + i;
            m.faces.push_back({a, a + 1, a + n + 2});
            m.faces.push_back({a, a + n + 2, a + n + 1});
        }
    return m;
}

/// Open cylinder wall with the faces on either side of the generator at angle 0 disconnected.
TriMesh split_cylinder() {
    const TriMesh c = make_open_cylinder(0.5, 0.5, -0.5, 0.5, 96, 24);
    std::unordered_set<std::uint64_t> cut;
    for (std::size_t a = 0; a < c.vertices.size(); ++a)
        for (std::size_t b = a + 1; b < c.vertices.size(); ++b) {
            const Vec3& p = c.vertices[a];
            const Vec3& q = c.vertices[b];
            const bool on_line = std::abs(p.z()) < 1e-9 && p.x() > 0 && std::abs(q.z()) < 1e-9 && q.x() > 0;
            if (on_line) cut.insert(edge_key(static_cast<int>(a), static_cast<int>(b)));
        }
    const auto pieces = split_surface(c, cut);
    REQUIRE(pieces.size() == 1);
    return pieces[0].mesh;
}

UVChart chart_from(const TriMesh& m) { return conformal_flatten(m); }

}  // namespace

TEST_CASE("single triangle flattens to a similar triangle") {
    TriMesh t;
    t.vertices = {{0.1, 0.2, 0.3}, {1.4, -0.2, 0.9}, {0.3, 1.1, -0.5}};
    t.faces = {{0, 1, 2}};
    const UVChart c = conformal_flatten(t);
    const auto qc = oracle::qc_ratios(t, c.uv);
    CHECK(std::abs(qc[0] - 1.0) <= 1e-9);
    CHECK(oracle::max_angle_error(t, c.uv) < 1e-9);
    CHECK(oracle::flipped(t, c.uv) == 0);
    // Farthest pair pinned to (0,0) and (1,0).
    CHECK(c.uv[static_cast<std::size_t>(c.pinned[0])] == Vec2(0, 0));
    CHECK(c.uv[static_cast<std::size_t>(c.pinned[1])] == Vec2(1, 0));
}

TEST_CASE("planar patch is congruent up to similarity") {
    const TriMesh g = flat_grid(12, 0.05);
    const UVChart c = conformal_flatten(g);
    CHECK(oracle::max_angle_error(g, c.uv) < 1e-6);
    CHECK(oracle::flipped(g, c.uv) == 0);
    CHECK(c.residual <= 1e-10);
    CHECK(c.stats.angle_error_max == doctest::Approx(oracle::max_angle_error(g, c.uv)).epsilon(1e-6));
    // Edge length ratios are constant.
    const double ratio = (c.uv[1] - c.uv[0]).norm() / (g.vertices[1] - g.vertices[0]).norm();
    for (const Face& f : g.faces)
        for (int k = 0; k < 3; ++k) {
            const double r3 = (g.vertices[f[(k + 1) % 3]] - g.vertices[f[k]]).norm();
            const double r2 = (c.uv[f[(k + 1) % 3]] - c.uv[f[k]]).norm();
            CHECK(r2 / r3 == doctest::Approx(ratio).epsilon(1e-6));
        }
}

TEST_CASE("distortion stats agree with the closed-form singular values") {
    const TriMesh g = flat_grid(6, 0.1);
    std::vector<Vec2> uv;
    for (const Vec3& p : g.vertices) uv.emplace_back(2.0 * p.x() + 0.3 * p.y(), 0.7 * p.y());
    const DistortionStats s = distortion_stats(g, uv);
    const auto qc = oracle::qc_ratios(g, uv);
    for (std::size_t f = 0; f < qc.size(); ++f) CHECK(s.qc_ratio[f] == doctest::Approx(qc[f]).epsilon(1e-9));
    CHECK(s.qc_p90 == doctest::Approx(oracle::percentile(qc, 0.9)).epsilon(1e-9));
    CHECK(s.angle_error_max == doctest::Approx(oracle::max_angle_error(g, uv)).epsilon(1e-9));
}

TEST_CASE("cylinder wall split along one generator flattens to a near rectangle") {
    const TriMesh cyl = split_cylinder();
    CHECK(is_disk(cyl.faces));
    const UVChart c = conformal_flatten(cyl);
    CHECK(oracle::flipped(cyl, c.uv) == 0);
    CHECK(oracle::percentile(oracle::qc_ratios(cyl, c.uv), 0.9) <= 1.05);
    CHECK(c.residual <= 1e-10);
}

TEST_CASE("closed or annular surfaces are not disks") {
    const TriMesh ico = make_icosphere(1, 1.0);
    const TriMesh tube = make_open_cylinder(0.5, 0.5, 0, 1, 16, 4);
    CHECK(!is_disk(ico.faces));
    CHECK(!is_disk(tube.faces));
    for (const TriMesh* m : {&ico, &tube}) {
        try {
            conformal_flatten(*m);
            FAIL("expected NonDiskTopology");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NonDiskTopology);
        }
    }
}

TEST_CASE("cut_to_disk opens a tube and a sphere; flatten_partition then succeeds without flips") {
    for (const TriMesh& m : {make_open_cylinder(0.5, 0.5, 0, 1, 32, 8), make_icosphere(2, 1.0)}) {
        const DiskCut cut = cut_to_disk(m);
        CHECK(is_disk(cut.piece.mesh.faces));
        CHECK(cut.piece.mesh.faces.size() == m.faces.size());
        CHECK(!cut.cut_vertices.empty());

        Partition p;
        p.submesh = m;
        p.layer = 1;
        for (std::size_t v = 0; v < m.vertices.size(); ++v) p.vertex_origin.push_back(static_cast<int>(v));
        for (std::size_t f = 0; f < m.faces.size(); ++f) p.face_origin.push_back(static_cast<int>(f));
        p.is_seam.assign(m.vertices.size(), 0);
        const auto charts = flatten_partition(p, 0);
        std::size_t faces = 0;
        for (const UVChart& c : charts) {
            faces += c.mesh.faces.size();
            CHECK(oracle::flipped(c.mesh, c.uv) == 0);
            CHECK(c.residual <= 1e-10);
        }
        CHECK(faces == m.faces.size());
    }
}

TEST_CASE("flattening is deterministic") {
    const TriMesh cyl = split_cylinder();
    const UVChart a = conformal_flatten(cyl);
    const UVChart b = conformal_flatten(cyl);
    CHECK(a.uv == b.uv);
    CHECK(a.pinned == b.pinned);
}

TEST_CASE("one square chart fills the atlas minus the gutter") {
    const UVChart c = chart_from(flat_grid(1, 1.0));
    const int res = 64, g = 2;
    const UVAtlas a = pack_atlas({c}, res, g);
    const ChartPlacement& p = a.placement[0];
    CHECK(p.texel_x == 0);
    CHECK(p.texel_y == 0);
    const double span = (res - 2.0 * g) / res;
    CHECK((p.bbox_max - p.bbox_min).maxCoeff() == doctest::Approx(span).epsilon(1e-9));
    CHECK(p.bbox_min.x() == doctest::Approx(double(g) / res));
    CHECK(p.bbox_min.y() == doctest::Approx(double(g) / res));
    for (std::size_t v = 0; v < c.uv.size(); ++v) {
        const Vec2 uv = a.atlas_uv(0, static_cast<int>(v));
        CHECK(uv.x() >= p.bbox_min.x() - 1e-12);
        CHECK(uv.y() <= p.bbox_max.y() + 1e-12);
    }
}

TEST_CASE("two identical charts get disjoint placements and the same scale") {
    const UVChart c = chart_from(flat_grid(3, 0.2));
    const UVAtlas a = pack_atlas({c, c}, 128, 2);
    CHECK(a.placement[0].scale == a.placement[1].scale);
    const auto& p = a.placement[0];
    const auto& q = a.placement[1];
    const bool apart = p.texel_x + p.texel_w <= q.texel_x || q.texel_x + q.texel_w <= p.texel_x ||
                       p.texel_y + p.texel_h <= q.texel_y || q.texel_y + q.texel_h <= p.texel_y;
    CHECK(apart);
}

TEST_CASE("packing invalid inputs") {
    const UVChart c = chart_from(flat_grid(2, 0.2));
    auto code = [&](int res, int gutter) {
        try {
            pack_atlas({c}, res, gutter);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io;  // sentinel: no throw
    };
    CHECK(code(8, 1) == ErrorCode::InvalidArgument);
    CHECK(code(64, 0) == ErrorCode::InvalidArgument);
    CHECK(code(64, 32) == ErrorCode::CannotFit);
    CHECK(code(64, 31) == ErrorCode::Io);
}

TEST_CASE("eight random fixture charts pack at >= 40% utilization, disjointly, without flips") {
    std::vector<UVChart> pool;
    for (const std::string& name : fixture_names()) {
        const Fixture fx = make_fixture(name, 128, TexturePattern::Checker);
        const PeelStack st = peel_render(fx.scene);
        for (std::uint8_t label : fx.garment_labels) {
            const UnwrapResult u = unwrap(reconstruct_garment(st, label).mesh, 1024, 2);
            for (const UVChart& c : u.atlas.charts) {
                CHECK(oracle::flipped(c.mesh, c.uv) == 0);
                CHECK(c.residual <= 1e-10);
                pool.push_back(c);
            }
        }
    }
    REQUIRE(pool.size() >= 4);
    for (unsigned seed = 1; seed <= 5; ++seed) {
        std::mt19937 rng(seed);
        std::vector<UVChart> pick;
        for (int i = 0; i < 8; ++i) pick.push_back(pool[rng() % pool.size()]);
        const int res = 1024, g = 2;
        const UVAtlas a = pack_atlas(pick, res, g);

        // Area sum over the produced layout, and flips after placement.
        double area = 0.0;
        std::vector<int> owner(static_cast<std::size_t>(res * res), -1);
        int overlaps = 0;
        for (std::size_t c = 0; c < a.charts.size(); ++c) {
            std::vector<Vec2> uv;
            for (std::size_t v = 0; v < a.charts[c].uv.size(); ++v) uv.push_back(a.atlas_uv(c, static_cast<int>(v)));
            CHECK(oracle::flipped(a.charts[c].mesh, uv) == 0);
            for (const Face& f : a.charts[c].mesh.faces) {
                const Vec2 e1 = uv[f[1]] - uv[f[0]], e2 = uv[f[2]] - uv[f[0]];
                area += 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
            }
            // Texels meeting the chart's bounding box, dilated by the gutter. The
            // 1e-9 texel slack absorbs rounding of box edges that sit on texel edges.
            Vec2 mn = uv[0], mx = uv[0];
            for (const Vec2& p : uv) {
                mn = mn.cwiseMin(p);
                mx = mx.cwiseMax(p);
            }
            const int x0 = static_cast<int>(std::floor(mn.x() * res + 1e-9)) - g;
            const int x1 = static_cast<int>(std::ceil(mx.x() * res - 1e-9)) - 1 + g;
            const int y0 = static_cast<int>(std::floor(mn.y() * res + 1e-9)) - g;
            const int y1 = static_cast<int>(std::ceil(mx.y() * res - 1e-9)) - 1 + g;
            CHECK(x0 >= 0);
            CHECK(y0 >= 0);
            CHECK(x1 < res);
            CHECK(y1 < res);
            for (int y = std::max(0, y0); y <= std::min(res - 1, y1); ++y)
                for (int x = std::max(0, x0); x <= std::min(res - 1, x1); ++x) {
                    int& o = owner[static_cast<std::size_t>(y * res + x)];
                    overlaps += o >= 0;
                    o = static_cast<int>(c);
                }
        }
        CHECK(overlaps == 0);
        CHECK(area == doctest::Approx(a.utilization()).epsilon(1e-9));
        CHECK(area >= 0.40);
    }
}
