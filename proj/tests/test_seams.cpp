#include "oracles.hpp"

#include "peel/error.hpp"
#include "peel/fixtures.hpp"
#include "peel/pipeline.hpp"
#include "peel/reconstruct.hpp"
#include "peel/seams.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <set>

using namespace peel;

namespace {

TriMesh two_triangles() {
    TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    m.faces = {{0, 1, 2}, {1, 3, 2}};
    return m;
}

TriMesh strip(int cells) {
    TriMesh m;
    for (int i = 0; i <= cells; ++i) {
        m.vertices.emplace_back(i, 0, 0);
        m.vertices.emplace_back(i, 1, 0);
    }
    for (int i = 0; i < cells; ++i) {
        const int a = 2 * i;
        m.faces.push_back({a, a + 2, a + 1});
        m.faces.push_back({a + 1, a + 2, a + 3});
    }
    return m;
}

/// Distance from p to the nearest plane through the eye tangent to the unit
/// sphere at the origin, by sweeping the tangent-plane family.
double silhouette_plane_distance(const Vec3& p, const Vec3& eye) {
    const double c = eye.norm();
    const Vec3 axis = eye / c;
    Vec3 u = axis.cross(Vec3(0, 1, 0));
    if (u.norm() < 1e-9) u = axis.cross(Vec3(1, 0, 0));
    u.normalize();
    const Vec3 w = axis.cross(u);
    // Tangent planes through the eye have unit normals at angle acos(1/c) from
    // the axis; each contains the eye and touches the sphere once.
    const double along = 1.0 / c;
    const double across = std::sqrt(1.0 - along * along);
    double best = 1e300;
    const int steps = 20000;
    for (int k = 0; k < steps; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / steps;
        const Vec3 n = along * axis + across * (std::cos(phi) * u + std::sin(phi) * w);
        best = std::min(best, std::abs(n.dot(p - eye)));
    }
    return best;
}

}  // namespace

TEST_CASE("assign_layers: FILL vertices take the nearest tagged layer, ties to the lower") {
    LayeredMesh m;
    m.add_vertex({0, 0, 0}, 1);
    m.add_vertex({2, 0, 0}, 3);
    m.add_vertex({0.2, 0, 0}, kFillLayer);
    m.add_vertex({1.9, 0, 0}, kFillLayer);
    m.add_vertex({1, 0, 0}, kFillLayer);  // equidistant
    CHECK(assign_layers(m) == std::vector<int>{1, 3, 1, 3, 1});

    LayeredMesh fill;
    fill.add_vertex({0, 0, 0}, kFillLayer);
    try {
        assign_layers(fill);
        FAIL("expected AllVerticesFill");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::AllVerticesFill);
    }
}

TEST_CASE("uniform single-layer mesh has no seams and splits into one identical partition") {
    const TriMesh m = strip(4);
    const SeamSet s = estimate_seams(m, std::vector<int>(m.vertices.size(), 2));
    CHECK(s.vertices.empty());
    CHECK(s.face_layer == std::vector<int>(m.faces.size(), 2));
    const auto parts = split_partitions(m, s.face_layer, s.is_seam);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].layer == 2);
    CHECK(parts[0].submesh.vertices == m.vertices);
    CHECK(parts[0].submesh.faces == m.faces);
}

TEST_CASE("two triangles on layers 1 and 2 share two seam vertices") {
    const TriMesh m = two_triangles();
    const SeamSet s = estimate_seams(m, {1, 2, 2, 2});
    CHECK(s.face_layer == std::vector<int>{1, 2});
    CHECK(s.vertices == std::vector<int>{1, 2});

    const auto parts = split_partitions(m, s.face_layer, s.is_seam);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].layer == 1);
    CHECK(parts[1].layer == 2);
    std::size_t total_vertices = 0;
    for (const auto& p : parts) {
        CHECK(p.submesh.faces.size() == 1);
        total_vertices += p.submesh.vertices.size();
    }
    CHECK(total_vertices - m.vertices.size() == 2);
    CHECK(parts[0].vertex_origin == std::vector<int>{0, 1, 2});
    CHECK(parts[1].vertex_origin == std::vector<int>{1, 2, 3});
    CHECK(parts[1].submesh.faces[0] == Face{0, 2, 1});
}

TEST_CASE("face layer is the minimum of the vertex layers") {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> layer(1, 4);
    const TriMesh m = strip(30);
    std::vector<int> vl(m.vertices.size());
    for (int& v : vl) v = layer(rng);
    const SeamSet s = estimate_seams(m, vl);
    for (std::size_t f = 0; f < m.faces.size(); ++f)
        CHECK(s.face_layer[f] == std::min({vl[m.faces[f][0]], vl[m.faces[f][1]], vl[m.faces[f][2]]}));
    // Brute-force seam rule.
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
        std::set<int> seen;
        for (std::size_t f = 0; f < m.faces.size(); ++f)
            for (int k : m.faces[f])
                if (k == static_cast<int>(v)) seen.insert(s.face_layer[f]);
        CHECK((s.is_seam[v] != 0) == (seen.size() >= 2));
    }
}

TEST_CASE("small partitions merge into the neighbour with the longest shared boundary") {
    const TriMesh m = strip(6);  // 12 faces
    std::vector<int> fl(12, 1);
    fl[5] = 2;
    fl[6] = 2;  // two-face island
    const auto merged = merge_small_partitions(m, fl);
    CHECK(merged == std::vector<int>(12, 1));
    fl[7] = 2;  // three faces stay
    CHECK(merge_small_partitions(m, fl) == fl);
}

TEST_CASE("sphere seams hug the camera silhouette") {
    const Fixture fx = make_fixture("sphere", 128, TexturePattern::Constant);
    const PeelStack st = peel_render(fx.scene);
    const ReconstructResult r = reconstruct_garment(st, kLabelTop);
    const auto vl = assign_layers(r.mesh);
    const SeamSet s = estimate_seams(r.mesh.mesh, vl);
    REQUIRE(!s.vertices.empty());
    const Vec3 eye = st.camera().center();
    const double tol = 2.0 * st.mean_pixel_footprint();
    double worst = 0.0;
    for (int v : s.vertices) worst = std::max(worst, silhouette_plane_distance(r.mesh.mesh.vertices[v], eye));
    CHECK(worst <= tol);

    // The seam edges (both endpoints seam, shared by a layer-1 and a layer-2 face) form closed loops.
    std::map<std::uint64_t, std::set<int>> edge_layers;
    for (std::size_t f = 0; f < r.mesh.mesh.faces.size(); ++f)
        for (int k = 0; k < 3; ++k)
            edge_layers[edge_key(r.mesh.mesh.faces[f][k], r.mesh.mesh.faces[f][(k + 1) % 3])].insert(s.face_layer[f]);
    std::map<int, int> degree;
    for (const auto& [key, layers] : edge_layers)
        if (layers.size() >= 2) {
            ++degree[static_cast<int>(key >> 32)];
            ++degree[static_cast<int>(key & 0xffffffffu)];
        }
    CHECK(!degree.empty());
    for (const auto& [v, d] : degree) CHECK(d % 2 == 0);
}

TEST_CASE("partitions cover every fixture: faces conserved, vertices covered, seams replicated") {
    for (const std::string& name : fixture_names()) {
        const Fixture fx = make_fixture(name, 96, TexturePattern::Checker);
        const PeelStack st = peel_render(fx.scene);
        for (std::uint8_t label : fx.garment_labels) {
            CAPTURE(name);
            CAPTURE(int(label));
            const ReconstructResult r = reconstruct_garment(st, label);
            const UnwrapResult u = unwrap(r.mesh, 512, 2);
            const TriMesh& m = r.mesh.mesh;
            std::vector<int> face_hits(m.faces.size(), 0);
            std::vector<int> vertex_hits(m.vertices.size(), 0);
            for (const Partition& p : u.partitions) {
                for (std::size_t f = 0; f < p.face_origin.size(); ++f) {
                    ++face_hits[p.face_origin[f]];
                    CHECK(u.face_layer[p.face_origin[f]] == p.layer);
                    for (int k = 0; k < 3; ++k)
                        CHECK(p.vertex_origin[p.submesh.faces[f][k]] == m.faces[p.face_origin[f]][k]);
                }
                for (int v : p.vertex_origin) ++vertex_hits[v];
            }
            for (int h : face_hits) CHECK(h == 1);
            for (int h : vertex_hits) CHECK(h >= 1);
            for (int v : u.seams.vertices) CHECK(vertex_hits[v] >= 2);
        }
    }
}

TEST_CASE("seam estimation is idempotent and deterministic") {
    const Fixture fx = make_fixture("two_garment_mannequin", 96, TexturePattern::Checker);
    const ReconstructResult r = reconstruct_garment(peel_render(fx.scene), kLabelTop);
    const auto vl = assign_layers(r.mesh);
    const SeamSet a = estimate_seams(r.mesh.mesh, vl);
    const SeamSet b = estimate_seams(r.mesh.mesh, vl);
    CHECK(a.vertices == b.vertices);
    CHECK(a.face_layer == b.face_layer);
    const SeamSet again = seams_from_face_layers(r.mesh.mesh, a.face_layer);
    CHECK(again.vertices == a.vertices);
    const auto merged = merge_small_partitions(r.mesh.mesh, a.face_layer);
    CHECK(merge_small_partitions(r.mesh.mesh, merged) == merged);
}
