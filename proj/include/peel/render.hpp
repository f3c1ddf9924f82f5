#pragma once

#include "peel/bvh.hpp"
#include "peel/camera.hpp"
#include "peel/mesh.hpp"
#include "peel/peel_stack.hpp"

#include <vector>

namespace peel {

struct Scene {
    std::vector<TriMesh> meshes;
    PinholeCamera camera;

    std::size_t face_count() const;
    double diameter() const;
    /// Empty when every face has a label > 0 and textured meshes carry uv.
    std::vector<std::string> validate() const;
};

struct RenderOptions {
    int layers = kDefaultLayers;
    int threads = 0;
    bool bilinear_texture = false;
    /// Shade normals from interpolated vertex normals instead of face normals.
    bool interpolated_normals = false;
};

/// One merged ray/surface intersection.
struct SurfaceHit {
    double depth = 0.0;  // camera-space z
    int mesh = -1;
    int face = -1;
    Vec3 bary = Vec3::Zero();
};

/// BVH over every scene triangle plus the per-ray peeling rules: hits beyond
/// znear, sorted by depth, with hits closer than 1e-6 * scene diameter merged.
/// A merged cluster mixing front- and back-facing triangles is a tangential
/// touch (the ray grazes a silhouette edge or vertex) and is discarded.
class PeelRaycaster {
public:
    explicit PeelRaycaster(const Scene& scene);

    const Scene& scene() const { return scene_; }
    double merge_epsilon() const { return eps_hit_; }

    /// Merged hits along the ray through continuous pixel (px, py).
    std::vector<SurfaceHit> peel_pixel(double px, double py) const;
    /// Merged hits along an arbitrary world ray; t is in units of `dir`.
    std::vector<SurfaceHit> peel_ray(const Vec3& origin, const Vec3& dir, double t_min) const;

    Rgb8 shade(const SurfaceHit& hit, bool bilinear) const;
    /// World-space normal facing against `dir`.
    Vec3 facing_normal(const SurfaceHit& hit, const Vec3& dir, bool interpolated) const;
    Vec3 position(const SurfaceHit& hit) const;

private:
    const Scene& scene_;
    TriangleBvh bvh_;
    double eps_hit_ = 0.0;
};

/// Multi-hit ray casting into an L-layer peel stack. Throws EmptyScene.
PeelStack peel_render(const Scene& scene, const RenderOptions& options = {});

/// First-layer camera-space normal image; identical to layer 1 of peel_render.
Image2D<Vec3f> render_normal_map(const Scene& scene, const RenderOptions& options = {});

/// Color of a surface point: texture when the mesh has one and uv, else the
/// face color, else a neutral grey.
Rgb8 surface_color(const TriMesh& mesh, int face, const Vec3& bary, bool bilinear);

/// Texture lookup with repeat wrapping; v = 0 is the bottom image row.
Rgb8 sample_texture(const RgbImage& texture, const Vec2& uv, bool bilinear);

}  // namespace peel
