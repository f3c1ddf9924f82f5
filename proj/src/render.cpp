#include "peel/render.hpp"

#include "peel/error.hpp"
#include "peel/parallel.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace peel {

namespace {

constexpr Rgb8 kDefaultColor{180, 180, 180};

int wrap(int i, int n) {
    const int r = i % n;
    return r < 0 ? r + n : r;
}

}  // namespace

std::size_t Scene::face_count() const {
    std::size_t n = 0;
    for (const auto& m : meshes) n += m.faces.size();
    return n;
}

double Scene::diameter() const {
    Eigen::AlignedBox3d box;
    for (const auto& m : meshes)
        for (const Vec3& v : m.vertices) box.extend(v);
    return box.isEmpty() ? 0.0 : box.diagonal().norm();
}

std::vector<std::string> Scene::validate() const {
    std::vector<std::string> issues;
    for (std::size_t i = 0; i < meshes.size(); ++i) {
        const TriMesh& m = meshes[i];
        const std::string tag = "mesh " + std::to_string(i) + ": ";
        for (const auto& s : m.validate()) issues.push_back(tag + s);
        if (m.face_labels.size() != m.faces.size()) {
            issues.push_back(tag + "missing per-face labels");
        } else {
            for (auto l : m.face_labels)
                if (l == 0) {
                    issues.push_back(tag + "face label 0 is reserved for background");
                    break;
                }
        }
        if (m.texture && !m.has_uv()) issues.push_back(tag + "texture without uv");
    }
    for (const auto& s : camera.validate()) issues.push_back("camera: " + s);
    return issues;
}

Rgb8 sample_texture(const RgbImage& tex, const Vec2& uv, bool bilinear) {
    const int w = tex.width();
    const int h = tex.height();
    const double fx = uv.x() * w;
    const double fy = (1.0 - uv.y()) * h;
    if (!bilinear) {
        return tex.at(wrap(static_cast<int>(std::floor(fx)), w),
                      wrap(static_cast<int>(std::floor(fy)), h));
    }
    const double sx = fx - 0.5;
    const double sy = fy - 0.5;
    const int x0 = static_cast<int>(std::floor(sx));
    const int y0 = static_cast<int>(std::floor(sy));
    const double ax = sx - x0;
    const double ay = sy - y0;
    Rgb8 out{};
    for (int c = 0; c < 3; ++c) {
        const double v00 = tex.at(wrap(x0, w), wrap(y0, h))[c];
        const double v10 = tex.at(wrap(x0 + 1, w), wrap(y0, h))[c];
        const double v01 = tex.at(wrap(x0, w), wrap(y0 + 1, h))[c];
        const double v11 = tex.at(wrap(x0 + 1, w), wrap(y0 + 1, h))[c];
        const double v = (1 - ay) * ((1 - ax) * v00 + ax * v10) + ay * ((1 - ax) * v01 + ax * v11);
        out[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    return out;
}

PeelRaycaster::PeelRaycaster(const Scene& scene) : scene_(scene) {
    std::vector<TriangleBvh::Triangle> tris;
    tris.reserve(scene.face_count());
    for (std::size_t m = 0; m < scene.meshes.size(); ++m) {
        const TriMesh& mesh = scene.meshes[m];
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            const Face& fc = mesh.faces[f];
            tris.push_back({mesh.vertices[static_cast<std::size_t>(fc[0])],
                            mesh.vertices[static_cast<std::size_t>(fc[1])],
                            mesh.vertices[static_cast<std::size_t>(fc[2])], static_cast<int>(m),
                            static_cast<int>(f)});
        }
    }
    bvh_ = TriangleBvh(std::move(tris));
    eps_hit_ = 1e-6 * scene.diameter();
}

std::vector<SurfaceHit> PeelRaycaster::peel_ray(const Vec3& origin, const Vec3& dir,
                                                double t_min) const {
    thread_local std::vector<RayHit> raw;
    raw.clear();
    bvh_.intersect_all(origin, dir, t_min, raw);
    std::sort(raw.begin(), raw.end(), [](const RayHit& a, const RayHit& b) {
        return a.t < b.t || (a.t == b.t && a.prim < b.prim);
    });

    const double eps_t = eps_hit_ / dir.norm();
    std::vector<SurfaceHit> out;
    std::size_t i = 0;
    while (i < raw.size()) {
        std::size_t j = i + 1;
        while (j < raw.size() && raw[j].t - raw[i].t <= eps_t) ++j;
        bool front = false;
        bool back = false;
        for (std::size_t k = i; k < j; ++k) {
            const auto& tri = bvh_.triangle(raw[k].prim);
            const double s = (tri.b - tri.a).cross(tri.c - tri.a).dot(dir);
            front = front || s < 0.0;
            back = back || s > 0.0;
        }
        if (!(front && back)) {
            const auto& tri = bvh_.triangle(raw[i].prim);
            out.push_back({raw[i].t, tri.mesh, tri.face, raw[i].bary});
        }
        i = j;
    }
    return out;
}

std::vector<SurfaceHit> PeelRaycaster::peel_pixel(double px, double py) const {
    const PinholeCamera& cam = scene_.camera;
    return peel_ray(cam.center(), cam.ray_direction(px, py), cam.znear);
}

Vec3 PeelRaycaster::position(const SurfaceHit& hit) const {
    const TriMesh& m = scene_.meshes[static_cast<std::size_t>(hit.mesh)];
    const Face& f = m.faces[static_cast<std::size_t>(hit.face)];
    return hit.bary[0] * m.vertices[static_cast<std::size_t>(f[0])] +
           hit.bary[1] * m.vertices[static_cast<std::size_t>(f[1])] +
           hit.bary[2] * m.vertices[static_cast<std::size_t>(f[2])];
}

Rgb8 surface_color(const TriMesh& m, int face, const Vec3& bary, bool bilinear) {
    const auto f = static_cast<std::size_t>(face);
    if (m.texture && m.has_uv()) {
        const Vec2 uv = bary[0] * m.corner_uv(f, 0) + bary[1] * m.corner_uv(f, 1) + bary[2] * m.corner_uv(f, 2);
        return sample_texture(*m.texture, uv, bilinear);
    }
    if (m.face_colors.size() == m.faces.size()) return m.face_colors[f];
    return kDefaultColor;
}

Rgb8 PeelRaycaster::shade(const SurfaceHit& hit, bool bilinear) const {
    return surface_color(scene_.meshes[static_cast<std::size_t>(hit.mesh)], hit.face, hit.bary, bilinear);
}

Vec3 PeelRaycaster::facing_normal(const SurfaceHit& hit, const Vec3& dir, bool interpolated) const {
    const TriMesh& m = scene_.meshes[static_cast<std::size_t>(hit.mesh)];
    const auto face = static_cast<std::size_t>(hit.face);
    Vec3 n = m.face_normal(face);
    if (interpolated && m.normals.size() == m.vertices.size()) {
        const Face& f = m.faces[face];
        const Vec3 s = hit.bary[0] * m.normals[static_cast<std::size_t>(f[0])] +
                       hit.bary[1] * m.normals[static_cast<std::size_t>(f[1])] +
                       hit.bary[2] * m.normals[static_cast<std::size_t>(f[2])];
        if (s.norm() > 0.0) n = s.normalized();
    }
    return n.dot(dir) > 0.0 ? Vec3(-n) : n;
}

PeelStack peel_render(const Scene& scene, const RenderOptions& options) {
    if (scene.meshes.empty() || scene.face_count() == 0)
        throw Error(ErrorCode::EmptyScene, "scene has no triangles");
    if (options.layers < 1 || options.layers > kMaxLayers)
        throw Error(ErrorCode::InvalidArgument, "layers must be in [1, 8]");
    if (const auto issues = scene.validate(); !issues.empty())
        throw Error(ErrorCode::InvalidArgument, "invalid scene: " + issues.front());

    const PinholeCamera& cam = scene.camera;
    PeelStack stack(cam, options.layers);
    const PeelRaycaster caster(scene);
    const Vec3 origin = cam.center();

    parallel_for(static_cast<std::size_t>(cam.height), options.threads, [&](std::size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < cam.width; ++x) {
            const Vec3 dir = cam.ray_direction(x, y);
            const auto hits = caster.peel_ray(origin, dir, cam.znear);
            int l = 0;
            float last = 0.0f;
            for (const SurfaceHit& h : hits) {
                if (l == options.layers) break;
                // Hits that collapse to one float depth count as one surface.
                if (static_cast<float>(h.depth) <= last) continue;
                last = static_cast<float>(h.depth);
                const TriMesh& m = scene.meshes[static_cast<std::size_t>(h.mesh)];
                stack.depth(l, x, y) = static_cast<float>(h.depth);
                stack.seg(l, x, y) = m.face_labels[static_cast<std::size_t>(h.face)];
                stack.rgb(l, x, y) = caster.shade(h, options.bilinear_texture);
                const Vec3 n_cam =
                    cam.direction_to_camera(caster.facing_normal(h, dir, options.interpolated_normals));
                stack.normal(l, x, y) = n_cam.normalized().cast<float>();
                ++l;
            }
        }
    });
    return stack;
}

Image2D<Vec3f> render_normal_map(const Scene& scene, const RenderOptions& options) {
    RenderOptions first = options;
    first.layers = 1;
    const PeelStack stack = peel_render(scene, first);
    Image2D<Vec3f> out(stack.width(), stack.height(), Vec3f::Zero());
    for (int y = 0; y < stack.height(); ++y)
        for (int x = 0; x < stack.width(); ++x) out.at(x, y) = stack.normal(0, x, y);
    return out;
}

}  // namespace peel
