#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace peel {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Result of projecting a world point: continuous pixel coordinates and camera-space Z.
struct Projection {
    Vec2 pixel;
    double depth = 0.0;
};

/// Pinhole camera. Pixel (i, j) has its center at continuous coordinate (i, j);
/// camera space is x right, y down, z forward. `rotation`/`translation` map
/// world to camera: Xc = R * Xw + t.
struct PinholeCamera {
    int width = 0;
    int height = 0;
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double znear = 1e-3;

    /// Camera at `eye` looking at `target`, `up` mapping to image-up. `hfov` in radians.
    static PinholeCamera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width,
                                 int height, double hfov, double znear = 1e-3);

    Vec3 center() const { return -rotation.transpose() * translation; }
    Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
    Vec3 to_world(const Vec3& cam) const { return rotation.transpose() * (cam - translation); }
    Vec3 direction_to_world(const Vec3& cam_dir) const { return rotation.transpose() * cam_dir; }
    Vec3 direction_to_camera(const Vec3& world_dir) const { return rotation * world_dir; }

    /// World-space ray direction through a pixel, scaled so its camera-space z is 1.
    /// A ray parameter t along it is therefore camera depth.
    Vec3 ray_direction(double px, double py) const;

    double hfov() const;
    /// Lateral size of one pixel at camera depth `depth`: depth * 2 tan(hfov/2) / W.
    double pixel_footprint(double depth) const { return depth / fx; }

    /// Empty when every invariant holds.
    std::vector<std::string> validate() const;
};

/// Throws Error(PointBehindCamera) when camera-space z < znear.
Projection project(const PinholeCamera& camera, const Vec3& point);

/// Throws Error(NonPositiveDepth) when depth <= 0.
Vec3 unproject(const PinholeCamera& camera, const Vec2& pixel, double depth);

}  // namespace peel
