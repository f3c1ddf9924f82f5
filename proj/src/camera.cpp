#include "peel/camera.hpp"

#include "peel/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <sstream>

namespace peel {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::PointBehindCamera: return "PointBehindCamera";
        case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
        case ErrorCode::InvalidStack: return "InvalidStack";
        case ErrorCode::EmptyScene: return "EmptyScene";
        case ErrorCode::AllVerticesFill: return "AllVerticesFill";
        case ErrorCode::NonDiskTopology: return "NonDiskTopology";
        case ErrorCode::FlippedTriangles: return "FlippedTriangles";
        case ErrorCode::SolverSingular: return "SolverSingular";
        case ErrorCode::CannotFit: return "CannotFit";
        case ErrorCode::CameraMismatch: return "CameraMismatch";
        case ErrorCode::NoBoundary: return "NoBoundary";
        case ErrorCode::MissingPatch: return "MissingPatch";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NotADistribution: return "NotADistribution";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::UnknownFixture: return "UnknownFixture";
        case ErrorCode::Io: return "Io";
        case ErrorCode::Format: return "Format";
    }
    return "Unknown";
}

PinholeCamera PinholeCamera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                                     int width, int height, double hfov, double znear) {
    const Vec3 z = (target - eye).normalized();
    // Image y points down, so camera y is the negated up vector orthogonalized against z.
    Vec3 y = -(up - up.dot(z) * z);
    if (y.norm() < 1e-12) throw Error(ErrorCode::InvalidArgument, "look_at: up is parallel to view");
    y.normalize();
    const Vec3 x = y.cross(z);

    PinholeCamera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = 0.5 * width / std::tan(0.5 * hfov);
    cam.fy = cam.fx;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.rotation.row(0) = x.transpose();
    cam.rotation.row(1) = y.transpose();
    cam.rotation.row(2) = z.transpose();
    cam.translation = -cam.rotation * eye;
    cam.znear = znear;
    return cam;
}

Vec3 PinholeCamera::ray_direction(double px, double py) const {
    return direction_to_world(Vec3((px - cx) / fx, (py - cy) / fy, 1.0));
}

double PinholeCamera::hfov() const { return 2.0 * std::atan(0.5 * width / fx); }

std::vector<std::string> PinholeCamera::validate() const {
    std::vector<std::string> issues;
    auto add = [&](const std::string& s) { issues.push_back(s); };
    if (width <= 0 || height <= 0) add("image dimensions must be positive");
    if (!(fx > 0.0) || !(fy > 0.0)) add("focal lengths must be positive");
    if (!(cx >= 0.0 && cx < width)) add("cx outside [0, width)");
    if (!(cy >= 0.0 && cy < height)) add("cy outside [0, height)");
    if (!(znear > 0.0)) add("znear must be positive");
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho < 1e-9)) {
        std::ostringstream os;
        os << "rotation not orthonormal (|R^T R - I|_inf = " << ortho << ")";
        add(os.str());
    }
    if (!(std::abs(rotation.determinant() - 1.0) <= 1e-9)) add("rotation determinant is not +1");
    if (!translation.allFinite()) add("translation not finite");
    return issues;
}

Projection project(const PinholeCamera& camera, const Vec3& point) {
    const Vec3 c = camera.to_camera(point);
    if (!(c.z() >= camera.znear)) {
        std::ostringstream os;
        os << "camera-space z = " << c.z() << " < znear = " << camera.znear;
        throw Error(ErrorCode::PointBehindCamera, os.str());
    }
    return {Vec2(camera.fx * c.x() / c.z() + camera.cx, camera.fy * c.y() / c.z() + camera.cy),
            c.z()};
}

Vec3 unproject(const PinholeCamera& camera, const Vec2& pixel, double depth) {
    if (!(depth > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "unproject requires depth > 0");
    const Vec3 c((pixel.x() - camera.cx) / camera.fx * depth,
                 (pixel.y() - camera.cy) / camera.fy * depth, depth);
    return camera.to_world(c);
}

}  // namespace peel
