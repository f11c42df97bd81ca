#include "graft/scene.hpp"

#include <cmath>

#include "graft/error.hpp"

namespace graft {

void PointCloud::validate() const {
    if (points.size() % 4 != 0) throw ValidationError("point buffer length not divisible by 4");
    for (int64_t i = 0; i < size(); ++i) {
        if (!std::isfinite(x(i)) || !std::isfinite(y(i)) || !std::isfinite(z(i)))
            throw ValidationError("non-finite point coordinate");
        const double inten = intensity(i);
        if (!(inten >= 0.0 && inten <= 255.0)) throw ValidationError("intensity outside [0,255]");
    }
}

Category category_from_name(const std::string& name) {
    if (name == "car") return Category::kCar;
    if (name == "pedestrian") return Category::kPedestrian;
    return Category::kOther;
}

std::string category_to_name(Category c, const std::string& other_name) {
    switch (c) {
        case Category::kCar: return "car";
        case Category::kPedestrian: return "pedestrian";
        case Category::kOther: return other_name.empty() ? "other" : other_name;
    }
    return "other";
}

Box3D Box3D::from_center(const Eigen::Vector3d& center, const Eigen::Vector3d& half_extents,
                         double yaw) {
    Eigen::Matrix3d rot;
    rot = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ());
    Box3D box;
    for (int i = 0; i < 8; ++i) {
        const double sx = (i & 1) ? 1.0 : -1.0;
        const double sy = (i & 2) ? 1.0 : -1.0;
        const double sz = (i & 4) ? 1.0 : -1.0;
        box.corners[size_t(i)] =
            center + rot * Eigen::Vector3d(sx * half_extents.x(), sy * half_extents.y(),
                                           sz * half_extents.z());
    }
    return box;
}

Eigen::Vector3d Box3D::center() const {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const auto& p : corners) c += p;
    return c / 8.0;
}

Eigen::Matrix3d Box3D::axes() const {
    Eigen::Matrix3d a;
    a.col(0) = (corners[1] - corners[0]).normalized();
    a.col(1) = (corners[2] - corners[0]).normalized();
    a.col(2) = (corners[4] - corners[0]).normalized();
    return a;
}

Eigen::Vector3d Box3D::half_extents() const {
    return {(corners[1] - corners[0]).norm() / 2.0, (corners[2] - corners[0]).norm() / 2.0,
            (corners[4] - corners[0]).norm() / 2.0};
}

double Box3D::volume() const {
    const Eigen::Vector3d h = half_extents();
    return 8.0 * h.x() * h.y() * h.z();
}

bool Box3D::contains(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d u = axes().transpose() * (p - center());
    const Eigen::Vector3d h = half_extents();
    return std::abs(u.x()) <= h.x() && std::abs(u.y()) <= h.y() && std::abs(u.z()) <= h.z();
}

Box3D Box3D::expanded(double factor) const {
    Box3D out = *this;
    const Eigen::Vector3d c = center();
    for (auto& p : out.corners) p = c + factor * (p - c);
    return out;
}

void Box3D::validate() const {
    for (const auto& p : corners)
        if (!p.allFinite()) throw ValidationError("non-finite box corner");
    const Eigen::Vector3d ex = corners[1] - corners[0];
    const Eigen::Vector3d ey = corners[2] - corners[0];
    const Eigen::Vector3d ez = corners[4] - corners[0];
    const double scale = std::max({ex.norm(), ey.norm(), ez.norm(), 1e-12});
    if (ex.norm() <= 0.0 || ey.norm() <= 0.0 || ez.norm() <= 0.0 || volume() <= 0.0)
        throw ValidationError("degenerate box (zero extent)");
    const double tol = 1e-6 * scale;
    if (std::abs(ex.dot(ey)) > tol * scale || std::abs(ex.dot(ez)) > tol * scale ||
        std::abs(ey.dot(ez)) > tol * scale)
        throw ValidationError("box edges not orthogonal");
    for (int i = 0; i < 8; ++i) {
        Eigen::Vector3d expect = corners[0];
        if (i & 1) expect += ex;
        if (i & 2) expect += ey;
        if (i & 4) expect += ez;
        if ((corners[size_t(i)] - expect).norm() > tol)
            throw ValidationError("corners do not form a rectangular cuboid");
    }
    if (!(visibility >= 0.0 && visibility <= 1.0)) throw ValidationError("visibility outside [0,1]");
    if (num_lidar_points < 0) throw ValidationError("negative num_lidar_points");
}

int64_t count_points_in_box(const PointCloud& cloud, const Box3D& box) {
    const Eigen::Matrix3d at = box.axes().transpose();
    const Eigen::Vector3d c = box.center();
    const Eigen::Vector3d h = box.half_extents();
    int64_t n = 0;
    for (int64_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector3d u = at * (cloud.xyz(i) - c);
        if (std::abs(u.x()) <= h.x() && std::abs(u.y()) <= h.y() && std::abs(u.z()) <= h.z()) ++n;
    }
    return n;
}

void CameraFrame::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("non-positive image dimensions");
    if (int64_t(image.size()) != int64_t(width) * height * 3)
        throw ValidationError("image buffer size mismatch");
    if (!(intrinsics(0, 0) > 0.0 && intrinsics(1, 1) > 0.0))
        throw ValidationError("intrinsics must have positive focal entries");
    const Eigen::Matrix3d r = extrinsics.block<3, 3>(0, 0);
    if ((r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6)
        throw ValidationError("extrinsic rotation block not orthonormal");
    const Eigen::RowVector4d bottom = extrinsics.row(3);
    if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-12)
        throw ValidationError("extrinsics bottom row must be [0,0,0,1]");
}

void SceneSample::validate() const {
    camera.validate();
    lidar.validate();
    for (const auto& box : boxes) {
        box.validate();
        const int64_t recount = count_points_in_box(lidar, box);
        if (recount != box.num_lidar_points)
            throw ValidationError("num_lidar_points mismatch for instance '" + box.instance_id +
                                  "': stored " + std::to_string(box.num_lidar_points) +
                                  ", recount " + std::to_string(recount));
    }
}

}  // namespace graft
