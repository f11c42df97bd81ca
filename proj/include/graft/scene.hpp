#ifndef GRAFT_SCENE_HPP
#define GRAFT_SCENE_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace graft {

// Frames: the ego frame is canonical (x forward, y left, z up) and the lidar
// sensor frame coincides with it (identity extrinsic). Camera extrinsics are
// sensor-from-ego. All distances in meters, timestamps in seconds.

struct PointCloud {
    // N x 4 row-major: x, y, z (sensor frame), intensity in [0, 255]
    std::vector<double> points;

    int64_t size() const { return int64_t(points.size()) / 4; }
    double x(int64_t i) const { return points[size_t(4 * i)]; }
    double y(int64_t i) const { return points[size_t(4 * i + 1)]; }
    double z(int64_t i) const { return points[size_t(4 * i + 2)]; }
    double intensity(int64_t i) const { return points[size_t(4 * i + 3)]; }
    Eigen::Vector3d xyz(int64_t i) const { return {x(i), y(i), z(i)}; }

    void push(double px, double py, double pz, double inten) {
        points.insert(points.end(), {px, py, pz, inten});
    }

    void validate() const;
};

enum class Category { kCar, kPedestrian, kOther };

Category category_from_name(const std::string& name);
std::string category_to_name(Category c, const std::string& other_name = "");

// Rectangular cuboid given by its 8 corners in the ego frame. Canonical
// corner order: corner i sits at center + sum_k sign_k(i) * h_k * axis_k with
// sign_x = bit 0, sign_y = bit 1, sign_z = bit 2 (minus for 0).
struct Box3D {
    std::array<Eigen::Vector3d, 8> corners;
    Category category = Category::kCar;
    std::string category_name = "car";
    std::string instance_id;
    double visibility = 1.0;
    int64_t num_lidar_points = 0;

    static Box3D from_center(const Eigen::Vector3d& center, const Eigen::Vector3d& half_extents,
                             double yaw);

    Eigen::Vector3d center() const;
    Eigen::Matrix3d axes() const;          // unit columns, canonical-order derived
    Eigen::Vector3d half_extents() const;
    double volume() const;

    // Closed-boundary membership: a point exactly on a face counts as inside.
    bool contains(const Eigen::Vector3d& p) const;

    // Expands every extent by the given factor about the center (1.1 = +10%).
    Box3D expanded(double factor) const;

    void validate() const;
};

int64_t count_points_in_box(const PointCloud& cloud, const Box3D& box);

struct CameraFrame {
    int width = 0, height = 0;
    std::vector<float> image;  // H x W x 3, values in [0, 1]
    Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
    Eigen::Matrix4d extrinsics = Eigen::Matrix4d::Identity();  // sensor-from-ego

    float at(int yy, int xx, int c) const { return image[size_t((yy * width + xx) * 3 + c)]; }
    float& at(int yy, int xx, int c) { return image[size_t((yy * width + xx) * 3 + c)]; }

    void validate() const;
};

struct SceneMeta {
    std::string scene_id;
    std::string frame_id;
    double timestamp = 0.0;
    bool rainy = false;
    bool night = false;
};

struct SceneSample {
    CameraFrame camera;
    PointCloud lidar;
    std::vector<Box3D> boxes;
    SceneMeta meta;

    void validate() const;  // all invariants plus the per-box point recount
};

// ---- directory layout io: meta.json + lidar.bin (f32 LE, Nx4) + camera.png

SceneSample load_scene(const std::string& dir);
void export_scene(const SceneSample& sample, const std::string& dir);

// ---- synthetic scenes ----

struct SyntheticSpec {
    int n_objects = 3;
    std::vector<Category> categories = {Category::kCar, Category::kPedestrian};
    bool rainy = false;
    bool night = false;
};

// Deterministic in (seed, spec): cuboid objects ray-cast into the lidar sweep
// and flat-shaded into the camera, plus a ground plane.
SceneSample generate_synthetic_scene(uint64_t seed, const SyntheticSpec& spec);

// Same objects tracked over n_frames with constant velocities; timestamps are
// strictly increasing and instance ids persist across frames.
std::vector<SceneSample> generate_synthetic_sequence(uint64_t seed, const SyntheticSpec& spec,
                                                     int n_frames);

// Shared synthetic camera model.
Eigen::Matrix3d synthetic_intrinsics();
Eigen::Matrix4d synthetic_camera_extrinsics();
constexpr int kSyntheticImageWidth = 400;
constexpr int kSyntheticImageHeight = 225;
constexpr double kGroundZ = -1.9;

}  // namespace graft

#endif  // GRAFT_SCENE_HPP
