#include <json.hpp>

#include <filesystem>
#include <fstream>

#include "graft/error.hpp"
#include "graft/image.hpp"
#include "graft/scene.hpp"

namespace graft {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json arr = json::array();
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
    return arr;
}

template <int R, int C>
Eigen::Matrix<double, R, C> matrix_from_json(const json& arr, const char* what) {
    if (!arr.is_array() || arr.size() != size_t(R * C))
        throw FormatError(std::string("bad matrix field: ") + what);
    Eigen::Matrix<double, R, C> m;
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) m(r, c) = arr[size_t(r * C + c)].get<double>();
    return m;
}

const json& require(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw FormatError(std::string("meta.json missing key: ") + key);
    return *it;
}

}  // namespace

SceneSample load_scene(const std::string& dir) {
    const fs::path root(dir);
    const fs::path meta_path = root / "meta.json";
    const fs::path lidar_path = root / "lidar.bin";
    const fs::path camera_path = root / "camera.png";
    for (const auto& p : {meta_path, lidar_path, camera_path})
        if (!fs::exists(p)) throw NotFoundError("missing file: " + p.string());

    json meta;
    {
        std::ifstream is(meta_path);
        try {
            is >> meta;
        } catch (const json::exception& e) {
            throw FormatError("meta.json parse error: " + std::string(e.what()));
        }
    }

    SceneSample sample;
    sample.meta.scene_id = require(meta, "scene_id").get<std::string>();
    sample.meta.frame_id = require(meta, "frame_id").get<std::string>();
    sample.meta.timestamp = require(meta, "timestamp").get<double>();
    sample.meta.rainy = require(meta, "rainy").get<bool>();
    sample.meta.night = require(meta, "night").get<bool>();

    const json& cam = require(meta, "camera");
    sample.camera.intrinsics = matrix_from_json<3, 3>(require(cam, "intrinsics"), "intrinsics");
    sample.camera.extrinsics = matrix_from_json<4, 4>(require(cam, "extrinsics"), "extrinsics");

    {
        std::ifstream is(lidar_path, std::ios::binary | std::ios::ate);
        const auto bytes = is.tellg();
        if (bytes % 16 != 0)
            throw FormatError("lidar.bin length not divisible by 16 bytes: " +
                              std::to_string(bytes));
        is.seekg(0);
        std::vector<float> raw(size_t(bytes) / 4);
        is.read(reinterpret_cast<char*>(raw.data()), bytes);
        if (!is) throw FormatError("lidar.bin truncated read");
        sample.lidar.points.assign(raw.begin(), raw.end());
    }

    {
        const Image img = read_png_rgb8(camera_path.string());
        sample.camera.width = img.width;
        sample.camera.height = img.height;
        sample.camera.image = img.data;
    }

    for (const json& jb : require(meta, "boxes")) {
        Box3D box;
        const json& corners = require(jb, "corners");
        if (!corners.is_array() || corners.size() != 8) throw FormatError("box needs 8 corners");
        for (int i = 0; i < 8; ++i) {
            const json& c = corners[size_t(i)];
            if (!c.is_array() || c.size() != 3) throw FormatError("corner needs 3 coordinates");
            box.corners[size_t(i)] = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
        }
        box.category_name = require(jb, "category").get<std::string>();
        box.category = category_from_name(box.category_name);
        box.instance_id = require(jb, "instance_id").get<std::string>();
        box.visibility = require(jb, "visibility").get<double>();
        box.num_lidar_points = require(jb, "num_lidar_points").get<int64_t>();
        sample.boxes.push_back(std::move(box));
    }

    sample.validate();
    return sample;
}

void export_scene(const SceneSample& sample, const std::string& dir) {
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create directory: " + dir + " (" + ec.message() + ")");

    json meta;
    meta["scene_id"] = sample.meta.scene_id;
    meta["frame_id"] = sample.meta.frame_id;
    meta["timestamp"] = sample.meta.timestamp;
    meta["rainy"] = sample.meta.rainy;
    meta["night"] = sample.meta.night;
    meta["camera"] = {{"width", sample.camera.width},
                      {"height", sample.camera.height},
                      {"intrinsics", matrix_to_json(sample.camera.intrinsics)},
                      {"extrinsics", matrix_to_json(sample.camera.extrinsics)}};
    json boxes = json::array();
    for (const auto& box : sample.boxes) {
        json jb;
        json corners = json::array();
        for (const auto& c : box.corners) corners.push_back({c.x(), c.y(), c.z()});
        jb["corners"] = corners;
        jb["category"] = category_to_name(box.category, box.category_name);
        jb["instance_id"] = box.instance_id;
        jb["visibility"] = box.visibility;
        jb["num_lidar_points"] = box.num_lidar_points;
        boxes.push_back(std::move(jb));
    }
    meta["boxes"] = boxes;

    {
        std::ofstream os(root / "meta.json");
        if (!os) throw IoError("cannot write meta.json under " + dir);
        os << meta.dump(2) << "\n";
    }
    {
        std::ofstream os(root / "lidar.bin", std::ios::binary);
        if (!os) throw IoError("cannot write lidar.bin under " + dir);
        std::vector<float> raw(sample.lidar.points.begin(), sample.lidar.points.end());
        os.write(reinterpret_cast<const char*>(raw.data()),
                 std::streamsize(raw.size() * sizeof(float)));
        if (!os) throw IoError("lidar.bin write failure under " + dir);
    }
    {
        Image img(sample.camera.height, sample.camera.width, 3);
        img.data = sample.camera.image;
        write_png_rgb8((root / "camera.png").string(), img);
    }
}

}  // namespace graft
