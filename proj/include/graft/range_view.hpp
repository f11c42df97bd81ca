#ifndef GRAFT_RANGE_VIEW_HPP
#define GRAFT_RANGE_VIEW_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "graft/scene.hpp"

namespace graft {

// Lidar range-view raster: 32 beam rows x 1096 yaw columns. Row 0 is the
// lowest beam. Depth keeps the sentinel (= max range) on empty pixels so the
// normalized raster stays in range for the encoder; `filled` is authoritative.
constexpr int kRangeRows = 32;
constexpr int kRangeCols = 1096;
constexpr double kMinDepth = 1.4;
constexpr double kMaxDepth = 54.0;
constexpr double kEmptyDepth = kMaxDepth;

// Beam pitch angles theta_k = 0.0232 * x_k, x_k in {-23, ..., 8} (ascending).
struct BeamTable {
    std::array<double, kRangeRows> pitches;

    BeamTable();
    // Nearest beam; an exact midpoint resolves to the lower row.
    int nearest_row(double pitch) const;
    // Real-valued row by linear interpolation (the beams are uniformly
    // spaced, so this is affine in pitch). Used for mask rasterization only.
    double fractional_row(double pitch) const;
};

const BeamTable& beam_table();

// Angle/column conventions shared by projection and box rasterization.
double yaw_of(double x, double y);             // -atan2(y, x)
int column_of(double yaw);                     // floor(yaw/pi * W/2 + W/2), wrapped
double fractional_column(double yaw);          // unfloored column coordinate
double rasterized_yaw(int col);                // (col + 0.5 - W/2) * 2pi/W
Eigen::Vector3d direction_of(double pitch, double yaw);

struct RangeView {
    std::vector<double> depth;      // rows*cols, kEmptyDepth where unfilled
    std::vector<double> intensity;  // rows*cols
    std::vector<double> pitch;      // unrasterized, per assigned point
    std::vector<double> yaw;        // unrasterized
    std::vector<uint8_t> filled;
    std::vector<uint8_t> edited;    // set by compositing; angles there are rasterized
    std::vector<int64_t> dropped;   // input indices excluded by range filter or collision

    RangeView();

    static int64_t index(int row, int col) { return int64_t(row) * kRangeCols + col; }
    bool is_filled(int row, int col) const { return filled[size_t(index(row, col))] != 0; }
    int64_t filled_count() const;

    void validate() const;
};

// Forward projection. Keeps the nearest-depth point on pixel collisions and
// records every filtered or displaced input index in `dropped`.
RangeView project(const PointCloud& cloud);

// Inverse using the stored unrasterized angles; emits one point per filled
// pixel in row-major order.
PointCloud unproject(const RangeView& view);

// Inverse for views containing edited pixels: edited pixels lack stored
// angles and use the rasterized beam pitch / column-center yaw instead.
PointCloud unproject_rasterized(const RangeView& view, const std::vector<uint8_t>& edited_mask);
PointCloud unproject_rasterized(const RangeView& view);  // uses view.edited

}  // namespace graft

#endif  // GRAFT_RANGE_VIEW_HPP
