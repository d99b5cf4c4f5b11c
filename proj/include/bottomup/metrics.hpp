#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bottomup::metrics {

/// Camera-frame box: x right, y down, z forward. `center` is the geometric
/// center; yaw rotates about the vertical (y) axis, zero means the length
/// runs along +x.
struct Box3D {
  std::array<double, 3> center{};
  double h = 1.0, w = 1.0, l = 1.0;
  double yaw = 0.0;
};

struct Detection {
  Box3D box;
  int class_id = 0;
  double confidence = 0.0;
};

struct Point2 {
  double x = 0.0, y = 0.0;
};
using Polygon = std::vector<Point2>;

/// Corners of the box footprint in the x-z plane, counter-clockwise.
Polygon bev_footprint(const Box3D& b);
/// Signed shoelace area; positive for counter-clockwise vertex order.
double polygon_area(const Polygon& poly);
/// Intersection of two convex counter-clockwise polygons.
Polygon clip_convex(const Polygon& subject, const Polygon& clip);

/// Rotated footprint IoU. Zero-area boxes give 0.
double bev_iou(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

using IouFn = std::function<double(const Box3D&, const Box3D&)>;

/// Detections and ground truth of one image. Ignored ground truth (outside
/// the evaluated difficulty) absorbs matching detections without counting.
struct FrameEval {
  std::vector<Detection> detections;
  std::vector<Box3D> gts;
  std::vector<bool> gt_ignored;  // empty means none ignored
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct ApResult {
  std::optional<double> ap;  // empty when there is no ground truth
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
  std::vector<PrPoint> curve;
  bool defined() const { return ap.has_value(); }
};

inline constexpr int kRecallPoints = 40;

/// Interpolated precision averaged over recall levels 1/40 .. 40/40.
double interpolate_r40(std::span<const PrPoint> curve);

/// Greedy matching in descending confidence (ties keep input order, frame
/// by frame); each detection takes the unmatched gt with the highest IoU
/// at or above `threshold`. One precision/recall point per distinct
/// confidence value.
ApResult ap_r40(std::span<const FrameEval> frames, const IouFn& iou, double threshold);
ApResult ap_r40(std::span<const Detection> detections, std::span<const Box3D> gts, const IouFn& iou,
                double threshold);

struct KittiLabel {
  std::string type;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox{};  // left, top, right, bottom
  std::array<double, 3> dims{};  // h, w, l
  std::array<double, 3> location{};  // x, y (bottom of box), z
  double rotation_y = 0.0;
  std::optional<double> score;

  friend bool operator==(const KittiLabel&, const KittiLabel&) = default;
};

class KittiParseError : public std::runtime_error {
 public:
  KittiParseError(const std::string& what, int field) : std::runtime_error(what), field_(field) {}
  /// 0-based field index, or -1 for a field-count error.
  int field() const noexcept { return field_; }

 private:
  int field_;
};

KittiLabel parse_kitti_label(std::string_view line);
/// Shortest round-trip decimal form for every number.
std::string format_kitti_label(const KittiLabel& label);
/// Blank lines are skipped. Errors name the file and 1-based line.
std::vector<KittiLabel> read_kitti_file(const std::filesystem::path& path);

Box3D to_box(const KittiLabel& label);

struct DifficultyCutoffs {
  std::string name;
  double min_height = 0.0;      // 2D box height in pixels
  int max_occlusion = 0;
  double max_truncation = 0.0;
};

/// Reads [{"name", "min_height", "max_occlusion", "max_truncation"}, ...].
std::vector<DifficultyCutoffs> load_difficulties(const std::filesystem::path& path);
bool passes(const KittiLabel& label, const DifficultyCutoffs& cut);

struct ReportRow {
  std::string cls;
  std::string difficulty;
  std::optional<double> ap_3d;
  std::optional<double> ap_bev;
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
};

/// One frame's labels: ground truth and predictions (predictions carry scores;
/// a missing score counts as 1).
struct LabelFrame {
  std::vector<KittiLabel> gt;
  std::vector<KittiLabel> pred;
};

ReportRow evaluate_class(std::span<const LabelFrame> frames, const std::string& cls, const DifficultyCutoffs& cut,
                         double iou_threshold);
/// JSON array of {class, difficulty, ap_3d, ap_bev, n_gt, n_det}; undefined AP is null.
std::string report_json(std::span<const ReportRow> rows);

}  // namespace bottomup::metrics
