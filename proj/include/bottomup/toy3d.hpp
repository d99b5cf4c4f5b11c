#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bottomup/feature_map.hpp"
#include "bottomup/metrics.hpp"
#include "bottomup/params.hpp"
#include "bottomup/rrcs.hpp"
#include "bottomup/tensor.hpp"

namespace bottomup::toy {

/// Pinhole camera above a flat ground plane. Image rows count up from the
/// bottom (row 0), so v0 is the horizon row.
struct CameraModel {
  double focal = 90.0;
  double u0 = 16.0;
  double v0 = 25.6;
  double height = 1.65;

  friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

/// Row where a ground point at depth z projects.
double contact_row(const CameraModel& cam, double depth);
/// Depth of the ground at a (fractional) row below the horizon; infinite at
/// or above it.
double ground_depth(const CameraModel& cam, double row);

struct SceneObject {
  double x = 0.0;  // lateral, meters
  double z = 1.0;  // depth, meters
  double h = 1.0, w = 1.0, l = 1.0;
  double yaw = 0.0;
  int class_id = 0;
  std::array<double, 3> texture{};  // appearance code, not serialized

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

/// Projected box in bottom-origin pixels: left edge u, bottom edge v,
/// width, height.
struct Box2D {
  double u = 0.0, v = 0.0, w = 0.0, h = 0.0;
};

struct ObjectTarget {
  SceneObject object;
  Box2D box;
  bool truncated = false;
  std::size_t row = 0, col = 0;   // cell that carries the object's outputs
  std::array<double, 4> offsets{};  // cell to left, bottom, right, top edges, pixels
};

// Feature channels. Object pixels overwrite everything below them.
namespace channel {
inline constexpr std::size_t kRoad = 0;
inline constexpr std::size_t kObject = 1;
inline constexpr std::size_t kClass = 2;  // one-hot, two slots
inline constexpr std::size_t kYawSin = 4;
inline constexpr std::size_t kYawCos = 5;
inline constexpr std::size_t kSurface = 6;  // road grain, or clutter value
inline constexpr std::size_t kSky = 7;
inline constexpr std::size_t kClutter = 9;
inline constexpr std::size_t kConstant = 10;
inline constexpr std::size_t kNoise = 11;    // two slots
inline constexpr std::size_t kTexture = 13;  // three slots
inline constexpr std::size_t kCount = 16;
}  // namespace channel

inline constexpr int kClasses = 2;

struct SceneConfig {
  std::size_t height = 32, width = 32;
  double depth_min = 7.5, depth_max = 40.0;
  int objects_min = 1, objects_max = 2;
  double ambiguous_prob = 0.3;
  /// Heights of the two objects in an ambiguous pair. The large one is
  /// truck-sized, so near the camera its top leaves the image.
  double small_h_min = 1.3, small_h_max = 1.6;
  double large_h_min = 3.0, large_h_max = 3.5;
  bool clutter = true;
  double camera_height = 1.65;

  /// Camera scaled to the grid: horizon at 0.8 H and focal * camera
  /// height = 300 H / 64 pixel-meters.
  CameraModel camera() const;
  /// Throws ContractError on empty or inverted ranges.
  void validate() const;
};

struct RenderedFrame {
  std::uint64_t seed = 0;
  CameraModel camera;
  FeatureMap features;
  std::vector<ObjectTarget> objects;  // visible objects only
};

/// Deterministic in (seed, config).
RenderedFrame generate_scene(std::uint64_t seed, const SceneConfig& config);
/// Renders a given object list. Random surface detail still comes from `seed`.
RenderedFrame render_scene(std::uint64_t seed, const SceneConfig& config, std::vector<SceneObject> objects);

struct Dataset {
  SceneConfig config;
  std::vector<RenderedFrame> frames;
};

/// Frame k uses seed base_seed * 1000003 + k. Generated in parallel.
Dataset make_dataset(const SceneConfig& config, std::uint64_t base_seed, std::size_t count);

/// One JSON object per line: {seed, objects:[{x,z,h,w,l,yaw,class}], camera:{f,u0,v0,height}}.
std::string dataset_jsonl(const Dataset& data);
void save_dataset(const Dataset& data, const std::filesystem::path& path);
/// Regenerates each frame from its seed and checks it against the stored
/// objects and camera. Throws std::runtime_error naming the line on mismatch.
Dataset load_dataset(const std::filesystem::path& path, const SceneConfig& config);

enum class Variant { Baseline, CoordConv, Yolobu, CcaOnly, RrcsOnly, GlobalAttention, UpBottom };

inline constexpr std::array<Variant, 7> kAllVariants{Variant::Baseline,  Variant::CoordConv, Variant::Yolobu,
                                                     Variant::CcaOnly,   Variant::RrcsOnly,  Variant::GlobalAttention,
                                                     Variant::UpBottom};

std::string_view variant_name(Variant v);
/// Throws ContractError for unknown names.
Variant parse_variant(std::string_view name);

/// Output layout of the heads per cell: 2 class logits, 4 box offsets
/// (pixels / 16), 5 box terms (depth code, h, w, l / 3, yaw / pi).
inline constexpr std::size_t kBox2dOutputs = 4;
inline constexpr std::size_t kBox3dOutputs = 5;
inline constexpr double kOffsetScale = 16.0;

struct ModelConfig {
  std::size_t hidden = 32;
};

struct ToyModel {
  Variant variant = Variant::Baseline;
  SceneConfig scene;
  ModelConfig model;
  ParamSet params;
};

ToyModel init_model(Variant variant, const SceneConfig& scene, const ModelConfig& model, std::uint64_t seed);

struct HeadOutputs {
  Var cls;    // H x W x 2 logits
  Var box2d;  // H x W x 4
  Var box3d;  // H x W x 5
};
HeadOutputs forward(const Var& features, const ToyModel& model, const BoundParams& params);

/// Depth code regressed by the 3D head: focal * camera height / (10 z).
double encode_depth(const CameraModel& cam, double depth);
double decode_depth(const CameraModel& cam, double code);

/// Classification + box-offset + 3D-box losses at unit weights; the
/// regression terms are summed over the objects and everything is divided
/// by max(1, object count).
Var toy_loss(const HeadOutputs& out, const RenderedFrame& frame);

struct TrainOptions {
  /// Peak learning rate. It follows a cosine from lr down to 0 over all
  /// training steps.
  double lr = 0.002;
  ModelConfig model;
};

struct TrainResult {
  ToyModel model;
  std::vector<double> loss_curve;  // mean loss per epoch
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adam on single frames, shuffled each epoch. Deterministic in seed.
TrainResult train(Variant variant, const Dataset& data, int epochs, std::uint64_t seed, const TrainOptions& opts = {});

/// Raw per-cell outputs (H x W x 11 in head order) for one frame.
using Predictor = std::function<Tensor(const RenderedFrame&)>;
Predictor model_predictor(const ToyModel& model);
/// Writes every object's encoded ground truth into its cell and a high
/// class logit; everything else is strongly negative.
Tensor oracle_outputs(const RenderedFrame& frame);

struct ClassError {
  int class_id = 0;
  std::size_t count = 0;
  double depth_mae = 0.0;
};

struct EvalReport {
  std::size_t objects = 0;
  std::optional<double> depth_mae;
  std::optional<double> dims_mae;
  std::vector<ClassError> per_class;
  std::vector<std::vector<metrics::Detection>> detections;  // per frame
  std::optional<double> ap;  // mean over classes with ground truth
};

inline constexpr double kToyIouThreshold = 0.25;
inline constexpr double kPeakThreshold = 0.05;

/// Depth and dimension errors read at each object's cell; detections are
/// 3x3 local maxima of the class scores above kPeakThreshold.
EvalReport evaluate(const Predictor& predict, const Dataset& data);

}  // namespace bottomup::toy
