#include "bottomup/toy3d.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "bottomup/parallel.hpp"
#include "json.hpp"

namespace bottomup::toy {

double contact_row(const CameraModel& cam, double depth) { return cam.v0 - cam.focal * cam.height / depth; }

double ground_depth(const CameraModel& cam, double row) {
  if (row >= cam.v0) return std::numeric_limits<double>::infinity();
  return cam.focal * cam.height / (cam.v0 - row);
}

CameraModel SceneConfig::camera() const {
  const double fh = 300.0 * static_cast<double>(height) / 64.0;
  return {fh / camera_height, static_cast<double>(width) / 2.0, 0.8 * static_cast<double>(height), camera_height};
}

void SceneConfig::validate() const {
  auto range = [](double lo, double hi, const char* what) {
    if (!(lo < hi)) throw ContractError(std::string("scene config: empty or inverted ") + what + " range");
  };
  if (height < 8 || width < 8) throw ContractError("scene config: grid must be at least 8 x 8");
  range(depth_min, depth_max, "depth");
  if (depth_min <= 0.0) throw ContractError("scene config: depths must be positive");
  if (objects_min < 0 || objects_min > objects_max) throw ContractError("scene config: empty or inverted object count range");
  if (!(ambiguous_prob >= 0.0 && ambiguous_prob <= 1.0)) throw ContractError("scene config: ambiguous_prob outside [0, 1]");
  range(small_h_min, small_h_max, "small height");
  range(large_h_min, large_h_max, "large height");
  if (small_h_min <= 0.0) throw ContractError("scene config: heights must be positive");
  if (!(camera_height > 0.0)) throw ContractError("scene config: camera height must be positive");
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(Rng& rng, int lo, int hi_inclusive) { return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng); }

std::array<double, 3> texture(Rng& rng) { return {uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)}; }

void paint_background(Tensor& f, const SceneConfig& cfg, const CameraModel& cam, Rng& rng) {
  const auto h = cfg.height, w = cfg.width;
  for (std::size_t i = 0; i < h; ++i) {
    const bool road = static_cast<double>(i) < cam.v0;
    for (std::size_t j = 0; j < w; ++j) {
      f.at(i, j, channel::kRoad) = road ? 1.0 : 0.0;
      f.at(i, j, channel::kSky) = road ? 0.0 : 1.0;
      if (road) f.at(i, j, channel::kSurface) = uniform(rng, 0.5, 1.5);
    }
  }
  if (cfg.clutter) {
    // Patches of debris on the road with a random surface value.
    const int road_rows = static_cast<int>(cam.v0);
    const double target = uniform(rng, 0.2, 0.5) * static_cast<double>(h * w) * 0.8;
    double covered = 0.0;
    while (covered < target) {
      const int r = uniform_int(rng, 0, road_rows - 1);
      const int c = uniform_int(rng, 0, static_cast<int>(w) - 1);
      const int sh = uniform_int(rng, 2, 5);
      const int sw = uniform_int(rng, 1, 3);
      const double value = uniform(rng, -1.0, 2.0);
      for (int i = r; i < std::min<int>(r + sh, static_cast<int>(h)); ++i) {
        for (int j = c; j < std::min<int>(c + sw, static_cast<int>(w)); ++j) {
          f.at(i, j, channel::kRoad) = 0.0;
          f.at(i, j, channel::kClutter) = 1.0;
          f.at(i, j, channel::kSurface) = value;
        }
      }
      covered += sh * sw;
    }
  }
  std::normal_distribution<double> noise(0.0, 0.2);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      f.at(i, j, channel::kConstant) = 1.0;
      f.at(i, j, channel::kNoise) = noise(rng);
      f.at(i, j, channel::kNoise + 1) = noise(rng);
    }
  }
}

std::vector<SceneObject> draw_objects(const SceneConfig& cfg, const CameraModel& cam, bool ambiguous, Rng& rng) {
  std::vector<SceneObject> out;
  if (ambiguous) {
    // Same depth, heading and appearance; only the physical size differs.
    const double z = uniform(rng, cfg.depth_min, cfg.depth_max);
    const double yaw = uniform(rng, -std::numbers::pi, std::numbers::pi);
    const auto tex = texture(rng);
    const double width = uniform(rng, 1.6, 2.0);
    double h1 = uniform(rng, cfg.small_h_min, cfg.small_h_max);
    double h2 = uniform(rng, cfg.large_h_min, cfg.large_h_max);
    if (uniform(rng, 0.0, 1.0) < 0.5) std::swap(h1, h2);
    // One object centered in each half of the image.
    const double w = static_cast<double>(cfg.width);
    const double x1 = (uniform(rng, 0.15, 0.35) * w - cam.u0) * z / cam.focal;
    const double x2 = (uniform(rng, 0.65, 0.85) * w - cam.u0) * z / cam.focal;
    for (auto [hh, x] : {std::pair{h1, x1}, std::pair{h2, x2}}) out.push_back({x, z, hh, width, 3.0 + hh, yaw, 0, tex});
    return out;
  }
  const int n = uniform_int(rng, cfg.objects_min, cfg.objects_max);
  for (int k = 0; k < n; ++k) {
    SceneObject o;
    o.class_id = uniform_int(rng, 0, kClasses - 1);
    o.z = uniform(rng, cfg.depth_min, cfg.depth_max);
    if (o.class_id == 0) {
      o.h = uniform(rng, cfg.small_h_min, cfg.large_h_max);
      o.w = uniform(rng, 1.5, 2.0);
      o.l = uniform(rng, 3.5, 5.5);
    } else {
      o.h = uniform(rng, 1.4, 1.95);
      o.w = uniform(rng, 0.5, 0.8);
      o.l = uniform(rng, 0.5, 1.0);
    }
    const double xmax = o.z * (static_cast<double>(cfg.width) / 2 - 4) / cam.focal;
    o.x = uniform(rng, -xmax, xmax);
    o.yaw = uniform(rng, -std::numbers::pi, std::numbers::pi);
    o.texture = texture(rng);
    out.push_back(o);
  }
  return out;
}

void paint_objects(RenderedFrame& frame, const SceneConfig& cfg, std::vector<SceneObject> objects) {
  const auto& cam = frame.camera;
  Tensor& f = frame.features.tensor();
  const int h = static_cast<int>(cfg.height), w = static_cast<int>(cfg.width);
  // Far to near so nearer objects occlude.
  std::stable_sort(objects.begin(), objects.end(), [](const auto& a, const auto& b) { return a.z > b.z; });
  for (const auto& o : objects) {
    const double u = cam.u0 + cam.focal * o.x / o.z;
    const double vc = contact_row(cam, o.z);
    const double bh = cam.focal * o.h / o.z;
    const double bw = cam.focal * o.w / o.z;
    const int r0 = static_cast<int>(std::lround(vc)), r1 = static_cast<int>(std::lround(vc + bh));
    const int c0 = static_cast<int>(std::lround(u - bw / 2)), c1 = static_cast<int>(std::lround(u + bw / 2));
    const int r0c = std::max(r0, 0), r1c = std::min(r1, h), c0c = std::max(c0, 0), c1c = std::min(c1, w);
    if (r1c <= r0c || c1c <= c0c) continue;
    for (int i = r0c; i < r1c; ++i) {
      for (int j = c0c; j < c1c; ++j) {
        for (std::size_t ch = 0; ch < channel::kCount; ++ch) f.at(i, j, ch) = 0.0;
        f.at(i, j, channel::kObject) = 1.0;
        f.at(i, j, channel::kClass + o.class_id) = 1.0;
        f.at(i, j, channel::kYawSin) = std::sin(o.yaw);
        f.at(i, j, channel::kYawCos) = std::cos(o.yaw);
        for (std::size_t t = 0; t < 3; ++t) f.at(i, j, channel::kTexture + t) = o.texture[t];
      }
    }
    ObjectTarget t;
    t.object = o;
    t.box = {u - bw / 2, vc, bw, bh};
    t.truncated = u - bw / 2 < 0 || u + bw / 2 > w || vc < 0 || vc + bh > h;
    t.row = static_cast<std::size_t>(std::clamp(static_cast<int>(vc + bh / 2), 0, h - 1));
    t.col = static_cast<std::size_t>(std::clamp(static_cast<int>(u), 0, w - 1));
    const double ci = static_cast<double>(t.row), cj = static_cast<double>(t.col);
    t.offsets = {cj - (u - bw / 2), ci - vc, (u + bw / 2) - cj, vc + bh - ci};
    frame.objects.push_back(t);
  }
}

RenderedFrame blank(std::uint64_t seed, const SceneConfig& config) {
  config.validate();
  RenderedFrame frame;
  frame.seed = seed;
  frame.camera = config.camera();
  frame.features = FeatureMap(config.height, config.width, channel::kCount);
  return frame;
}

}  // namespace

RenderedFrame generate_scene(std::uint64_t seed, const SceneConfig& config) {
  RenderedFrame frame = blank(seed, config);
  Rng rng(seed);
  const bool ambiguous = uniform(rng, 0.0, 1.0) < config.ambiguous_prob;
  paint_background(frame.features.tensor(), config, frame.camera, rng);
  paint_objects(frame, config, draw_objects(config, frame.camera, ambiguous, rng));
  return frame;
}

RenderedFrame render_scene(std::uint64_t seed, const SceneConfig& config, std::vector<SceneObject> objects) {
  RenderedFrame frame = blank(seed, config);
  Rng rng(seed);
  uniform(rng, 0.0, 1.0);
  paint_background(frame.features.tensor(), config, frame.camera, rng);
  paint_objects(frame, config, std::move(objects));
  return frame;
}

Dataset make_dataset(const SceneConfig& config, std::uint64_t base_seed, std::size_t count) {
  config.validate();
  Dataset data{config, std::vector<RenderedFrame>(count)};
  parallel_for(count, [&](std::size_t k) { data.frames[k] = generate_scene(base_seed * 1000003ull + k, config); });
  return data;
}

namespace {

nlohmann::json frame_json(const RenderedFrame& fr) {
  auto objs = nlohmann::json::array();
  for (const auto& t : fr.objects) {
    const auto& o = t.object;
    objs.push_back({{"x", o.x}, {"z", o.z}, {"h", o.h}, {"w", o.w}, {"l", o.l}, {"yaw", o.yaw}, {"class", o.class_id}});
  }
  const auto& c = fr.camera;
  nlohmann::json line;
  line["seed"] = fr.seed;
  line["objects"] = std::move(objs);
  line["camera"] = {{"f", c.focal}, {"u0", c.u0}, {"v0", c.v0}, {"height", c.height}};
  return line;
}

}  // namespace

std::string dataset_jsonl(const Dataset& data) {
  std::string out;
  for (const auto& fr : data.frames) out += frame_json(fr).dump() + "\n";
  return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << dataset_jsonl(data);
}

Dataset load_dataset(const std::filesystem::path& path, const SceneConfig& config) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  Dataset data{config, {}};
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(n) + ": ";
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(where + e.what());
    }
    auto frame = generate_scene(doc.at("seed").get<std::uint64_t>(), config);
    if (frame_json(frame) != doc) throw std::runtime_error(where + "stored scene does not match its seed and config");
    data.frames.push_back(std::move(frame));
  }
  return data;
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::CoordConv: return "coordconv";
    case Variant::Yolobu: return "yolobu";
    case Variant::CcaOnly: return "cca_only";
    case Variant::RrcsOnly: return "rrcs_only";
    case Variant::GlobalAttention: return "global_attention";
    case Variant::UpBottom: return "up_bottom";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (auto v : kAllVariants)
    if (variant_name(v) == name) return v;
  throw ContractError("unknown variant: " + std::string(name));
}

}  // namespace bottomup::toy
