#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "bottomup/ops.hpp"
#include "bottomup/optim.hpp"
#include "bottomup/toy3d.hpp"

namespace bottomup::toy {

namespace {

constexpr double kClassBias = -4.0;
constexpr std::size_t kOutputs = kClasses + kBox2dOutputs + kBox3dOutputs;

BlockConfig block_config(Variant v) {
  switch (v) {
    case Variant::CcaOnly: return {AttentionMode::Column, false, ScanDirection::BottomUp};
    case Variant::RrcsOnly: return {AttentionMode::None, true, ScanDirection::BottomUp};
    case Variant::GlobalAttention: return {AttentionMode::Global, true, ScanDirection::BottomUp};
    case Variant::UpBottom: return {AttentionMode::Column, true, ScanDirection::UpBottom};
    default: return {};
  }
}

bool has_block(Variant v) { return v != Variant::Baseline && v != Variant::CoordConv; }

// Softmax weights start near 1/(number of competing pixels); scaling the
// projection by that count keeps the scan path at unit strength.
double projection_gain(Variant v, const SceneConfig& s) {
  switch (block_config(v).attention) {
    case AttentionMode::Column: return static_cast<double>(s.height);
    case AttentionMode::Global: return static_cast<double>(s.height * s.width);
    case AttentionMode::None: return 1.0;
  }
  return 1.0;
}

void add_linear(ParamSet& ps, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor w({in, out});
  for (auto& v : w.data()) v = u(rng);
  ps.add(name + "_w", std::move(w));
  ps.add(name + "_b", Tensor({out}));
}

Tensor coordinate_planes(std::size_t h, std::size_t w) {
  Tensor t({h, w, 2});
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      t.at(i, j, 0) = static_cast<double>(j) / static_cast<double>(w);
      t.at(i, j, 1) = static_cast<double>(i) / static_cast<double>(h);
    }
  }
  return t;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

metrics::Box3D object_box(const SceneObject& o, const CameraModel& cam) {
  metrics::Box3D b;
  b.center = {o.x, cam.height - o.h / 2, o.z};
  b.h = o.h;
  b.w = o.w;
  b.l = o.l;
  b.yaw = o.yaw;
  return b;
}

}  // namespace

ToyModel init_model(Variant variant, const SceneConfig& scene, const ModelConfig& model, std::uint64_t seed) {
  scene.validate();
  if (model.hidden == 0) throw ContractError("model needs a hidden width of at least 1");
  ToyModel m{variant, scene, model, {}};
  std::mt19937_64 rng(seed);
  const std::size_t c = channel::kCount;
  if (has_block(variant)) {
    init_block_params(m.params, block_config(variant), scene.width, c, rng, projection_gain(variant, scene));
  }
  if (variant == Variant::CoordConv) add_linear(m.params, "coord", c + 2, c, rng);
  add_linear(m.params, "head.hidden", c, model.hidden, rng);
  add_linear(m.params, "head.cls", model.hidden, kClasses, rng);
  add_linear(m.params, "head.box2d", model.hidden, kBox2dOutputs, rng);
  add_linear(m.params, "head.box3d", model.hidden, kBox3dOutputs, rng);
  for (auto& v : m.params.get("head.cls_b").data()) v = kClassBias;
  return m;
}

HeadOutputs forward(const Var& features, const ToyModel& model, const BoundParams& p) {
  Var fp = features;
  const auto h = model.scene.height, w = model.scene.width;
  if (model.variant == Variant::CoordConv) {
    Var coords = features.graph().constant(coordinate_planes(h, w));
    fp = pointwise_linear(concat_channels(features, coords), p["coord_w"], p["coord_b"]);
  } else if (has_block(model.variant)) {
    const auto pe = PositionalEncoding::build(h, channel::kCount);
    fp = yolobu_block(features, p, pe, block_config(model.variant));
  }
  Var hidden = relu(pointwise_linear(fp, p["head.hidden_w"], p["head.hidden_b"]));
  return {pointwise_linear(hidden, p["head.cls_w"], p["head.cls_b"]),
          pointwise_linear(hidden, p["head.box2d_w"], p["head.box2d_b"]),
          pointwise_linear(hidden, p["head.box3d_w"], p["head.box3d_b"])};
}

double encode_depth(const CameraModel& cam, double depth) { return cam.focal * cam.height / depth / 10.0; }

double decode_depth(const CameraModel& cam, double code) {
  return cam.focal * cam.height / std::max(code * 10.0, 1e-3);
}

namespace {

std::array<double, kBox3dOutputs> box3d_target(const ObjectTarget& t, const CameraModel& cam) {
  const auto& o = t.object;
  return {encode_depth(cam, o.z), o.h, o.w, o.l / 3.0, o.yaw / std::numbers::pi};
}

}  // namespace

Var toy_loss(const HeadOutputs& out, const RenderedFrame& frame) {
  const auto& shape = out.cls.shape();
  const auto h = shape[0], w = shape[1];
  Tensor cls_target(shape);
  for (const auto& t : frame.objects) cls_target.at(t.row, t.col, static_cast<std::size_t>(t.object.class_id)) = 1.0;
  Var loss = focal_loss(out.cls, cls_target);

  const auto n = frame.objects.size();
  if (n > 0) {
    std::vector<std::size_t> cells;
    Tensor t2({n, kBox2dOutputs}), t3({n, kBox3dOutputs});
    for (std::size_t k = 0; k < n; ++k) {
      const auto& t = frame.objects[k];
      cells.push_back(t.row * w + t.col);
      for (std::size_t i = 0; i < kBox2dOutputs; ++i) t2.at(k, i) = t.offsets[i] / kOffsetScale;
      const auto b3 = box3d_target(t, frame.camera);
      for (std::size_t i = 0; i < kBox3dOutputs; ++i) t3.at(k, i) = b3[i];
    }
    Var p2 = gather_rows(reshape(out.box2d, {h * w, kBox2dOutputs}), cells);
    Var p3 = gather_rows(reshape(out.box3d, {h * w, kBox3dOutputs}), cells);
    loss = add(loss, add(l1_loss(p2, t2), l1_loss(p3, t3)));
  }
  return scale(loss, 1.0 / static_cast<double>(std::max<std::size_t>(n, 1)));
}

TrainResult train(Variant variant, const Dataset& data, int epochs, std::uint64_t seed, const TrainOptions& opts) {
  if (epochs < 0) throw ContractError("epochs must be non-negative");
  TrainResult res{init_model(variant, data.config, opts.model, seed), {}};
  if (epochs == 0 || data.frames.empty()) return res;

  Adam adam(opts.lr);
  std::mt19937_64 shuffle_rng(seed + 1000);
  std::vector<std::size_t> order(data.frames.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double total_steps = static_cast<double>(epochs) * static_cast<double>(order.size());
  double step = 0.0;
  for (int ep = 0; ep < epochs; ++ep) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    for (std::size_t idx : order) {
      adam.set_lr(opts.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * step / total_steps)));
      step += 1.0;
      const auto& frame = data.frames[idx];
      Graph g;
      BoundParams p(g, res.model.params, true);
      Var loss = toy_loss(forward(g.constant(frame.features.tensor()), res.model, p), frame);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw TrainingDiverged(std::string(variant_name(variant)) + ": non-finite loss at epoch " +
                               std::to_string(ep + 1) + ", frame seed " + std::to_string(frame.seed));
      }
      const auto grads = g.backward(loss);
      std::vector<Tensor> gs;
      gs.reserve(p.vars().size());
      for (const auto& v : p.vars()) gs.push_back(grads.of(v));
      adam.step(res.model.params, gs);
      total += value;
    }
    res.loss_curve.push_back(total / static_cast<double>(data.frames.size()));
  }
  return res;
}

Predictor model_predictor(const ToyModel& model) {
  return [&model](const RenderedFrame& frame) {
    Graph g;
    BoundParams p(g, model.params, false);
    const auto out = forward(g.constant(frame.features.tensor()), model, p);
    const auto h = model.scene.height, w = model.scene.width;
    Tensor all({h, w, kOutputs});
    for (std::size_t px = 0; px < h * w; ++px) {
      std::size_t k = 0;
      for (std::size_t c = 0; c < kClasses; ++c) all[px * kOutputs + k++] = out.cls.value()[px * kClasses + c];
      for (std::size_t c = 0; c < kBox2dOutputs; ++c) all[px * kOutputs + k++] = out.box2d.value()[px * kBox2dOutputs + c];
      for (std::size_t c = 0; c < kBox3dOutputs; ++c) all[px * kOutputs + k++] = out.box3d.value()[px * kBox3dOutputs + c];
    }
    return all;
  };
}

Tensor oracle_outputs(const RenderedFrame& frame) {
  const auto& fs = frame.features.tensor();
  const auto h = fs.dim(0), w = fs.dim(1);
  Tensor out({h, w, kOutputs});
  for (std::size_t px = 0; px < h * w; ++px)
    for (std::size_t c = 0; c < kClasses; ++c) out[px * kOutputs + c] = -30.0;
  for (const auto& t : frame.objects) {
    out.at(t.row, t.col, static_cast<std::size_t>(t.object.class_id)) = 30.0;
    for (std::size_t i = 0; i < kBox2dOutputs; ++i) out.at(t.row, t.col, kClasses + i) = t.offsets[i] / kOffsetScale;
    const auto b3 = box3d_target(t, frame.camera);
    for (std::size_t i = 0; i < kBox3dOutputs; ++i) out.at(t.row, t.col, kClasses + kBox2dOutputs + i) = b3[i];
  }
  return out;
}

namespace {

metrics::Box3D decode_box(const Tensor& out, std::size_t i, std::size_t j, const CameraModel& cam) {
  auto at = [&](std::size_t k) { return out.at(i, j, k); };
  const double left = at(kClasses + 0) * kOffsetScale, right = at(kClasses + 2) * kOffsetScale;
  const double u = static_cast<double>(j) + (right - left) / 2;
  const std::size_t b = kClasses + kBox2dOutputs;
  const double z = decode_depth(cam, at(b));
  SceneObject o;
  o.z = z;
  o.x = (u - cam.u0) * z / cam.focal;
  o.h = std::max(at(b + 1), 1e-3);
  o.w = std::max(at(b + 2), 1e-3);
  o.l = std::max(3.0 * at(b + 3), 1e-3);
  o.yaw = std::numbers::pi * at(b + 4);
  return object_box(o, cam);
}

}  // namespace

EvalReport evaluate(const Predictor& predict, const Dataset& data) {
  EvalReport rep;
  double depth_sum = 0.0, dims_sum = 0.0;
  std::vector<ClassError> per_class(kClasses);
  for (int c = 0; c < kClasses; ++c) per_class[c].class_id = c;
  std::vector<std::vector<metrics::FrameEval>> frames_by_class(kClasses);

  for (const auto& frame : data.frames) {
    const Tensor out = predict(frame);
    const auto h = out.dim(0), w = out.dim(1);
    const auto& cam = frame.camera;
    const std::size_t b = kClasses + kBox2dOutputs;
    for (const auto& t : frame.objects) {
      const auto& o = t.object;
      const double dz = std::abs(decode_depth(cam, out.at(t.row, t.col, b)) - o.z);
      const double dd = (std::abs(out.at(t.row, t.col, b + 1) - o.h) + std::abs(out.at(t.row, t.col, b + 2) - o.w) +
                         std::abs(3.0 * out.at(t.row, t.col, b + 3) - o.l)) /
                        3.0;
      depth_sum += dz;
      dims_sum += dd;
      ++rep.objects;
      auto& pc = per_class[static_cast<std::size_t>(o.class_id)];
      pc.depth_mae += dz;
      ++pc.count;
    }

    std::vector<metrics::Detection> dets;
    for (int c = 0; c < kClasses; ++c) {
      metrics::FrameEval fe;
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          const double logit = out.at(i, j, static_cast<std::size_t>(c));
          const double s = sigmoid(logit);
          if (s <= kPeakThreshold) continue;
          bool peak = true;
          for (std::size_t ii = i > 0 ? i - 1 : 0; ii <= std::min(i + 1, h - 1) && peak; ++ii)
            for (std::size_t jj = j > 0 ? j - 1 : 0; jj <= std::min(j + 1, w - 1); ++jj)
              if (out.at(ii, jj, static_cast<std::size_t>(c)) > logit) peak = false;
          if (!peak) continue;
          metrics::Detection d{decode_box(out, i, j, cam), c, s};
          dets.push_back(d);
          fe.detections.push_back(d);
        }
      }
      for (const auto& t : frame.objects)
        if (t.object.class_id == c) fe.gts.push_back(object_box(t.object, cam));
      frames_by_class[static_cast<std::size_t>(c)].push_back(std::move(fe));
    }
    rep.detections.push_back(std::move(dets));
  }

  if (rep.objects > 0) {
    rep.depth_mae = depth_sum / static_cast<double>(rep.objects);
    rep.dims_mae = dims_sum / static_cast<double>(rep.objects);
  }
  for (auto& pc : per_class) {
    if (pc.count == 0) continue;
    pc.depth_mae /= static_cast<double>(pc.count);
    rep.per_class.push_back(pc);
  }
  double ap_sum = 0.0;
  int ap_n = 0;
  for (const auto& fc : frames_by_class) {
    const auto r = metrics::ap_r40(fc, metrics::bev_iou, kToyIouThreshold);
    if (r.ap) {
      ap_sum += *r.ap;
      ++ap_n;
    }
  }
  if (ap_n > 0) rep.ap = ap_sum / ap_n;
  return rep;
}

}  // namespace bottomup::toy
