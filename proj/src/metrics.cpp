#include "bottomup/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace bottomup::metrics {

namespace {

constexpr double kDedupEps = 1e-12;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

Point2 line_hit(const Point2& p, const Point2& q, const Point2& a, const Point2& b) {
  // Point on segment p->q that lies on the line a->b.
  const double dp = cross(a, b, p);
  const double dq = cross(a, b, q);
  const double t = dp / (dp - dq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

Polygon dedup(Polygon poly) {
  Polygon out;
  for (const auto& p : poly) {
    if (!out.empty() && std::abs(p.x - out.back().x) <= kDedupEps && std::abs(p.y - out.back().y) <= kDedupEps)
      continue;
    out.push_back(p);
  }
  while (out.size() > 1 && std::abs(out.front().x - out.back().x) <= kDedupEps &&
         std::abs(out.front().y - out.back().y) <= kDedupEps)
    out.pop_back();
  return out;
}

auto key(const Box3D& b) { return std::tie(b.center[0], b.center[1], b.center[2], b.h, b.w, b.l, b.yaw); }

double footprint_area(const Box3D& b) { return b.l * b.w; }

bool degenerate(const Box3D& b) { return !(b.l > 0.0 && b.w > 0.0 && b.h > 0.0); }

double bev_intersection(const Box3D& a, const Box3D& b) {
  return std::abs(polygon_area(clip_convex(bev_footprint(a), bev_footprint(b))));
}

// Overlap of the vertical extents; y points down, center is mid-height.
double vertical_overlap(const Box3D& a, const Box3D& b) {
  const double lo = std::max(a.center[1] - a.h / 2, b.center[1] - b.h / 2);
  const double hi = std::min(a.center[1] + a.h / 2, b.center[1] + b.h / 2);
  return std::max(0.0, hi - lo);
}

}  // namespace

Polygon bev_footprint(const Box3D& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double hl = b.l / 2, hw = b.w / 2;
  const std::array<std::pair<double, double>, 4> local{{{hl, -hw}, {hl, hw}, {-hl, hw}, {-hl, -hw}}};
  Polygon poly;
  for (auto [dx, dz] : local) poly.push_back({b.center[0] + c * dx + s * dz, b.center[2] - s * dx + c * dz});
  return poly;
}

double polygon_area(const Polygon& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    acc += p.x * q.y - q.x * p.y;
  }
  return acc / 2;
}

Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
  Polygon out = subject;
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Point2& a = clip[e];
    const Point2& b = clip[(e + 1) % clip.size()];
    Polygon in = std::move(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Point2& p = in[i];
      const Point2& q = in[(i + 1) % in.size()];
      const bool p_in = cross(a, b, p) >= 0.0;
      const bool q_in = cross(a, b, q) >= 0.0;
      if (p_in) out.push_back(p);
      if (p_in != q_in) out.push_back(line_hit(p, q, a, b));
    }
    out = dedup(std::move(out));
  }
  return out;
}

// Both IoUs evaluate in a fixed argument order so iou(a, b) == iou(b, a)
// bit for bit, contracted multiply-adds included.
double bev_iou(const Box3D& a, const Box3D& b) {
  if (key(b) < key(a)) return bev_iou(b, a);
  if (degenerate(a) || degenerate(b)) return 0.0;
  const double inter = bev_intersection(a, b);
  const double uni = footprint_area(a) + footprint_area(b) - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double iou_3d(const Box3D& a, const Box3D& b) {
  if (key(b) < key(a)) return iou_3d(b, a);
  if (degenerate(a) || degenerate(b)) return 0.0;
  const double dy = vertical_overlap(a, b);
  if (dy <= 0.0) return 0.0;
  const double inter = bev_intersection(a, b) * dy;
  const double uni = footprint_area(a) * a.h + footprint_area(b) * b.h - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double interpolate_r40(std::span<const PrPoint> curve) {
  double acc = 0.0;
  for (int k = 1; k <= kRecallPoints; ++k) {
    const double r = static_cast<double>(k) / kRecallPoints;
    double best = 0.0;
    for (const auto& p : curve)
      if (p.recall >= r) best = std::max(best, p.precision);
    acc += best;
  }
  return acc / kRecallPoints;
}

ApResult ap_r40(std::span<const FrameEval> frames, const IouFn& iou, double threshold) {
  struct Item {
    double conf;
    std::size_t frame, index;
  };
  std::vector<Item> items;
  std::vector<std::vector<bool>> taken(frames.size());
  ApResult res;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& fr = frames[f];
    taken[f].assign(fr.gts.size(), false);
    for (std::size_t g = 0; g < fr.gts.size(); ++g)
      if (fr.gt_ignored.empty() || !fr.gt_ignored[g]) ++res.n_gt;
    for (std::size_t d = 0; d < fr.detections.size(); ++d) items.push_back({fr.detections[d].confidence, f, d});
  }
  res.n_det = items.size();
  if (res.n_gt == 0) return res;

  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.conf > b.conf; });
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& fr = frames[items[k].frame];
    const auto& det = fr.detections[items[k].index];
    auto& used = taken[items[k].frame];
    auto ignored = [&](std::size_t g) { return !fr.gt_ignored.empty() && fr.gt_ignored[g]; };
    auto best_match = [&](bool want_ignored) {
      std::ptrdiff_t best = -1;
      double best_iou = threshold;
      for (std::size_t g = 0; g < fr.gts.size(); ++g) {
        if (used[g] || ignored(g) != want_ignored) continue;
        const double v = iou(det.box, fr.gts[g]);
        if (v >= best_iou && (best < 0 || v > best_iou)) {
          best = static_cast<std::ptrdiff_t>(g);
          best_iou = v;
        }
      }
      return best;
    };
    if (auto g = best_match(false); g >= 0) {
      used[static_cast<std::size_t>(g)] = true;
      ++tp;
    } else if (auto gi = best_match(true); gi >= 0) {
      used[static_cast<std::size_t>(gi)] = true;
    } else {
      ++fp;
    }
    const bool last_of_level = k + 1 == items.size() || items[k + 1].conf != items[k].conf;
    if (last_of_level && tp + fp > 0) {
      res.curve.push_back({static_cast<double>(tp) / static_cast<double>(res.n_gt),
                           static_cast<double>(tp) / static_cast<double>(tp + fp)});
    }
  }
  res.ap = interpolate_r40(res.curve);
  return res;
}

ApResult ap_r40(std::span<const Detection> detections, std::span<const Box3D> gts, const IouFn& iou,
                double threshold) {
  FrameEval fr{{detections.begin(), detections.end()}, {gts.begin(), gts.end()}, {}};
  return ap_r40(std::span<const FrameEval>(&fr, 1), iou, threshold);
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
T parse_number(std::string_view s, int field) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw KittiParseError("field " + std::to_string(field) + ": not a number: '" + std::string(s) + "'", field);
  }
  return v;
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

KittiLabel parse_kitti_label(std::string_view line) {
  const auto f = split_ws(line);
  if (f.size() != 15 && f.size() != 16) {
    throw KittiParseError("expected 15 or 16 fields, got " + std::to_string(f.size()), -1);
  }
  KittiLabel l;
  l.type = std::string(f[0]);
  l.truncated = parse_number<double>(f[1], 1);
  l.occluded = parse_number<int>(f[2], 2);
  l.alpha = parse_number<double>(f[3], 3);
  for (int i = 0; i < 4; ++i) l.bbox[i] = parse_number<double>(f[4 + i], 4 + i);
  for (int i = 0; i < 3; ++i) l.dims[i] = parse_number<double>(f[8 + i], 8 + i);
  for (int i = 0; i < 3; ++i) l.location[i] = parse_number<double>(f[11 + i], 11 + i);
  l.rotation_y = parse_number<double>(f[14], 14);
  if (f.size() == 16) l.score = parse_number<double>(f[15], 15);
  return l;
}

std::string format_kitti_label(const KittiLabel& l) {
  std::string s = l.type + ' ' + fmt(l.truncated) + ' ' + std::to_string(l.occluded) + ' ' + fmt(l.alpha);
  for (double v : l.bbox) s += ' ' + fmt(v);
  for (double v : l.dims) s += ' ' + fmt(v);
  for (double v : l.location) s += ' ' + fmt(v);
  s += ' ' + fmt(l.rotation_y);
  if (l.score) s += ' ' + fmt(*l.score);
  return s;
}

std::vector<KittiLabel> read_kitti_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::vector<KittiLabel> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (split_ws(line).empty()) continue;
    try {
      out.push_back(parse_kitti_label(line));
    } catch (const KittiParseError& e) {
      throw KittiParseError(path.string() + ":" + std::to_string(n) + ": " + e.what(), e.field());
    }
  }
  return out;
}

Box3D to_box(const KittiLabel& l) {
  Box3D b;
  b.h = l.dims[0];
  b.w = l.dims[1];
  b.l = l.dims[2];
  b.center = {l.location[0], l.location[1] - l.dims[0] / 2, l.location[2]};
  b.yaw = l.rotation_y;
  return b;
}

std::vector<DifficultyCutoffs> load_difficulties(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  auto doc = nlohmann::json::parse(in);
  std::vector<DifficultyCutoffs> out;
  for (const auto& e : doc) {
    out.push_back({e.at("name").get<std::string>(), e.at("min_height").get<double>(), e.at("max_occlusion").get<int>(),
                   e.at("max_truncation").get<double>()});
  }
  return out;
}

bool passes(const KittiLabel& l, const DifficultyCutoffs& cut) {
  return l.bbox[3] - l.bbox[1] >= cut.min_height && l.occluded <= cut.max_occlusion &&
         l.truncated <= cut.max_truncation;
}

ReportRow evaluate_class(std::span<const LabelFrame> frames, const std::string& cls, const DifficultyCutoffs& cut,
                         double iou_threshold) {
  std::vector<FrameEval> evals;
  for (const auto& fr : frames) {
    FrameEval e;
    for (const auto& g : fr.gt) {
      if (g.type != cls) continue;
      e.gts.push_back(to_box(g));
      e.gt_ignored.push_back(!passes(g, cut));
    }
    for (const auto& p : fr.pred) {
      if (p.type != cls || p.bbox[3] - p.bbox[1] < cut.min_height) continue;
      e.detections.push_back({to_box(p), 0, p.score.value_or(1.0)});
    }
    evals.push_back(std::move(e));
  }
  ReportRow row{cls, cut.name, {}, {}, 0, 0};
  const auto r3 = ap_r40(evals, iou_3d, iou_threshold);
  const auto rb = ap_r40(evals, bev_iou, iou_threshold);
  row.ap_3d = r3.ap;
  row.ap_bev = rb.ap;
  row.n_gt = r3.n_gt;
  row.n_det = r3.n_det;
  return row;
}

std::string report_json(std::span<const ReportRow> rows) {
  auto arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json o;
    o["class"] = r.cls;
    o["difficulty"] = r.difficulty;
    o["ap_3d"] = r.ap_3d ? nlohmann::json(*r.ap_3d) : nlohmann::json(nullptr);
    o["ap_bev"] = r.ap_bev ? nlohmann::json(*r.ap_bev) : nlohmann::json(nullptr);
    o["n_gt"] = r.n_gt;
    o["n_det"] = r.n_det;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

}  // namespace bottomup::metrics
