#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "bottomup/metrics.hpp"
#include "doctest.h"

using namespace bottomup;
using namespace bottomup::metrics;

namespace {

Box3D box(double x, double z, double l, double w, double yaw, double y = 0.0, double h = 1.0) {
  Box3D b;
  b.center = {x, y, z};
  b.l = l;
  b.w = w;
  b.h = h;
  b.yaw = yaw;
  return b;
}

// Footprint membership by rotating the point into the box frame. Only the
// in-plane extent is needed, so the sign convention of yaw does not matter
// as long as both boxes use the same one as bev_footprint.
bool inside(const Box3D& b, double x, double z) {
  const auto fp = bev_footprint(b);
  for (std::size_t i = 0; i < fp.size(); ++i) {
    const auto& p = fp[i];
    const auto& q = fp[(i + 1) % fp.size()];
    if ((q.x - p.x) * (z - p.y) - (q.y - p.y) * (x - p.x) < 0) return false;
  }
  return true;
}

double mc_bev_iou(const Box3D& a, const Box3D& b, std::mt19937_64& rng, int samples) {
  double x0 = 1e9, x1 = -1e9, z0 = 1e9, z1 = -1e9;
  for (const auto* bx : {&a, &b}) {
    const double r = 0.5 * std::hypot(bx->l, bx->w);
    x0 = std::min(x0, bx->center[0] - r);
    x1 = std::max(x1, bx->center[0] + r);
    z0 = std::min(z0, bx->center[2] - r);
    z1 = std::max(z1, bx->center[2] + r);
  }
  std::uniform_real_distribution<double> ux(x0, x1), uz(z0, z1);
  int in_a = 0, in_b = 0, both = 0;
  for (int s = 0; s < samples; ++s) {
    const double x = ux(rng), z = uz(rng);
    const bool ia = inside(a, x, z), ib = inside(b, x, z);
    in_a += ia;
    in_b += ib;
    both += ia && ib;
  }
  const int uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / uni;
}

// Every distinct confidence is a cutoff; keep detections at or above it,
// match greedily by confidence, and read precision and recall directly.
double brute_force_r40(const std::vector<std::pair<double, std::vector<int>>>& dets, int n_gt) {
  // dets: confidence and candidate gt indices in preference order.
  std::vector<double> cuts;
  for (const auto& d : dets) cuts.push_back(d.first);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<std::pair<double, double>> pr;
  for (double t : cuts) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < dets.size(); ++i)
      if (dets[i].first >= t) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return dets[a].first > dets[b].first; });
    std::vector<bool> used(n_gt, false);
    int tp = 0;
    for (auto i : idx) {
      for (int g : dets[i].second) {
        if (!used[g]) {
          used[g] = true;
          ++tp;
          break;
        }
      }
    }
    pr.push_back({static_cast<double>(tp) / n_gt, static_cast<double>(tp) / idx.size()});
  }
  double acc = 0;
  for (int k = 1; k <= 40; ++k) {
    double best = 0;
    for (auto [r, p] : pr)
      if (r >= k / 40.0) best = std::max(best, p);
    acc += best;
  }
  return acc / 40;
}

}  // namespace

TEST_CASE("identical boxes have IoU one, disjoint boxes zero") {
  const auto a = box(1, 10, 4, 2, 0.3);
  CHECK(bev_iou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(iou_3d(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bev_iou(a, box(20, 10, 4, 2, 0.3)) == 0.0);
}

TEST_CASE("axis-aligned overlap has a closed form") {
  // 4x2 boxes shifted 1 along x: overlap 3x2 = 6, union 10.
  const auto a = box(0, 0, 4, 2, 0), b = box(1, 0, 4, 2, 0);
  CHECK(bev_iou(a, b) == doctest::Approx(0.6).epsilon(1e-12));
  // Half the height overlaps: 6*0.5 / (8 + 8 - 3).
  auto c = b;
  c.center[1] = 0.5;
  CHECK(iou_3d(a, c) == doctest::Approx(3.0 / 13.0).epsilon(1e-12));
}

TEST_CASE("quarter-turn leaves a square's footprint unchanged") {
  CHECK(bev_iou(box(0, 0, 2, 2, 0), box(0, 0, 2, 2, std::numbers::pi / 2)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rotated IoU agrees with sampling") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-1.5, 1.5), size(0.5, 4.0), ang(-3.14, 3.14);
  for (int k = 0; k < 10; ++k) {
    const auto a = box(pos(rng), pos(rng), size(rng), size(rng), ang(rng));
    const auto b = box(pos(rng), pos(rng), size(rng), size(rng), ang(rng));
    CHECK(std::abs(bev_iou(a, b) - mc_bev_iou(a, b, rng, 100000)) < 1e-2);
    CHECK(bev_iou(a, b) == bev_iou(b, a));
  }
}

TEST_CASE("AP_R40 fixtures against cutoff enumeration") {
  // gt at x = 0, 10, 20; a detection matches the gt within 1 m.
  std::vector<Box3D> gts{box(0, 0, 1, 1, 0), box(10, 0, 1, 1, 0), box(20, 0, 1, 1, 0)};
  auto iou = [](const Box3D& a, const Box3D& b) { return std::abs(a.center[0] - b.center[0]) < 1.0 ? 1.0 : 0.0; };
  auto det = [](double x, double conf) { return Detection{box(x, 0, 1, 1, 0), 0, conf}; };

  std::vector<Detection> ds{det(0, 0.9), det(50, 0.8), det(10, 0.7), det(0.2, 0.6), det(20, 0.5)};
  const auto r = ap_r40(ds, gts, iou, 0.5);
  const double want = brute_force_r40({{0.9, {0}}, {0.8, {}}, {0.7, {1}}, {0.6, {0}}, {0.5, {2}}}, 3);
  CHECK(*r.ap == want);
  CHECK(r.n_gt == 3);
  CHECK(r.n_det == 5);

  CHECK(*ap_r40(std::vector<Detection>{}, gts, iou, 0.5).ap == 0.0);
  CHECK_FALSE(ap_r40(ds, std::vector<Box3D>{}, iou, 0.5).defined());
}

TEST_CASE("ignored ground truth absorbs its detection") {
  std::vector<Box3D> gts{box(0, 0, 1, 1, 0), box(10, 0, 1, 1, 0)};
  auto iou = [](const Box3D& a, const Box3D& b) { return std::abs(a.center[0] - b.center[0]) < 1.0 ? 1.0 : 0.0; };
  FrameEval fr{{{box(10, 0, 1, 1, 0), 0, 0.9}, {box(0, 0, 1, 1, 0), 0, 0.5}}, gts, {false, true}};
  const auto r = ap_r40(std::span<const FrameEval>(&fr, 1), iou, 0.5);
  // Only the first gt counts; the other detection is neither TP nor FP.
  CHECK(r.n_gt == 1);
  CHECK(*r.ap == 1.0);
}

TEST_CASE("KITTI labels round-trip") {
  const std::string line = "Car 0 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.7 -1.59";
  const auto l = parse_kitti_label(line);
  CHECK(l.type == "Car");
  CHECK(l.location[2] == 46.7);
  CHECK_FALSE(l.score.has_value());
  CHECK(format_kitti_label(l) == line);
  CHECK(parse_kitti_label(format_kitti_label(l)) == l);
  const auto s = parse_kitti_label(line + " 0.123456789012345");
  CHECK(*s.score == 0.123456789012345);
  CHECK(parse_kitti_label(format_kitti_label(s)) == s);
}

TEST_CASE("malformed KITTI lines name the field") {
  try {
    parse_kitti_label("Car 0 0 -1.58 587.01 173.33 614.12 200.12 1.65 x 3.64 -0.65 1.71 46.7 -1.59");
    FAIL("expected a parse error");
  } catch (const KittiParseError& e) {
    CHECK(e.field() == 9);
  }
  try {
    parse_kitti_label("Car 0 0");
    FAIL("expected a parse error");
  } catch (const KittiParseError& e) {
    CHECK(e.field() == -1);
  }
}

TEST_CASE("label files from disk round-trip and evaluate") {
  const std::string dir = BOTTOMUP_TEST_DATA "/kitti";
  const auto gt = read_kitti_file(dir + "/gt/000000.txt");
  REQUIRE(gt.size() == 4);
  for (const auto& l : gt) CHECK(parse_kitti_label(format_kitti_label(l)) == l);
  CHECK_THROWS(read_kitti_file(dir + "/missing.txt"));

  const auto cuts = load_difficulties(BOTTOMUP_CONFIG_DIR "/kitti_difficulty.json");
  REQUIRE(cuts.size() == 3);
  std::vector<LabelFrame> frames{{gt, read_kitti_file(dir + "/pred/000000.txt")}};
  // Car boxes are 26.8 and 21.6 px tall: none is easy, one is moderate.
  CHECK_FALSE(evaluate_class(frames, "Car", cuts[0], 0.7).ap_3d.has_value());
  const auto moderate = evaluate_class(frames, "Car", cuts[1], 0.7);
  CHECK(moderate.n_gt == 1);
  CHECK(moderate.ap_3d.has_value());
  const auto ped = evaluate_class(frames, "Pedestrian", cuts[1], 0.5);
  CHECK(ped.n_gt == 1);
  CHECK(*ped.ap_bev == 1.0);
  const auto cyc = evaluate_class(frames, "Cyclist", cuts[1], 0.5);
  CHECK_FALSE(cyc.ap_3d.has_value());
  CHECK(report_json(std::vector<ReportRow>{cyc}).find("null") != std::string::npos);
}
