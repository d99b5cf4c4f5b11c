// One PASS/FAIL line per acceptance criterion. Tolerances are fixed here.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bottomup/bench.hpp"
#include "bottomup/cca.hpp"
#include "bottomup/cli.hpp"
#include "bottomup/gradsuite.hpp"
#include "bottomup/metrics.hpp"
#include "bottomup/ops.hpp"
#include "bottomup/rrcs.hpp"

using namespace bottomup;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTol = 1e-6;
constexpr int kGradTrials = 20;
constexpr double kGradSeconds = 60.0;
constexpr double kSumTol = 1e-9;
constexpr double kLinearityTol = 1e-12;
constexpr double kCcaSlopeLo = 0.8, kCcaSlopeHi = 1.2;
constexpr double kQuadSlopeLo = 1.7, kQuadSlopeHi = 2.3;
constexpr double kBenchSeconds = 300.0;
constexpr double kAblationSeconds = 1800.0;
constexpr double kIouTol = 1e-2;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Tensor random_map(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng) {
  Tensor t({h, w, c});
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// ---------------------------------------------------------------- gradients

Outcome gradient_suite() {
  const GradSize sizes[] = {parse_grad_size("6x5x4"), parse_grad_size("3x4x2"), parse_grad_size("1x1x2")};
  const auto rep = run_grad_suite(2024, sizes, kGradTrials, kGradTol);
  std::string bad;
  for (const auto& c : rep.checks)
    if (!c.passed) bad += " " + c.op + "@" + c.size;
  const bool pass = rep.passed() && rep.seconds < kGradSeconds;
  return {pass, fmt("%zu checks x %d trials, worst rel err %.2e (< %.0e), %.1f s (< %.0f s)%s", rep.checks.size(),
                    kGradTrials, rep.worst(), kGradTol, rep.seconds, kGradSeconds,
                    bad.empty() ? "" : (" failing:" + bad).c_str())};
}

// ---------------------------------------------------------------- attention

Outcome attention_normalization() {
  std::mt19937_64 rng(11);
  double worst_col = 0.0, worst_glob = 0.0;
  for (int m = 0; m < 100; ++m) {
    const std::size_t h = pick(rng, 1, 24), w = pick(rng, 1, 24), c = 2 * pick(rng, 1, 8);
    const auto pe = PositionalEncoding::build(h, c);
    const Tensor f = random_map(h, w, c, rng);
    ParamSet col, glob;
    init_block_params(col, {AttentionMode::Column, true, ScanDirection::BottomUp}, w, c, rng, 1.0);
    init_block_params(glob, {AttentionMode::Global, true, ScanDirection::BottomUp}, w, c, rng, 1.0);
    // Larger queries give peaked softmaxes, the harder case for the sum.
    for (auto& v : col.get("block.queries").data()) v *= 200.0;
    const Tensor a = block_attention(f, col, pe, {AttentionMode::Column, true, ScanDirection::BottomUp});
    for (std::size_t j = 0; j < w; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < h; ++i) s += a.at(i, j);
      worst_col = std::max(worst_col, std::abs(s - 1.0));
    }
    const Tensor g = block_attention(f, glob, pe, {AttentionMode::Global, true, ScanDirection::BottomUp});
    double s = 0.0;
    for (double v : g.data()) s += v;
    worst_glob = std::max(worst_glob, std::abs(s - 1.0));
  }
  return {worst_col <= kSumTol && worst_glob <= kSumTol,
          fmt("100 maps: worst |column sum - 1| %.1e, worst |plane sum - 1| %.1e (<= %.0e)", worst_col, worst_glob,
              kSumTol)};
}

// ---------------------------------------------------------------- scan

Tensor naive_scan(const Tensor& f, ScanDirection dir) {
  const auto h = f.dim(0), w = f.dim(1), c = f.dim(2);
  Tensor out(f.shape());
  for (std::size_t j = 0; j < w; ++j) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double run = 0.0;
      for (std::size_t k = 0; k < h; ++k) {
        const std::size_t i = dir == ScanDirection::BottomUp ? k : h - 1 - k;
        run += f.at(i, j, ch);
        out.at(i, j, ch) = run;
      }
    }
  }
  return out;
}

Outcome scan_correctness() {
  std::mt19937_64 rng(12);
  int bitwise = 0, identity = 0;
  double worst_lin = 0.0;
  for (int m = 0; m < 100; ++m) {
    const std::size_t h = pick(rng, 1, 32), w = pick(rng, 1, 8), c = pick(rng, 1, 6);
    const Tensor x = random_map(h, w, c, rng), y = random_map(h, w, c, rng);
    const double a = std::uniform_real_distribution<double>(-2, 2)(rng), b = std::uniform_real_distribution<double>(-2, 2)(rng);
    bool same = true;
    for (auto dir : {ScanDirection::BottomUp, ScanDirection::UpBottom}) {
      same = same && vertical_cumsum(x, dir) == naive_scan(x, dir);
      Tensor mix(x.shape());
      for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x[i] + b * y[i];
      const Tensor lhs = vertical_cumsum(mix, dir), sx = vertical_cumsum(x, dir), sy = vertical_cumsum(y, dir);
      for (std::size_t i = 0; i < lhs.size(); ++i) worst_lin = std::max(worst_lin, std::abs(lhs[i] - (a * sx[i] + b * sy[i])));
      // Constants on a 1/64 grid keep every partial sum exactly representable.
      const double k = static_cast<double>(std::uniform_int_distribution<int>(-640, 640)(rng)) / 64.0;
      const Tensor cst = Tensor::filled({h, w, c}, k);
      identity += normalize_rows(vertical_cumsum(cst, dir), dir) == cst;
    }
    bitwise += same;
  }
  return {bitwise == 100 && identity == 200 && worst_lin <= kLinearityTol,
          fmt("bitwise vs naive loop %d/100 maps (both directions); linearity worst %.1e (<= %.0e); "
              "constant identity exact %d/200",
              bitwise, worst_lin, kLinearityTol, identity)};
}

// ---------------------------------------------------------------- causality

Outcome causality() {
  std::mt19937_64 rng(13);
  const BlockConfig cfg{};
  int checked = 0, violations = 0;
  for (int m = 0; m < 20; ++m) {
    const std::size_t h = pick(rng, 2, 16), w = pick(rng, 1, 8), c = 2 * pick(rng, 1, 4);
    ParamSet ps;
    init_block_params(ps, cfg, w, c, rng, static_cast<double>(h));
    const auto pe = PositionalEncoding::build(h, c);
    const Tensor f = random_map(h, w, c, rng);
    const Tensor weights = block_attention(f, ps, pe, cfg);
    const Tensor full = scan_with_weights(f, weights, cfg.direction);
    for (std::size_t i = 0; i < h; ++i) {
      Tensor cut = f;
      for (std::size_t r = i + 1; r < h; ++r)
        for (std::size_t j = 0; j < w; ++j)
          for (std::size_t ch = 0; ch < c; ++ch) cut.at(r, j, ch) = 0.0;
      const Tensor out = scan_with_weights(cut, weights, cfg.direction);
      for (std::size_t r = 0; r <= i; ++r)
        for (std::size_t j = 0; j < w; ++j)
          for (std::size_t ch = 0; ch < c; ++ch) violations += out.at(r, j, ch) != full.at(r, j, ch);
      ++checked;
    }
  }
  return {violations == 0, fmt("20 maps, %d cut rows, %d changed values at or below the cut", checked, violations)};
}

// ---------------------------------------------------------------- complexity

std::uint64_t cca_macs(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng) {
  const Tensor k = random_map(h, w, c, rng);
  Tensor q({w, c});
  mac_counter::reset();
  cca::apply_weights(k, cca::column_attention(k, q));
  return mac_counter::get();
}

Outcome complexity() {
  const auto start = Clock::now();
  std::mt19937_64 rng(14);
  bool linear = true;
  const std::uint64_t base = cca_macs(4, 6, 8, rng);
  for (std::uint64_t k = 2; k <= 5; ++k) {
    linear = linear && cca_macs(4 * k, 6, 8, rng) == k * base;
    linear = linear && cca_macs(4, 6 * k, 8, rng) == k * base;
    linear = linear && cca_macs(4, 6, 8 * k, rng) == k * base;
  }
  linear = linear && base == cca::cca_cost_model(4, 6, 8);

  std::vector<bench::MapSize> sizes;
  for (std::size_t h : {32, 64, 128, 256}) sizes.push_back({h, 96, 64});
  bench::ScalingOptions opts;
  opts.reps = 3;
  opts.seed = 14;
  const auto rows = bench::run_scaling(sizes, opts);
  const double cca_slope = bench::fit_slope(rows, bench::Kernel::Cca);
  const double quad_slope = bench::fit_slope(rows, bench::Kernel::Quadratic);
  bool counts_match = true;
  for (const auto& r : rows) {
    const auto expect = r.kernel == bench::Kernel::Cca ? cca::cca_cost_model(r.size.h, r.size.w, r.size.c)
                                                       : cca::global_cost_model(r.size.h, r.size.w, r.size.c);
    counts_match = counts_match && r.op_count == expect;
  }
  const double secs = since(start);
  const bool pass = linear && counts_match && cca_slope >= kCcaSlopeLo && cca_slope <= kCcaSlopeHi &&
                    quad_slope >= kQuadSlopeLo && quad_slope <= kQuadSlopeHi && secs < kBenchSeconds;
  return {pass, fmt("op counts exactly linear in H, W, C: %s; runtime counts match models: %s; slope vs H*W "
                    "cca %.3f in [%.1f, %.1f], quadratic %.3f in [%.1f, %.1f]; %.1f s (< %.0f s)",
                    linear ? "yes" : "no", counts_match ? "yes" : "no", cca_slope, kCcaSlopeLo, kCcaSlopeHi, quad_slope,
                    kQuadSlopeLo, kQuadSlopeHi, secs, kBenchSeconds)};
}

// ---------------------------------------------------------------- toy experiments

struct AblationData {
  std::vector<cli::RunResult> runs;
  double seconds = 0.0;
  double mae(toy::Variant v, std::uint64_t seed) const {
    for (const auto& r : runs)
      if (r.variant == v && r.seed == seed) return r.eval.depth_mae.value_or(INFINITY);
    return INFINITY;
  }
  double mean(toy::Variant v) const {
    double s = 0.0;
    for (std::uint64_t seed : {1, 2, 3}) s += mae(v, seed);
    return s / 3.0;
  }
};

AblationData run_toy() {
  cli::AblationOptions opts;
  opts.variants = {toy::Variant::Baseline, toy::Variant::CcaOnly, toy::Variant::RrcsOnly, toy::Variant::Yolobu,
                   toy::Variant::UpBottom};
  opts.seeds = {1, 2, 3};
  const auto start = Clock::now();
  AblationData d;
  d.runs = cli::run_ablation(opts);
  d.seconds = since(start);
  return d;
}

Outcome ambiguity(const AblationData& d) {
  using toy::Variant;
  int beats_base = 0, beats_cca = 0, beats_rrcs = 0, loss_down = 0;
  std::string table;
  for (std::uint64_t s : {1, 2, 3}) {
    const double y = d.mae(Variant::Yolobu, s);
    beats_base += y < d.mae(Variant::Baseline, s);
    beats_cca += y < d.mae(Variant::CcaOnly, s);
    beats_rrcs += y < d.mae(Variant::RrcsOnly, s);
    table += fmt(" seed %llu: yolobu %.3f baseline %.3f cca_only %.3f rrcs_only %.3f;",
                 static_cast<unsigned long long>(s), y, d.mae(Variant::Baseline, s), d.mae(Variant::CcaOnly, s),
                 d.mae(Variant::RrcsOnly, s));
  }
  for (const auto& r : d.runs)
    if (r.variant == Variant::Yolobu && r.loss_curve.size() >= 2) loss_down += r.loss_curve.back() < r.loss_curve.front();
  const bool pass = beats_base == 3 && beats_cca >= 2 && beats_rrcs >= 2 && loss_down == 3 && d.seconds < kAblationSeconds;
  return {pass, fmt("depth MAE (m) on held-out ambiguous pairs:%s yolobu below baseline %d/3, below cca_only %d/3, "
                    "below rrcs_only %d/3; yolobu final loss below first %d/3; %.0f s for all toy runs (< %.0f s)",
                    table.c_str(), beats_base, beats_cca, beats_rrcs, loss_down, d.seconds, kAblationSeconds)};
}

Outcome direction(const AblationData& d) {
  const double bu = d.mean(toy::Variant::Yolobu), ub = d.mean(toy::Variant::UpBottom);
  return {bu <= ub, fmt("mean depth MAE over 3 seeds: bottom-up %.3f, up-bottom %.3f", bu, ub)};
}

// ---------------------------------------------------------------- metrics

// Point-in-box test in the box frame: x right, z forward, yaw about y.
bool in_footprint(const metrics::Box3D& b, double x, double z) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double dx = c * (x - b.center[0]) - s * (z - b.center[2]);
  const double dz = s * (x - b.center[0]) + c * (z - b.center[2]);
  return std::abs(dx) <= b.l / 2 && std::abs(dz) <= b.w / 2;
}

std::pair<double, double> mc_iou(const metrics::Box3D& a, const metrics::Box3D& b, std::mt19937_64& rng, int n) {
  double lo[3], hi[3];
  for (int k = 0; k < 3; ++k) {
    lo[k] = 1e300;
    hi[k] = -1e300;
  }
  for (const auto* bx : {&a, &b}) {
    const double r = 0.5 * std::hypot(bx->l, bx->w);
    lo[0] = std::min(lo[0], bx->center[0] - r);
    hi[0] = std::max(hi[0], bx->center[0] + r);
    lo[1] = std::min(lo[1], bx->center[1] - bx->h / 2);
    hi[1] = std::max(hi[1], bx->center[1] + bx->h / 2);
    lo[2] = std::min(lo[2], bx->center[2] - r);
    hi[2] = std::max(hi[2], bx->center[2] + r);
  }
  std::uniform_real_distribution<double> ux(lo[0], hi[0]), uy(lo[1], hi[1]), uz(lo[2], hi[2]);
  long ia2 = 0, ib2 = 0, both2 = 0, ia3 = 0, ib3 = 0, both3 = 0;
  for (int s = 0; s < n; ++s) {
    const double x = ux(rng), y = uy(rng), z = uz(rng);
    const bool fa = in_footprint(a, x, z), fb = in_footprint(b, x, z);
    ia2 += fa;
    ib2 += fb;
    both2 += fa && fb;
    const bool va = fa && std::abs(y - a.center[1]) <= a.h / 2, vb = fb && std::abs(y - b.center[1]) <= b.h / 2;
    ia3 += va;
    ib3 += vb;
    both3 += va && vb;
  }
  auto ratio = [](long i, long u) { return u == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(u); };
  return {ratio(both2, ia2 + ib2 - both2), ratio(both3, ia3 + ib3 - both3)};
}

struct ApFixture {
  std::string name;
  // Per frame: gt x positions, ignored flags, detections (x, confidence).
  struct Frame {
    std::vector<double> gts;
    std::vector<bool> ignored;
    std::vector<std::pair<double, double>> dets;
  };
  std::vector<Frame> frames;
};

double line_iou(const metrics::Box3D& a, const metrics::Box3D& b) {
  return std::max(0.0, 1.0 - std::abs(a.center[0] - b.center[0]));
}

// Enumerates every distinct confidence as a cutoff, matches the kept
// detections greedily, and reads precision and recall at that cutoff.
double brute_force_ap(const ApFixture& fx, double thr) {
  std::vector<double> cuts;
  int n_gt = 0;
  for (const auto& f : fx.frames) {
    for (auto [x, c] : f.dets) cuts.push_back(c);
    for (std::size_t g = 0; g < f.gts.size(); ++g) n_gt += f.ignored.empty() || !f.ignored[g];
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<std::pair<double, double>> pr;
  for (double t : cuts) {
    struct Item {
      double conf;
      std::size_t frame, det;
    };
    std::vector<Item> kept;
    for (std::size_t fi = 0; fi < fx.frames.size(); ++fi)
      for (std::size_t d = 0; d < fx.frames[fi].dets.size(); ++d)
        if (fx.frames[fi].dets[d].second >= t) kept.push_back({fx.frames[fi].dets[d].second, fi, d});
    std::stable_sort(kept.begin(), kept.end(), [](const Item& a, const Item& b) { return a.conf > b.conf; });
    std::vector<std::vector<bool>> used;
    for (const auto& f : fx.frames) used.emplace_back(f.gts.size(), false);
    int tp = 0, fp = 0;
    for (const auto& it : kept) {
      const auto& f = fx.frames[it.frame];
      const double x = f.dets[it.det].first;
      int best = -1;
      double best_iou = -1;
      for (std::size_t g = 0; g < f.gts.size(); ++g) {
        const double iou = std::max(0.0, 1.0 - std::abs(x - f.gts[g]));
        if (!used[it.frame][g] && iou >= thr && iou > best_iou) {
          best = static_cast<int>(g);
          best_iou = iou;
        }
      }
      if (best < 0) {
        ++fp;
        continue;
      }
      used[it.frame][best] = true;
      if (!f.ignored.empty() && f.ignored[best]) continue;
      ++tp;
    }
    if (tp + fp > 0) pr.push_back({static_cast<double>(tp) / n_gt, static_cast<double>(tp) / (tp + fp)});
  }
  double acc = 0.0;
  for (int k = 1; k <= 40; ++k) {
    double best = 0.0;
    for (auto [r, p] : pr)
      if (r >= static_cast<double>(k) / 40) best = std::max(best, p);
    acc += best;
  }
  return acc / 40;
}

metrics::Box3D at_x(double x) {
  metrics::Box3D b;
  b.center = {x, 0.0, 10.0};
  return b;
}

std::vector<ApFixture> ap_fixtures() {
  using F = ApFixture::Frame;
  return {
      {"perfect", {F{{0, 5, 10}, {}, {{0, 0.9}, {5, 0.8}, {10, 0.7}}}}},
      {"all false", {F{{0, 5}, {}, {{20, 0.9}, {30, 0.8}}}}},
      {"false before true", {F{{0, 5, 10}, {}, {{40, 0.95}, {0, 0.9}, {41, 0.85}, {5, 0.8}, {10.2, 0.3}}}}},
      {"duplicate detections", {F{{0, 5}, {}, {{0, 0.9}, {0.1, 0.85}, {5.2, 0.6}, {5, 0.5}}}}},
      {"tied confidences", {F{{0, 5, 10, 15}, {}, {{0, 0.5}, {30, 0.5}, {5, 0.5}, {10, 0.4}, {31, 0.4}}}}},
      {"missed ground truth", {F{{0, 5, 10, 15, 20}, {}, {{0, 0.9}, {5, 0.2}}}}},
      {"two frames",
       {F{{0, 5}, {}, {{0, 0.9}, {50, 0.7}}}, F{{0, 8}, {}, {{0.3, 0.8}, {8, 0.6}, {60, 0.55}}}}},
      {"ignored ground truth",
       {F{{0, 5, 10}, {false, true, false}, {{5, 0.95}, {0, 0.9}, {30, 0.8}, {10, 0.7}}}}},
      {"nearest of two candidates", {F{{0, 0.4}, {}, {{0.35, 0.9}, {0.05, 0.8}}}}},
      {"many detections",
       {F{{0, 2, 4, 6, 8, 10, 12, 14},
          {},
          {{0, 0.99}, {2.3, 0.97}, {25, 0.96}, {4, 0.9}, {6.1, 0.88}, {27, 0.87}, {8, 0.8}, {9.8, 0.7}, {12.4, 0.6},
           {33, 0.55}, {14, 0.5}, {14.1, 0.45}}}}},
  };
}

Outcome metric_checks() {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> pos(-1.0, 1.0), size(0.8, 4.5), ang(-3.14159, 3.14159), hgt(1.0, 2.5);
  double worst_bev = 0.0, worst_3d = 0.0;
  for (int k = 0; k < 100; ++k) {
    metrics::Box3D a, b;
    a.center = {pos(rng), pos(rng) * 0.5, 20 + pos(rng)};
    b.center = {a.center[0] + pos(rng), a.center[1] + pos(rng) * 0.8, a.center[2] + pos(rng)};
    for (auto* bx : {&a, &b}) {
      bx->l = size(rng);
      bx->w = size(rng) * 0.6;
      bx->h = hgt(rng);
      bx->yaw = ang(rng);
    }
    const auto [bev, v3] = mc_iou(a, b, rng, 400000);
    worst_bev = std::max(worst_bev, std::abs(metrics::bev_iou(a, b) - bev));
    worst_3d = std::max(worst_3d, std::abs(metrics::iou_3d(a, b) - v3));
  }

  int ap_exact = 0;
  std::string ap_bad;
  const auto fixtures = ap_fixtures();
  for (const auto& fx : fixtures) {
    std::vector<metrics::FrameEval> frames;
    for (const auto& f : fx.frames) {
      metrics::FrameEval fe;
      for (double x : f.gts) fe.gts.push_back(at_x(x));
      fe.gt_ignored = f.ignored;
      for (auto [x, c] : f.dets) fe.detections.push_back({at_x(x), 0, c});
      frames.push_back(std::move(fe));
    }
    const auto got = metrics::ap_r40(frames, line_iou, 0.5);
    const double want = brute_force_ap(fx, 0.5);
    if (got.ap && *got.ap == want) {
      ++ap_exact;
    } else {
      ap_bad += fmt(" [%s: %.17g vs %.17g]", fx.name.c_str(), got.ap.value_or(-1.0), want);
    }
  }

  int lines = 0, identical = 0;
  for (const char* sub : {"gt", "pred"}) {
    for (const auto& e : fs::directory_iterator(fs::path(BOTTOMUP_TEST_DATA) / "kitti" / sub)) {
      std::ifstream in(e.path());
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto label = metrics::parse_kitti_label(line);
        const auto again = metrics::parse_kitti_label(metrics::format_kitti_label(label));
        ++lines;
        identical += again == label && metrics::format_kitti_label(again) == metrics::format_kitti_label(label);
      }
    }
  }

  const bool pass = worst_bev <= kIouTol && worst_3d <= kIouTol && ap_exact == static_cast<int>(fixtures.size()) &&
                    lines > 0 && identical == lines;
  return {pass, fmt("100 box pairs vs sampling: worst BEV diff %.4f, worst 3D diff %.4f (<= %.0e); AP|R40 exact on "
                    "%d/%zu fixtures%s; KITTI round trip %d/%d lines",
                    worst_bev, worst_3d, kIouTol, ap_exact, fixtures.size(), ap_bad.c_str(), identical, lines)};
}

// ---------------------------------------------------------------- determinism

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "bottomup_acceptance_determinism";
  fs::remove_all(root);
  std::string csv[2];
  int codes[2];
  for (int k = 0; k < 2; ++k) {
    const auto out = root / std::to_string(k);
    std::ostringstream o, e;
    codes[k] = cli::run({"ablate", "--variants", "baseline,yolobu,up_bottom", "--seeds", "4,5", "--epochs", "3",
                         "--train-frames", "24", "--val-frames", "12", "--grid", "16", "--out", out.string()},
                        o, e);
    std::ifstream f(out / "ablate.csv", std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    csv[k] = ss.str();
  }
  fs::remove_all(root);
  const bool pass = codes[0] == 0 && codes[1] == 0 && !csv[0].empty() && csv[0] == csv[1];
  return {pass, fmt("two ablate runs (3 variants x 2 seeds): exit %d/%d, CSV %zu bytes, byte-identical: %s", codes[0],
                    codes[1], csv[0].size(), csv[0] == csv[1] ? "yes" : "no")};
}

}  // namespace

int main() {
  struct Line {
    std::string name;
    Outcome outcome;
    double seconds;
  };
  std::vector<Line> lines;
  auto record = [&](const std::string& name, const std::function<Outcome()>& fn) {
    const auto t = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    lines.push_back({name, o, since(t)});
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  };

  record("gradient suite", gradient_suite);
  record("attention normalization", attention_normalization);
  record("scan correctness", scan_correctness);
  record("bottom-up causality", causality);
  record("complexity", complexity);
  AblationData toy;
  record("ambiguity experiment", [&] {
    toy = run_toy();
    return ambiguity(toy);
  });
  record("direction ablation", [&] { return direction(toy); });
  record("metrics", metric_checks);
  record("determinism", determinism);

  // Absolute KITTI AP values need full-scale training; the property suite
  // above stands in for them, so this line passes only if all of it does.
  const bool all = std::all_of(lines.begin(), lines.end(), [](const Line& l) { return l.outcome.pass; });
  std::printf("%s absolute AP substitution: %d/%zu property criteria pass\n", all ? "PASS" : "FAIL",
              static_cast<int>(std::count_if(lines.begin(), lines.end(), [](const Line& l) { return l.outcome.pass; })),
              lines.size());
  return all ? 0 : 1;
}
