#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bottomup/toy3d.hpp"

namespace bottomup::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitCheckFailed = 2;

/// Parses and runs one command. Never throws; failures map to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct AblationOptions {
  std::vector<toy::Variant> variants{toy::kAllVariants.begin(), toy::kAllVariants.end()};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int epochs = 30;
  std::size_t train_frames = 400;
  std::size_t val_frames = 100;
  double lr = 0.002;
  std::size_t hidden = 32;
  std::size_t grid = 32;
};

struct RunResult {
  toy::Variant variant = toy::Variant::Baseline;
  std::uint64_t seed = 0;
  toy::EvalReport eval;
  std::vector<double> loss_curve;
  double seconds = 0.0;
};

/// Trains every (variant, seed) pair and scores it on held-out frames made
/// only of ambiguous pairs. Runs are independent and may execute in parallel;
/// results come back in (variant, seed) order.
std::vector<RunResult> run_ablation(const AblationOptions& opts);

/// variant,seed,depth_mae,dims_mae,toy_ap rows, then one "mean" row per variant.
std::string ablation_csv(const std::vector<RunResult>& runs, const std::vector<toy::Variant>& variants);

/// Scene settings shared by training and held-out data for a given grid.
toy::SceneConfig scene_for(std::size_t grid);
toy::Dataset train_split(const toy::SceneConfig& scene, std::uint64_t seed, std::size_t frames);
toy::Dataset heldout_split(const toy::SceneConfig& scene, std::uint64_t seed, std::size_t frames);

struct Series {
  std::string name;
  std::vector<double> x, y;
};

/// Minimal SVG line chart; log axes take log10 of the data.
std::string line_chart_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                           const std::vector<Series>& series, bool log_axes);

}  // namespace bottomup::cli
