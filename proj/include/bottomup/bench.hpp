#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bottomup::bench {

struct MapSize {
  std::size_t h = 0, w = 0, c = 0;
  std::size_t pixels() const { return h * w; }
};

enum class Kernel { Cca, Quadratic };
const char* kernel_name(Kernel k);

struct Row {
  Kernel kernel = Kernel::Cca;
  MapSize size;
  std::uint64_t op_count = 0;  // MACs counted at runtime for one kernel call
  double median_ns = 0.0;      // per kernel call
  int reps = 0;
};

struct ScalingOptions {
  int reps = 5;
  std::uint64_t seed = 0;
  std::vector<Kernel> kernels{Kernel::Cca, Kernel::Quadratic};
  /// Each timed rep repeats the kernel until at least this long has passed.
  double min_rep_seconds = 0.02;
};

/// Times each kernel at each size: one warm-up rep is discarded and the
/// median of `reps` reps is reported. Throws ContractError on an empty size
/// list or reps < 3.
std::vector<Row> run_scaling(std::span<const MapSize> sizes, const ScalingOptions& opts);

/// Least-squares slope of log(y) against log(x). Needs at least 3 points and
/// positive values.
double fit_slope(std::span<const double> x, std::span<const double> y);
/// Slope of median time against H*W for the rows of one kernel.
double fit_slope(std::span<const Row> rows, Kernel kernel);

/// Header: kernel,h,w,c,op_count,median_ns,reps
std::string to_csv(std::span<const Row> rows);

}  // namespace bottomup::bench
