#include "bottomup/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "bottomup/cca.hpp"
#include "bottomup/ops.hpp"
#include "bottomup/tensor.hpp"

namespace bottomup::bench {

const char* kernel_name(Kernel k) { return k == Kernel::Cca ? "cca" : "quadratic"; }

namespace {

Tensor random_map(const MapSize& s, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t({s.h, s.w, s.c});
  for (auto& v : t.data()) v = n(rng);
  return t;
}

double sink = 0.0;

struct Timed {
  double ns_per_call;
  std::uint64_t macs_per_call;
};

template <class F>
Timed time_rep(F&& call, double min_seconds) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::uint64_t calls = 0;
  double elapsed = 0.0;
  mac_counter::reset();
  do {
    call();
    ++calls;
    elapsed = std::chrono::duration<double>(clock::now() - start).count();
  } while (elapsed < min_seconds);
  return {elapsed * 1e9 / static_cast<double>(calls), mac_counter::get() / calls};
}

}  // namespace

std::vector<Row> run_scaling(std::span<const MapSize> sizes, const ScalingOptions& opts) {
  if (sizes.empty()) throw ContractError("run_scaling: no sizes");
  if (opts.reps < 3) throw ContractError("run_scaling: need at least 3 reps");
  std::vector<Row> rows;
  for (Kernel kernel : opts.kernels) {
    for (const auto& size : sizes) {
      std::mt19937_64 rng(opts.seed);
      const Tensor features = random_map(size, rng, 1.0);
      const Tensor keys = random_map(size, rng, 1.0 / std::sqrt(static_cast<double>(size.c)));
      Tensor queries({size.w, size.c});
      std::normal_distribution<double> n(0.0, 1.0);
      for (auto& v : queries.data()) v = n(rng);

      // Outputs are reused across calls so the timing excludes first-touch
      // page faults of fresh allocations.
      Tensor weights, weighted;
      auto call = [&] {
        if (kernel == Kernel::Cca) {
          cca::column_attention(keys, queries, weights);
          cca::apply_weights(features, weights, weighted);
          sink += weighted[0];
        } else {
          sink += cca::full_self_attention(keys, features)[0];
        }
      };
      time_rep(call, 0.0);  // warm-up
      std::vector<double> samples;
      std::uint64_t macs = 0;
      for (int r = 0; r < opts.reps; ++r) {
        const auto t = time_rep(call, opts.min_rep_seconds);
        samples.push_back(t.ns_per_call);
        macs = t.macs_per_call;
      }
      std::sort(samples.begin(), samples.end());
      const auto mid = samples.size() / 2;
      const double median = samples.size() % 2 ? samples[mid] : (samples[mid - 1] + samples[mid]) / 2;
      rows.push_back({kernel, size, macs, median, opts.reps});
    }
  }
  return rows;
}

double fit_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("fit_slope: x and y differ in length");
  if (x.size() < 3) throw ContractError("fit_slope: need at least 3 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ContractError("fit_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw ContractError("fit_slope: all x values are equal");
  return sxy / sxx;
}

double fit_slope(std::span<const Row> rows, Kernel kernel) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    if (r.kernel != kernel) continue;
    x.push_back(static_cast<double>(r.size.pixels()));
    y.push_back(r.median_ns);
  }
  return fit_slope(x, y);
}

std::string to_csv(std::span<const Row> rows) {
  std::ostringstream out;
  out << "kernel,h,w,c,op_count,median_ns,reps\n";
  for (const auto& r : rows) {
    out << kernel_name(r.kernel) << ',' << r.size.h << ',' << r.size.w << ',' << r.size.c << ',' << r.op_count << ','
        << static_cast<std::uint64_t>(std::llround(r.median_ns)) << ',' << r.reps << '\n';
  }
  return out.str();
}

}  // namespace bottomup::bench
