#include "bottomup/gradsuite.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <functional>
#include <map>
#include <random>

#include "bottomup/cca.hpp"
#include "bottomup/gradcheck.hpp"
#include "bottomup/ops.hpp"
#include "bottomup/posenc.hpp"
#include "bottomup/rrcs.hpp"
#include "json.hpp"

namespace bottomup {

GradSize parse_grad_size(std::string_view text) {
  std::size_t dims[3] = {0, 0, 0};
  std::size_t k = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (k < 3) {
    auto [next, ec] = std::from_chars(p, end, dims[k]);
    if (ec != std::errc()) break;
    ++k;
    p = next;
    if (k < 3) {
      if (p == end || *p != 'x') break;
      ++p;
    }
  }
  if (k != 3 || p != end) throw ContractError("size must look like HxWxC, got '" + std::string(text) + "'");
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0) throw ContractError("sizes must be positive: " + std::string(text));
  if (dims[2] % 2 != 0) throw ContractError("channel count must be even: " + std::string(text));
  return {dims[0], dims[1], dims[2]};
}

std::string to_string(const GradSize& s) {
  return std::to_string(s.h) + "x" + std::to_string(s.w) + "x" + std::to_string(s.c);
}

bool GradSuiteReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

double GradSuiteReport::worst() const {
  double w = 0.0;
  for (const auto& c : checks) w = std::max(w, c.max_rel_error);
  return w;
}

namespace {

using Rng = std::mt19937_64;

struct Case {
  ScalarFn f;
  std::vector<Tensor> inputs;
};

using CaseFactory = std::function<Case(Rng&, const GradSize&)>;

Tensor normal(Shape shape, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = n(rng);
  return t;
}

// Values at least `gap` away from zero, for inputs that sit on a kink.
Tensor away_from_zero(Shape shape, Rng& rng, double gap) {
  std::uniform_real_distribution<double> u(gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = sign(rng) ? u(rng) : -u(rng);
  return t;
}

// Random linear functional so every output element reaches the scalar.
Var contract(const Var& y, Rng& rng) {
  Tensor r = normal(y.shape(), rng);
  return sum(mul(y, y.graph().constant(std::move(r))));
}

template <class Build>
Case unary(Rng& rng, Tensor x, Build build) {
  ScalarFn f = [build, seed = rng()](Graph&, std::span<const Var> in) {
    Rng local(seed);
    return contract(build(in[0]), local);
  };
  return {f, {std::move(x)}};
}

template <class Build>
Case nary(Rng& rng, std::vector<Tensor> xs, Build build) {
  ScalarFn f = [build, seed = rng()](Graph&, std::span<const Var> in) {
    Rng local(seed);
    return contract(build(in), local);
  };
  return {f, std::move(xs)};
}

Shape map_shape(const GradSize& s) { return {s.h, s.w, s.c}; }

BlockConfig config_for(const std::string& name) {
  if (name == "block_up_bottom") return {AttentionMode::Column, true, ScanDirection::UpBottom};
  if (name == "block_global_attention") return {AttentionMode::Global, true, ScanDirection::BottomUp};
  if (name == "block_scan_only") return {AttentionMode::None, true, ScanDirection::BottomUp};
  if (name == "block_attention_only") return {AttentionMode::Column, false, ScanDirection::BottomUp};
  return {};
}

Case block_case(Rng& rng, const GradSize& s, const BlockConfig& cfg) {
  ParamSet ps;
  init_block_params(ps, cfg, s.w, s.c, rng, 1.0);
  std::vector<std::string> names;
  std::vector<Tensor> inputs{normal(map_shape(s), rng)};
  for (auto& e : ps.entries()) {
    names.push_back(e.name);
    inputs.push_back(normal(e.value.shape(), rng, 0.5));
  }
  const auto pe = PositionalEncoding::build(s.h, s.c);
  ScalarFn f = [names, pe, cfg, seed = rng()](Graph&, std::span<const Var> in) {
    BoundParams p(names, std::vector<Var>(in.begin() + 1, in.end()));
    Rng local(seed);
    return contract(yolobu_block(in[0], p, pe, cfg), local);
  };
  return {f, std::move(inputs)};
}

const std::vector<std::pair<std::string, CaseFactory>>& cases() {
  static const std::vector<std::pair<std::string, CaseFactory>> all = [] {
    std::vector<std::pair<std::string, CaseFactory>> v;
    v.emplace_back("add", [](Rng& r, const GradSize& s) {
      return nary(r, {normal(map_shape(s), r), normal(map_shape(s), r)}, [](auto in) { return add(in[0], in[1]); });
    });
    v.emplace_back("sub", [](Rng& r, const GradSize& s) {
      return nary(r, {normal(map_shape(s), r), normal(map_shape(s), r)}, [](auto in) { return sub(in[0], in[1]); });
    });
    v.emplace_back("mul", [](Rng& r, const GradSize& s) {
      return nary(r, {normal(map_shape(s), r), normal(map_shape(s), r)}, [](auto in) { return mul(in[0], in[1]); });
    });
    v.emplace_back("scale", [](Rng& r, const GradSize& s) {
      return unary(r, normal(map_shape(s), r), [](const Var& x) { return scale(x, -0.7); });
    });
    v.emplace_back("add_bias", [](Rng& r, const GradSize& s) {
      return nary(r, {normal({s.h * s.w, s.c}, r), normal({s.c}, r)}, [](auto in) { return add_bias(in[0], in[1]); });
    });
    v.emplace_back("matmul", [](Rng& r, const GradSize& s) {
      return nary(r, {normal({s.h * s.w, s.c}, r), normal({s.c, s.c + 1}, r)},
                  [](auto in) { return matmul(in[0], in[1]); });
    });
    v.emplace_back("relu", [](Rng& r, const GradSize& s) {
      return unary(r, away_from_zero(map_shape(s), r, 0.01), [](const Var& x) { return relu(x); });
    });
    v.emplace_back("sigmoid", [](Rng& r, const GradSize& s) {
      return unary(r, normal(map_shape(s), r, 2.0), [](const Var& x) { return sigmoid(x); });
    });
    v.emplace_back("sum", [](Rng& r, const GradSize& s) {
      return unary(r, normal(map_shape(s), r), [](const Var& x) { return sum(x); });
    });
    v.emplace_back("softmax", [](Rng& r, const GradSize& s) {
      return unary(r, normal({s.h * s.w}, r, 2.0), [](const Var& x) { return softmax(x); });
    });
    v.emplace_back("softmax_columns", [](Rng& r, const GradSize& s) {
      return unary(r, normal({s.h, s.w}, r, 2.0), [](const Var& x) { return softmax_columns(x); });
    });
    v.emplace_back("reshape", [](Rng& r, const GradSize& s) {
      return unary(r, normal(map_shape(s), r), [s](const Var& x) { return reshape(x, {s.h * s.w, s.c}); });
    });
    v.emplace_back("concat_channels", [](Rng& r, const GradSize& s) {
      return nary(r, {normal(map_shape(s), r), normal({s.h, s.w, 2}, r)},
                  [](auto in) { return concat_channels(in[0], in[1]); });
    });
    v.emplace_back("gather_rows", [](Rng& r, const GradSize& s) {
      std::uniform_int_distribution<std::size_t> pick(0, s.h * s.w - 1);
      std::vector<std::size_t> rows;
      for (std::size_t k = 0; k < s.h * s.w + 2; ++k) rows.push_back(pick(r));
      return unary(r, normal({s.h * s.w, s.c}, r), [rows](const Var& x) { return gather_rows(x, rows); });
    });
    v.emplace_back("pointwise_linear", [](Rng& r, const GradSize& s) {
      return nary(r, {normal(map_shape(s), r), normal({s.c, s.c + 1}, r), normal({s.c + 1}, r)},
                  [](auto in) { return pointwise_linear(in[0], in[1], in[2]); });
    });
    v.emplace_back("focal_loss", [](Rng& r, const GradSize& s) {
      Tensor t({s.h, s.w, 2});
      std::bernoulli_distribution hit(0.2);
      for (auto& x : t.data()) x = hit(r) ? 1.0 : 0.0;
      ScalarFn f = [t](Graph&, std::span<const Var> in) { return focal_loss(in[0], t); };
      return Case{f, {normal({s.h, s.w, 2}, r, 2.0)}};
    });
    v.emplace_back("l1_loss", [](Rng& r, const GradSize& s) {
      Tensor target = normal(map_shape(s), r);
      Tensor x = away_from_zero(map_shape(s), r, 0.01);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += target[i];
      ScalarFn f = [target](Graph&, std::span<const Var> in) { return l1_loss(in[0], target); };
      return Case{f, {std::move(x)}};
    });
    v.emplace_back("add_encoding", [](Rng& r, const GradSize& s) {
      const auto pe = PositionalEncoding::build(s.h, s.c);
      return unary(r, normal(map_shape(s), r), [pe](const Var& x) { return add_encoding(x, pe); });
    });
    v.emplace_back("encode_keys", [](Rng& r, const GradSize& s) {
      const auto pe = PositionalEncoding::build(s.h, s.c);
      return nary(r,
                  {normal(map_shape(s), r), normal({s.c, s.c}, r), normal({s.c}, r), normal({s.c, s.c}, r),
                   normal({s.c}, r)},
                  [pe](auto in) { return cca::encode_keys(in[0], pe, in[1], in[2], in[3], in[4]); });
    });
    v.emplace_back("column_attention", [](Rng& r, const GradSize& s) {
      return nary(r, {normal(map_shape(s), r), normal({s.w, s.c}, r)},
                  [](auto in) { return cca::column_attention(in[0], in[1]); });
    });
    v.emplace_back("apply_weights", [](Rng& r, const GradSize& s) {
      return nary(r, {normal(map_shape(s), r), normal({s.h, s.w}, r)},
                  [](auto in) { return cca::apply_weights(in[0], in[1]); });
    });
    v.emplace_back("global_attention", [](Rng& r, const GradSize& s) {
      return nary(r, {normal(map_shape(s), r), normal({s.c}, r)},
                  [](auto in) { return cca::global_attention(in[0], in[1]); });
    });
    for (auto dir : {ScanDirection::BottomUp, ScanDirection::UpBottom}) {
      const std::string suffix = dir == ScanDirection::BottomUp ? "_bottom_up" : "_up_bottom";
      v.emplace_back("vertical_cumsum" + suffix, [dir](Rng& r, const GradSize& s) {
        return unary(r, normal(map_shape(s), r), [dir](const Var& x) { return vertical_cumsum(x, dir); });
      });
      v.emplace_back("normalize_rows" + suffix, [dir](Rng& r, const GradSize& s) {
        return unary(r, normal(map_shape(s), r), [dir](const Var& x) { return normalize_rows(x, dir); });
      });
    }
    v.emplace_back("fuse", [](Rng& r, const GradSize& s) {
      return nary(r, {normal(map_shape(s), r), normal(map_shape(s), r), normal({s.c, s.c}, r), normal({s.c}, r)},
                  [](auto in) { return fuse(in[0], in[1], in[2], in[3]); });
    });
    for (const char* name :
         {"yolobu_block", "block_up_bottom", "block_global_attention", "block_scan_only", "block_attention_only"}) {
      v.emplace_back(name, [cfg = config_for(name)](Rng& r, const GradSize& s) { return block_case(r, s, cfg); });
    }
    return v;
  }();
  return all;
}

}  // namespace

std::vector<std::string> grad_suite_ops() {
  std::vector<std::string> names;
  for (const auto& [name, make] : cases()) names.push_back(name);
  return names;
}

GradSuiteReport run_grad_suite(std::uint64_t seed, std::span<const GradSize> sizes, int trials, double tol,
                               double step) {
  if (!(tol > 0.0)) throw ContractError("tolerance must be positive");
  if (trials < 1) throw ContractError("need at least one trial");
  const auto start = std::chrono::steady_clock::now();
  GradSuiteReport rep;
  rep.tol = tol;
  rep.seed = seed;
  for (const auto& size : sizes) {
    for (std::size_t k = 0; k < cases().size(); ++k) {
      const auto& [name, make] = cases()[k];
      // Each (size, case) pair has its own stream so adding cases does not
      // shift the draws of the others.
      std::seed_seq seq{seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(size.h),
                        static_cast<std::uint64_t>(size.w), static_cast<std::uint64_t>(size.c)};
      Rng rng(seq);
      OpCheck check{name, to_string(size), trials, 0.0, true};
      for (int t = 0; t < trials; ++t) {
        const Case c = make(rng, size);
        const auto res = finite_diff_check(c.f, c.inputs, step);
        check.max_rel_error = std::max(check.max_rel_error, res.max_rel_error);
      }
      check.passed = check.max_rel_error < tol;
      rep.checks.push_back(check);
    }
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

std::string grad_report_json(const GradSuiteReport& report) {
  nlohmann::json doc;
  doc["tol"] = report.tol;
  doc["seed"] = report.seed;
  doc["passed"] = report.passed();
  doc["max_rel_error"] = report.worst();
  auto arr = nlohmann::json::array();
  for (const auto& c : report.checks) {
    arr.push_back({{"op", c.op}, {"size", c.size}, {"trials", c.trials}, {"max_rel_error", c.max_rel_error},
                   {"passed", c.passed}});
  }
  doc["checks"] = std::move(arr);
  return doc.dump(2) + "\n";
}

}  // namespace bottomup
