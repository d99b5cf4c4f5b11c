#include "bottomup/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "bottomup/bench.hpp"
#include "bottomup/gradsuite.hpp"
#include "bottomup/metrics.hpp"
#include "bottomup/parallel.hpp"
#include "json.hpp"

#ifndef BOTTOMUP_CONFIG_DIR
#define BOTTOMUP_CONFIG_DIR "config"
#endif

namespace bottomup::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- toy runs

toy::SceneConfig scene_for(std::size_t grid) {
  toy::SceneConfig s;
  s.height = grid;
  s.width = grid;
  return s;
}

toy::Dataset train_split(const toy::SceneConfig& scene, std::uint64_t seed, std::size_t frames) {
  return toy::make_dataset(scene, 1000 + seed, frames);
}

toy::Dataset heldout_split(const toy::SceneConfig& scene, std::uint64_t seed, std::size_t frames) {
  auto amb = scene;
  amb.ambiguous_prob = 1.0;
  return toy::make_dataset(amb, 2000 + seed, frames);
}

std::vector<RunResult> run_ablation(const AblationOptions& opts) {
  const auto scene = scene_for(opts.grid);
  scene.validate();
  std::map<std::uint64_t, std::pair<toy::Dataset, toy::Dataset>> data;
  for (auto s : opts.seeds) data[s] = {train_split(scene, s, opts.train_frames), heldout_split(scene, s, opts.val_frames)};

  std::vector<RunResult> runs;
  for (auto v : opts.variants)
    for (auto s : opts.seeds) runs.push_back({v, s, {}, {}, 0.0});

  toy::TrainOptions topts;
  topts.lr = opts.lr;
  topts.model.hidden = opts.hidden;
  parallel_for(runs.size(), [&](std::size_t k) {
    auto& run = runs[k];
    const auto start = std::chrono::steady_clock::now();
    const auto& [train, val] = data.at(run.seed);
    auto trained = toy::train(run.variant, train, opts.epochs, run.seed, topts);
    run.eval = toy::evaluate(toy::model_predictor(trained.model), val);
    run.loss_curve = std::move(trained.loss_curve);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  return runs;
}

namespace {

std::string num(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& xs) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& x : xs) {
    if (!x) continue;
    s += *x;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

}  // namespace

std::string ablation_csv(const std::vector<RunResult>& runs, const std::vector<toy::Variant>& variants) {
  std::ostringstream out;
  out << "variant,seed,depth_mae,dims_mae,toy_ap\n";
  for (const auto& r : runs) {
    out << toy::variant_name(r.variant) << ',' << r.seed << ',' << num(r.eval.depth_mae) << ','
        << num(r.eval.dims_mae) << ',' << num(r.eval.ap) << '\n';
  }
  for (auto v : variants) {
    std::vector<std::optional<double>> d, m, a;
    for (const auto& r : runs) {
      if (r.variant != v) continue;
      d.push_back(r.eval.depth_mae);
      m.push_back(r.eval.dims_mae);
      a.push_back(r.eval.ap);
    }
    out << toy::variant_name(v) << ",mean," << num(mean_of(d)) << ',' << num(mean_of(m)) << ',' << num(mean_of(a))
        << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------- plots

std::string line_chart_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                           const std::vector<Series>& series, bool log_axes) {
  constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  auto tx = [&](double v) { return log_axes ? std::log10(v) : v; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (log_axes && (s.x[i] <= 0 || s.y[i] <= 0)) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, tx(s.y[i]));
      y1 = std::max(y1, tx(s.y[i]));
    }
  }
  if (!(x0 < x1)) x1 = x0 + 1;
  if (!(y0 < y1)) y1 = y0 + 1;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (tx(v) - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return kTop + ph - (tx(v) - y0) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << std::fixed << std::setprecision(2);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
    << "\" stroke=\"black\"/>\n";
  const char* prefix = log_axes ? "log10 " : "";
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\" font-size=\"12\">" << prefix
    << xlabel << "</text>\n";
  o << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
    << kTop + ph / 2 << ")\">" << prefix << ylabel << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = x0 + (x1 - x0) * t / 4, fy = y0 + (y1 - y0) * t / 4;
    o << "<text x=\"" << kLeft + pw * t / 4 << "\" y=\"" << kTop + ph + 16
      << "\" text-anchor=\"middle\" font-size=\"10\">" << std::setprecision(3) << fx << "</text>\n";
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + ph - ph * t / 4 + 3
      << "\" text-anchor=\"end\" font-size=\"10\">" << fy << "</text>\n"
      << std::setprecision(2);
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % std::size(colors)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (log_axes && (s.x[i] <= 0 || s.y[i] <= 0)) continue;
      o << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    o << "\"/>\n";
    o << "<text x=\"" << kW - kRight + 10 << "\" y=\"" << kTop + 16 * (k + 1) << "\" font-size=\"11\" fill=\"" << color
      << "\">" << s.name << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

// ---------------------------------------------------------------- commands

namespace {

// Reads {"<subcommand>": {"<option>": value, ...}, "<option>": value} into
// CLI11 config items. Arrays become repeated inputs.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ParseError(std::string("config file is not valid JSON: ") + e.what(), CLI::ExitCodes::ConfigError);
    }
    if (!doc.is_object()) throw CLI::ParseError("config file must hold a JSON object", CLI::ExitCodes::ConfigError);
    std::vector<CLI::ConfigItem> items;
    collect(doc, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }

  static void collect(const nlohmann::json& obj, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        collect(value, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& e : value) item.inputs.push_back(scalar(e));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path.string() + ": cannot open for writing");
  f << text;
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!part.empty()) out.push_back(part);
  }
  return out;
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::vector<std::string> sizes{"6x5x4", "3x4x2", "1x1x2"};
  double tol = 1e-6;
  int trials = 20;
  std::string out = "out";
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  if (!(a.tol > 0.0)) throw UsageError("--tol must be positive");
  std::vector<GradSize> sizes;
  for (const auto& s : split_list(a.sizes)) sizes.push_back(parse_grad_size(s));
  if (sizes.empty()) throw UsageError("--sizes is empty");
  const auto rep = run_grad_suite(a.seed, sizes, a.trials, a.tol);
  fs::create_directories(a.out);
  write_file(fs::path(a.out) / "gradcheck.json", grad_report_json(rep));
  for (const auto& c : rep.checks) {
    out << (c.passed ? "ok    " : "FAIL  ") << std::left << std::setw(28) << c.op << ' ' << std::setw(8) << c.size
        << ' ' << std::scientific << std::setprecision(3) << c.max_rel_error << '\n';
  }
  out << std::defaultfloat << (rep.passed() ? "passed" : "FAILED") << ": " << rep.checks.size() << " checks, worst "
      << rep.worst() << ", tol " << a.tol << ", " << std::fixed << std::setprecision(1) << rep.seconds << " s\n"
      << std::defaultfloat;
  return rep.passed() ? kExitOk : kExitCheckFailed;
}

struct BenchArgs {
  std::vector<std::string> heights{"32,64,128,256"};
  std::size_t width = 96;
  std::size_t channels = 64;
  int reps = 5;
  std::uint64_t seed = 0;
  std::vector<std::string> kernels{"cca,quadratic"};
  std::string out = "out";
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  std::vector<bench::MapSize> sizes;
  for (const auto& h : split_list(a.heights)) sizes.push_back({std::stoul(h), a.width, a.channels});
  bench::ScalingOptions opts;
  opts.reps = a.reps;
  opts.seed = a.seed;
  opts.kernels.clear();
  for (const auto& k : split_list(a.kernels)) {
    if (k == "cca") opts.kernels.push_back(bench::Kernel::Cca);
    else if (k == "quadratic") opts.kernels.push_back(bench::Kernel::Quadratic);
    else throw UsageError("unknown kernel: " + k);
  }
  const auto rows = bench::run_scaling(sizes, opts);
  fs::create_directories(a.out);
  write_file(fs::path(a.out) / "bench.csv", bench::to_csv(rows));
  std::vector<Series> series;
  for (auto k : opts.kernels) {
    Series s{bench::kernel_name(k), {}, {}};
    for (const auto& r : rows) {
      if (r.kernel != k) continue;
      s.x.push_back(static_cast<double>(r.size.pixels()));
      s.y.push_back(r.median_ns);
    }
    if (sizes.size() >= 3) out << s.name << " slope vs H*W: " << bench::fit_slope(rows, k) << '\n';
    series.push_back(std::move(s));
  }
  write_file(fs::path(a.out) / "bench.svg", line_chart_svg("median time per call", "H*W", "ns", series, true));
  out << bench::to_csv(rows);
  return kExitOk;
}

struct AblateArgs {
  std::vector<std::string> variants{"baseline,coordconv,yolobu,cca_only,rrcs_only,global_attention,up_bottom"};
  std::vector<std::string> seeds{"1,2,3"};
  int epochs = 30;
  std::size_t train_frames = 400;
  std::size_t val_frames = 100;
  double lr = 0.002;
  std::size_t hidden = 32;
  std::size_t grid = 32;
  std::string out = "out";
};

AblationOptions to_options(const AblateArgs& a) {
  AblationOptions o;
  o.variants.clear();
  for (const auto& v : split_list(a.variants)) o.variants.push_back(toy::parse_variant(v));
  o.seeds.clear();
  for (const auto& s : split_list(a.seeds)) o.seeds.push_back(std::stoull(s));
  if (o.variants.empty() || o.seeds.empty()) throw UsageError("need at least one variant and one seed");
  if (a.epochs < 0) throw UsageError("--epochs must be non-negative");
  o.epochs = a.epochs;
  o.train_frames = a.train_frames;
  o.val_frames = a.val_frames;
  o.lr = a.lr;
  o.hidden = a.hidden;
  o.grid = a.grid;
  return o;
}

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  const auto opts = to_options(a);
  const auto runs = run_ablation(opts);
  fs::create_directories(a.out);
  const auto csv = ablation_csv(runs, opts.variants);
  write_file(fs::path(a.out) / "ablate.csv", csv);
  std::vector<Series> curves;
  for (const auto& r : runs) {
    Series s{std::string(toy::variant_name(r.variant)) + " s" + std::to_string(r.seed), {}, r.loss_curve};
    for (std::size_t e = 0; e < r.loss_curve.size(); ++e) s.x.push_back(static_cast<double>(e + 1));
    curves.push_back(std::move(s));
  }
  if (opts.epochs > 0)
    write_file(fs::path(a.out) / "ablate_loss.svg", line_chart_svg("training loss", "epoch", "loss", curves, false));
  out << csv;
  for (const auto& r : runs) {
    out << "# " << toy::variant_name(r.variant) << " seed " << r.seed << ": " << std::fixed << std::setprecision(1)
        << r.seconds << " s\n";
  }
  out << std::defaultfloat;
  return kExitOk;
}

struct TrainArgs {
  std::string variant = "yolobu";
  std::uint64_t seed = 1;
  int epochs = 30;
  std::size_t train_frames = 400;
  double lr = 0.002;
  std::size_t hidden = 32;
  std::size_t grid = 32;
  std::string out = "out";
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const auto variant = toy::parse_variant(a.variant);
  if (a.epochs < 0) throw UsageError("--epochs must be non-negative");
  const auto scene = scene_for(a.grid);
  const auto data = train_split(scene, a.seed, a.train_frames);
  toy::TrainOptions opts;
  opts.lr = a.lr;
  opts.model.hidden = a.hidden;
  const auto res = toy::train(variant, data, a.epochs, a.seed, opts);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  toy::save_dataset(data, dir / "train.jsonl");
  save_params(res.model.params, dir / "params.bin", dir / "params.json");
  std::ostringstream loss;
  loss << "epoch,loss\n" << std::setprecision(17);
  for (std::size_t e = 0; e < res.loss_curve.size(); ++e) loss << e + 1 << ',' << res.loss_curve[e] << '\n';
  write_file(dir / "loss.csv", loss.str());
  out << loss.str();
  return kExitOk;
}

struct EvalArgs {
  std::string gt, pred;
  std::string cls = "Car";
  double iou = 0.7;
  std::string difficulty_config = std::string(BOTTOMUP_CONFIG_DIR) + "/kitti_difficulty.json";
  std::string out = "out";
};

std::vector<metrics::LabelFrame> load_frames(const fs::path& gt, const fs::path& pred) {
  std::vector<metrics::LabelFrame> frames;
  if (fs::is_directory(gt)) {
    if (!fs::is_directory(pred)) throw UsageError("--labels-gt is a directory but --labels-pred is not");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(gt))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      metrics::LabelFrame fr;
      fr.gt = metrics::read_kitti_file(f);
      const auto p = pred / f.filename();
      if (fs::exists(p)) fr.pred = metrics::read_kitti_file(p);
      frames.push_back(std::move(fr));
    }
  } else {
    frames.push_back({metrics::read_kitti_file(gt), metrics::read_kitti_file(pred)});
  }
  return frames;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (!(a.iou > 0.0 && a.iou <= 1.0)) throw UsageError("--iou must lie in (0, 1]");
  const auto frames = load_frames(a.gt, a.pred);
  const auto cuts = metrics::load_difficulties(a.difficulty_config);
  std::vector<metrics::ReportRow> rows;
  for (const auto& cut : cuts) rows.push_back(metrics::evaluate_class(frames, a.cls, cut, a.iou));
  fs::create_directories(a.out);
  const auto json = metrics::report_json(rows);
  write_file(fs::path(a.out) / "eval.json", json);
  out << json;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"bottom-up position-aware detection toolkit"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values; command-line flags take precedence");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  GradcheckArgs ga;
  auto* g = app.add_subcommand("gradcheck", "finite-difference checks of every differentiable op");
  g->add_option("--seed", ga.seed);
  g->add_option("--sizes", ga.sizes, "map sizes HxWxC, comma separated")->delimiter(',');
  g->add_option("--tol", ga.tol, "maximum relative error");
  g->add_option("--trials", ga.trials)->check(CLI::PositiveNumber);
  g->add_option("--out", ga.out, "output directory");

  BenchArgs ba;
  auto* b = app.add_subcommand("bench", "wall-clock scaling of column attention vs full attention");
  b->add_option("--heights", ba.heights)->delimiter(',');
  b->add_option("--width", ba.width)->check(CLI::PositiveNumber);
  b->add_option("--channels", ba.channels)->check(CLI::PositiveNumber);
  b->add_option("--reps", ba.reps)->check(CLI::Range(3, 1000));
  b->add_option("--seed", ba.seed);
  b->add_option("--kernels", ba.kernels, "cca, quadratic")->delimiter(',');
  b->add_option("--out", ba.out);

  AblateArgs aa;
  auto* ab = app.add_subcommand("ablate", "train and score toy variants on ambiguous pairs");
  ab->add_option("--variants", aa.variants)->delimiter(',');
  ab->add_option("--seeds", aa.seeds)->delimiter(',');
  ab->add_option("--epochs", aa.epochs);
  ab->add_option("--train-frames", aa.train_frames)->check(CLI::PositiveNumber);
  ab->add_option("--val-frames", aa.val_frames)->check(CLI::PositiveNumber);
  ab->add_option("--lr", aa.lr)->check(CLI::PositiveNumber);
  ab->add_option("--hidden", aa.hidden)->check(CLI::PositiveNumber);
  ab->add_option("--grid", aa.grid)->check(CLI::Range(8, 512));
  ab->add_option("--out", aa.out);

  TrainArgs ta;
  auto* t = app.add_subcommand("train", "train one toy variant and save its parameters");
  t->add_option("--variant", ta.variant);
  t->add_option("--seed", ta.seed);
  t->add_option("--epochs", ta.epochs);
  t->add_option("--train-frames", ta.train_frames)->check(CLI::PositiveNumber);
  t->add_option("--lr", ta.lr)->check(CLI::PositiveNumber);
  t->add_option("--hidden", ta.hidden)->check(CLI::PositiveNumber);
  t->add_option("--grid", ta.grid)->check(CLI::Range(8, 512));
  t->add_option("--out", ta.out);

  EvalArgs ea;
  auto* e = app.add_subcommand("eval", "AP|R40 of KITTI-format predictions");
  e->add_option("--labels-gt", ea.gt, "label file or directory of per-image files")->required();
  e->add_option("--labels-pred", ea.pred, "label file or directory, scores in field 16")->required();
  e->add_option("--class", ea.cls);
  e->add_option("--iou", ea.iou);
  e->add_option("--difficulty-config", ea.difficulty_config);
  e->add_option("--out", ea.out);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_gradcheck(ga, out);
    if (b->parsed()) return cmd_bench(ba, out);
    if (ab->parsed()) return cmd_ablate(aa, out);
    if (t->parsed()) return cmd_train(ta, out);
    if (e->parsed()) return cmd_eval(ea, out);
  } catch (const toy::TrainingDiverged& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitCheckFailed;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace bottomup::cli
