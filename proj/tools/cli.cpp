#include "cli.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <functional>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <CLI11.hpp>

#include "pbdn/dataset.hpp"
#include "pbdn/error.hpp"
#include "pbdn/ishm.hpp"
#include "pbdn/map.hpp"
#include "pbdn/report.hpp"
#include "pbdn/serialize.hpp"
#include "pbdn/stack.hpp"

namespace pbdn::cli {

namespace {

struct DataFlags {
  std::string path;
  std::string format = "dense";
  std::size_t label_column = 0;
  std::string delimiter = ",";
  std::optional<std::size_t> dim;
};

void add_data_flags(CLI::App* cmd, DataFlags& f, bool required) {
  auto* opt = cmd->add_option("--data", f.path, "Data file");
  if (required) opt->required();
  cmd->add_option("--format", f.format, "dense or sparse")->check(CLI::IsMember({"dense", "sparse"}));
  cmd->add_option("--label-column", f.label_column, "Label column for dense files");
  cmd->add_option("--delimiter", f.delimiter, "Dense field delimiter: ',', 'tab' or 'space'");
  cmd->add_option("--dim", f.dim, "Covariate count for sparse files");
}

char delimiter_char(const std::string& d) {
  if (d == "tab" || d == "\\t") return '\t';
  if (d == "space" || d == " ") return ' ';
  if (d.size() == 1) return d[0];
  throw std::invalid_argument("delimiter must be a single character, 'tab' or 'space'");
}

Dataset load(const DataFlags& f) {
  if (f.format == "sparse") return load_sparse(f.path, f.dim);
  return load_dense(f.path, f.label_column, delimiter_char(f.delimiter));
}

/// Brings raw data into a stack's input space.
Dataset to_model_space(const Dataset& raw, const PbdnStack& stack) {
  if (raw.covariates() != stack.covariates()) {
    throw DimensionError("data has " + std::to_string(raw.covariates()) +
                         " covariates but the model expects " + std::to_string(stack.covariates()));
  }
  if (!stack.standardization) return raw;
  return apply_standardization(raw, *stack.standardization);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void emit_report(const EvalReport& report, const std::string& report_path, std::ostream& out) {
  out << report_table(report);
  if (!report_path.empty()) write_file(report_path, report_to_json(report));
}

std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct TrainFlags {
  DataFlags data;
  std::string inference = "sgd";
  std::string criterion = "aic";
  std::string concat = "full";
  double epsilon = 0.01;
  std::size_t kmax = 20;
  std::size_t max_layers = 10;
  bool force_layers = false;
  std::optional<std::size_t> iters;
  std::optional<std::size_t> batches;
  std::size_t batch_size = 100;
  std::uint64_t seed = 0;
  bool standardize = true;
  std::string out;
  std::string report;
};

int cmd_train(const TrainFlags& f, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  Dataset data = load(f.data);
  if (f.standardize) data = standardize(data);

  StackConfig cfg;
  cfg.engine = parse_engine(f.inference);
  cfg.criterion = parse_criterion(f.criterion);
  cfg.concat = parse_concat_mode(f.concat);
  cfg.epsilon = f.epsilon;
  cfg.max_layers = f.max_layers;
  cfg.force_all_layers = f.force_layers;
  cfg.seed = f.seed;
  cfg.gibbs.k_max = f.kmax;
  cfg.map.k_max = f.kmax;
  cfg.map.minibatch_size = f.batch_size;
  if (f.iters) {
    cfg.gibbs.iterations = *f.iters;
    cfg.gibbs.prune_every = std::min(cfg.gibbs.prune_every, *f.iters);
  }
  if (f.batches) {
    cfg.map.num_batches = *f.batches;
    cfg.map.prune_every = std::min(cfg.map.prune_every, *f.batches);
  }
  IshmHyperparams hp =
      cfg.engine == Engine::gibbs ? IshmHyperparams::gibbs_defaults() : IshmHyperparams::map_defaults();
  hp.k_max = f.kmax;

  GrowResult grown = grow(data, hp, cfg);
  for (const auto& w : grown.warnings) err << "warning: " << w << "\n";
  save_stack(f.out, grown.stack);

  EvalReport report = evaluate(grown.stack, data);
  report.wall_time_s = seconds_since(start);
  out << "criterion trace:";
  for (const auto& c : grown.stack.criterion_trace) out << " " << c.depth << ":" << format_real(c.value);
  out << "\n";
  emit_report(report, f.report, out);
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const DataFlags& df, const std::string& report_path,
             std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const PbdnStack stack = load_stack(model_path);
  const Dataset data = to_model_space(load(df), stack);
  EvalReport report = evaluate(stack, data);
  report.wall_time_s = seconds_since(start);
  emit_report(report, report_path, out);
  return kExitOk;
}

struct BaselineFlags {
  DataFlags data;
  std::string test_path;
  double l2 = 1.0;
  std::optional<std::size_t> batches;
  std::size_t batch_size = 100;
  std::uint64_t seed = 0;
  bool standardize = true;
  std::string report;
};

int cmd_baseline(const BaselineFlags& f, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  Dataset train = load(f.data);
  std::optional<Standardization> params;
  if (f.standardize) {
    train = standardize(train);
    params = train.standardization;
  }
  MapConfig cfg;
  cfg.seed = f.seed;
  cfg.minibatch_size = f.batch_size;
  if (f.batches) cfg.num_batches = *f.batches;
  const FitResult fit = run_logistic_map(train, f.l2, cfg);

  Dataset eval_set = train;
  if (!f.test_path.empty()) {
    DataFlags tf = f.data;
    tf.path = f.test_path;
    eval_set = load(tf);
    if (eval_set.covariates() != train.covariates()) {
      throw DimensionError("test data covariate count differs from training data");
    }
    if (params) eval_set = apply_standardization(eval_set, *params);
  }
  Eigen::VectorXd prob(static_cast<Eigen::Index>(eval_set.size()));
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    prob[static_cast<Eigen::Index>(i)] = prob_one(fit.model, eval_set.row(i).transpose());
  }
  EvalReport report = score_probabilities(prob, eval_set.labels);
  report.complexity = 1.0;
  report.depth = 1;
  report.layer_widths = {train.covariates(), 1};
  report.wall_time_s = seconds_since(start);
  emit_report(report, f.report, out);
  return kExitOk;
}

struct ContourFlags {
  std::string model;
  std::string out;
  std::vector<double> bounds{-1.0, 1.0, -1.0, 1.0};
  std::size_t grid_n = 101;
  double p0 = 0.5;
};

int cmd_contour(const ContourFlags& f, std::ostream& out) {
  const PbdnStack stack = load_stack(f.model);
  if (stack.covariates() != 2) {
    throw DimensionError("contour: model has " + std::to_string(stack.covariates()) +
                         " covariates; only 2 are supported");
  }
  if (f.grid_n < 2) throw std::invalid_argument("contour: grid size must be at least 2");
  if (!(f.p0 > 0.0 && f.p0 < 1.0)) throw std::invalid_argument("contour: p0 must be in (0,1)");
  const std::size_t n = f.grid_n;
  RowMatrix raw(static_cast<Eigen::Index>(n * n), 2);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double u = static_cast<double>(b) / static_cast<double>(n - 1);
      const double v = static_cast<double>(a) / static_cast<double>(n - 1);
      const auto row = static_cast<Eigen::Index>(a * n + b);
      raw(row, 0) = b + 1 == n ? f.bounds[1] : f.bounds[0] + u * (f.bounds[1] - f.bounds[0]);
      raw(row, 1) = a + 1 == n ? f.bounds[3] : f.bounds[2] + v * (f.bounds[3] - f.bounds[2]);
    }
  }
  std::vector<int> zeros(n * n, 0);
  Dataset grid = to_model_space(make_dataset(raw, zeros), stack);
  const std::size_t depth = stack.selected_depth;
  const RowMatrix x = layer_inputs(stack, grid.features, depth).back();
  const IshmPair& pair = stack.pairs[depth - 1];

  std::ostringstream csv;
  csv << "x1,x2,prob_one_pos,prob_one_neg,pair_prob,violated_count_pos,violated_count_neg\n";
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd xi = x.row(i).transpose();
    const double pp = prob_one(pair.model_pos, xi);
    const double pn = prob_one(pair.model_neg, xi);
    csv << format_real(raw(i, 0)) << ',' << format_real(raw(i, 1)) << ',' << format_real(pp) << ','
        << format_real(pn) << ',' << format_real(0.5 * (pp + 1.0 - pn)) << ','
        << polytope_margin(pair.model_pos, xi, f.p0) << ',' << polytope_margin(pair.model_neg, xi, f.p0)
        << '\n';
  }
  if (f.out.empty()) {
    out << csv.str();
  } else {
    write_file(f.out, csv.str());
  }
  return kExitOk;
}

void print_model(const char* name, const IshmModel& m, std::ostream& out) {
  std::vector<double> r;
  for (const auto& h : m.hyperplanes) r.push_back(h.weight);
  std::sort(r.begin(), r.end(), std::greater<>());
  out << "  " << name << ": " << m.size() << " active, r =";
  for (double w : r) out << ' ' << format_real(w);
  out << "\n";
}

int cmd_inspect(const std::string& model_path, const DataFlags& df, std::ostream& out) {
  const PbdnStack stack = load_stack(model_path);
  out << "covariates " << stack.covariates() << ", selected depth " << stack.selected_depth
      << ", concat " << to_string(stack.concat) << "\nlayer widths:";
  for (auto w : stack.layer_widths) out << ' ' << w;
  out << "\ncriterion:";
  for (const auto& c : stack.criterion_trace) out << ' ' << c.depth << ':' << format_real(c.value);
  out << "\n";
  for (const IshmPair& p : stack.pairs) {
    out << "layer " << p.layer_index << " (input " << p.input_dim() << ", width " << p.width() << ")\n";
    print_model("pos", p.model_pos, out);
    print_model("neg", p.model_neg, out);
  }
  if (df.path.empty()) return kExitOk;

  const Dataset data = to_model_space(load(df), stack);
  const IshmPair& first = stack.pairs.front();
  const Dataset flipped = flip_labels(data);
  for (const auto& [name, model, set] :
       {std::tuple{"pos", &first.model_pos, &data}, std::tuple{"neg", &first.model_neg, &flipped}}) {
    const SubtypeResult sr = extract_subtypes(*model, *set);
    out << "subtypes (" << name << "):\n";
    for (const Subtype& s : sr.subtypes) {
      Eigen::VectorXd proto = s.prototype;
      if (stack.standardization) {
        for (Eigen::Index v = 0; v < proto.size(); ++v) {
          const auto c = static_cast<std::size_t>(v);
          proto[v] = proto[v] * stack.standardization->stddev[c] + stack.standardization->mean[c];
        }
      }
      out << "  hyperplane " << s.hyperplane_index << " mass " << format_real(s.mass) << " prototype";
      for (Eigen::Index v = 0; v < proto.size(); ++v) out << ' ' << format_real(proto[v]);
      out << "\n";
    }
    for (auto k : sr.omitted) out << "  hyperplane " << k << " has no mass\n";
  }
  return kExitOk;
}

struct SynthFlags {
  std::string kind = "spirals";
  std::size_t n_per_class = 200;
  double noise = 0.02;
  double turns = 1.0;
  double separation = 4.0;
  double sd = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_synth(const SynthFlags& f, std::ostream& out) {
  RngStream rng(f.seed);
  const Dataset data = f.kind == "spirals" ? make_two_spirals(f.n_per_class, f.noise, f.turns, rng)
                                           : make_gaussian_blobs(f.n_per_class, f.separation, f.sd, rng);
  if (f.out.empty()) {
    out << format_dense(data);
  } else {
    save_dense(f.out, data);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Greedy layer-wise stacked hyperplane classifier"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "OpenMP threads")->check(CLI::PositiveNumber);

  TrainFlags train;
  auto* c_train = app.add_subcommand("train", "Grow a network and write the model file");
  add_data_flags(c_train, train.data, true);
  c_train->add_option("--inference", train.inference, "gibbs or sgd")
      ->check(CLI::IsMember({"gibbs", "sgd"}));
  c_train->add_option("--criterion", train.criterion, "aic or aic-eps")
      ->check(CLI::IsMember({"aic", "aic-eps"}));
  c_train->add_option("--epsilon", train.epsilon, "Threshold for aic-eps")->check(CLI::Range(0.0, 1.0));
  c_train->add_option("--concat", train.concat, "full, hidden-only or cumulative")
      ->check(CLI::IsMember({"full", "hidden-only", "cumulative"}));
  c_train->add_option("--kmax", train.kmax, "Truncation level")->check(CLI::PositiveNumber);
  c_train->add_option("--max-layers", train.max_layers, "Layer limit")->check(CLI::PositiveNumber);
  c_train->add_flag("--force-layers", train.force_layers, "Train all --max-layers pairs");
  c_train->add_option("--iters", train.iters, "Gibbs sweeps per model")->check(CLI::PositiveNumber);
  c_train->add_option("--batches", train.batches, "Minibatches per model")->check(CLI::PositiveNumber);
  c_train->add_option("--batch-size", train.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  c_train->add_option("--seed", train.seed, "Random seed");
  c_train->add_option("--standardize", train.standardize, "Standardize covariates (true/false)");
  c_train->add_option("--out", train.out, "Model file")->required();
  c_train->add_option("--report", train.report, "JSON report file");

  std::string model_path;
  std::string report_path;
  DataFlags eval_data;
  auto* c_eval = app.add_subcommand("eval", "Score a model on a dataset");
  c_eval->add_option("--model", model_path, "Model file")->required();
  add_data_flags(c_eval, eval_data, true);
  c_eval->add_option("--report", report_path, "JSON report file");

  BaselineFlags base;
  auto* c_base = app.add_subcommand("baseline", "L2-regularized logistic regression");
  add_data_flags(c_base, base.data, true);
  c_base->add_option("--test", base.test_path, "Held-out data file scored instead of the training data");
  c_base->add_option("--l2", base.l2, "L2 penalty")->check(CLI::NonNegativeNumber);
  c_base->add_option("--batches", base.batches, "Minibatches")->check(CLI::PositiveNumber);
  c_base->add_option("--batch-size", base.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  c_base->add_option("--seed", base.seed, "Random seed");
  c_base->add_option("--standardize", base.standardize, "Standardize covariates (true/false)");
  c_base->add_option("--report", base.report, "JSON report file");

  ContourFlags contour;
  auto* c_contour = app.add_subcommand("contour", "Probability grid over a 2-D input box");
  c_contour->add_option("--model", contour.model, "Model file")->required();
  c_contour->add_option("--out", contour.out, "Grid file (stdout when omitted)");
  c_contour->add_option("--bounds", contour.bounds, "xmin xmax ymin ymax")->expected(4)->delimiter(',');
  c_contour->add_option("--grid-n", contour.grid_n, "Points per axis")->check(CLI::Range(2, 100000));
  c_contour->add_option("--p0", contour.p0, "Polytope probability level")->check(CLI::Range(0.0, 1.0));

  std::string inspect_model;
  DataFlags inspect_data;
  auto* c_inspect = app.add_subcommand("inspect", "Print layer widths, weights and subtypes");
  c_inspect->add_option("--model", inspect_model, "Model file")->required();
  add_data_flags(c_inspect, inspect_data, false);

  SynthFlags synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic dataset");
  c_synth->add_option("--kind", synth.kind, "spirals or blobs")->check(CLI::IsMember({"spirals", "blobs"}));
  c_synth->add_option("--n-per-class", synth.n_per_class, "Points per class")->check(CLI::PositiveNumber);
  c_synth->add_option("--noise", synth.noise, "Spiral noise sd")->check(CLI::NonNegativeNumber);
  c_synth->add_option("--turns", synth.turns, "Spiral turns")->check(CLI::PositiveNumber);
  c_synth->add_option("--separation", synth.separation, "Blob centre distance");
  c_synth->add_option("--sd", synth.sd, "Blob sd")->check(CLI::PositiveNumber);
  c_synth->add_option("--seed", synth.seed, "Random seed");
  c_synth->add_option("--out", synth.out, "Output file (stdout when omitted)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  omp_set_num_threads(threads);
  try {
    if (*c_train) return cmd_train(train, out, err);
    if (*c_eval) return cmd_eval(model_path, eval_data, report_path, out);
    if (*c_base) return cmd_baseline(base, out);
    if (*c_contour) return cmd_contour(contour, out);
    if (*c_inspect) return cmd_inspect(inspect_model, inspect_data, out);
    if (*c_synth) return cmd_synth(synth, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace pbdn::cli
