// Copyright 2026 The SynergyNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "synergy/cli.hpp"

#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <regex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "synergy/errors.hpp"
#include "synergy/gradcheck_suite.hpp"

namespace synergy {

namespace fs = std::filesystem;

namespace {

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string fixed(const std::optional<double>& v, int digits = 4) { return v ? fixed(*v, digits) : "n/a"; }

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (!(sgd.lr > 0.0)) throw ConfigError("optimizer.lr must be > 0 for training");
  if (sgd.momentum < 0.0) throw ConfigError("optimizer.momentum must be >= 0");
  if (sgd.weight_decay < 0.0) throw ConfigError("optimizer.weight_decay must be >= 0");
  if (batch_size == 0) throw ConfigError("optimizer.batch_size must be positive");
  if (!fs::is_directory(train_data)) throw ConfigError("train_data " + train_data.string() + " is not a directory");
  if (val_data && !fs::is_directory(*val_data)) {
    throw ConfigError("val_data " + val_data->string() + " is not a directory");
  }
}

TrainOptions RunConfig::train_options() const {
  TrainOptions o;
  o.sgd = sgd;
  o.batch_size = batch_size;
  o.epochs = epochs;
  o.augment = augment;
  o.seed = seed + 1;  // distinct stream from the parameter initialization
  return o;
}

RunConfig run_config_from_json(const Json& j, const fs::path& base_dir) {
  require_known_keys(j, {"model", "optimizer", "train_data", "val_data", "seed"}, "run");
  RunConfig c;
  if (j.contains("model")) c.model = model_config_from_json(j["model"]);
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    require_known_keys(o, {"lr", "momentum", "weight_decay", "batch_size", "epochs", "augment"}, "optimizer");
    auto number = [&](const char* key, double& out) {
      if (!o.contains(key)) return;
      if (!o[key].is_number()) throw ConfigError(std::string("optimizer.") + key + ": expected a number");
      out = o[key].get<double>();
    };
    auto count = [&](const char* key, std::size_t& out) {
      if (!o.contains(key)) return;
      if (!o[key].is_number_unsigned()) {
        throw ConfigError(std::string("optimizer.") + key + ": expected a non-negative integer");
      }
      out = o[key].get<std::size_t>();
    };
    number("lr", c.sgd.lr);
    number("momentum", c.sgd.momentum);
    number("weight_decay", c.sgd.weight_decay);
    count("batch_size", c.batch_size);
    count("epochs", c.epochs);
    if (o.contains("augment")) {
      if (!o["augment"].is_boolean()) throw ConfigError("optimizer.augment: expected true or false");
      c.augment = o["augment"].get<bool>();
    }
  }
  for (const char* key : {"train_data", "val_data"}) {
    if (j.contains(key) && !j[key].is_string()) throw ConfigError(std::string(key) + ": expected a path string");
  }
  if (j.contains("train_data")) c.train_data = resolve(base_dir, j["train_data"].get<std::string>());
  if (j.contains("val_data")) c.val_data = resolve(base_dir, j["val_data"].get<std::string>());
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  c.model.seed = c.seed;
  return c;
}

Json to_json(const RunConfig& c) {
  Json j{{"model", to_json(c.model)},
         {"optimizer",
          {{"lr", c.sgd.lr},
           {"momentum", c.sgd.momentum},
           {"weight_decay", c.sgd.weight_decay},
           {"batch_size", c.batch_size},
           {"epochs", c.epochs},
           {"augment", c.augment}}},
         {"train_data", c.train_data.generic_string()},
         {"seed", c.seed}};
  if (c.val_data) j["val_data"] = c.val_data->generic_string();
  return j;
}

RunConfig load_run_config(const fs::path& path, bool require_data) {
  const Json j = read_json_file(path);
  RunConfig c = run_config_from_json(j, path.parent_path());
  if (require_data) {
    if (!j.contains("train_data")) throw ConfigError(path.string() + ": train_data is required");
    c.validate();
  } else {
    c.model.validate();
  }
  return c;
}

Json metrics_report(const MetricSummary& s) {
  Json class_dsc = Json::array(), class_hd = Json::array();
  for (std::size_t c = 0; c < s.num_classes; ++c) {
    class_dsc.push_back(c < s.class_dice.size() ? optional_json(s.class_dice[c]) : Json(nullptr));
    class_hd.push_back(c < s.class_hd95.size() ? optional_json(s.class_hd95[c]) : Json(nullptr));
  }
  Json cases = Json::array();
  for (std::size_t i = 0; i < s.cases.size(); ++i) {
    Json rows = Json::array();
    for (const auto& r : s.cases[i].classes) {
      rows.push_back(Json{{"class", r.class_id},
                          {"present", r.present_in_truth},
                          {"dsc", r.dice.value},
                          {"dsc_vacuous", r.dice.vacuous},
                          {"hd95", optional_json(r.hd95)},
                          {"iou", optional_json(r.confusion.iou)},
                          {"se", optional_json(r.confusion.se)},
                          {"sp", optional_json(r.confusion.sp)},
                          {"acc", optional_json(r.confusion.acc)}});
    }
    cases.push_back(Json{{"case", i}, {"classes", rows}});
  }
  return Json{{"cases", s.cases.size()},
              {"num_classes", s.num_classes},
              {"mean_dsc", optional_json(s.mean_dice)},
              {"mean_hd95", optional_json(s.mean_hd95)},
              {"mean_iou", optional_json(s.mean_iou)},
              {"mean_se", optional_json(s.mean_se)},
              {"mean_sp", optional_json(s.mean_sp)},
              {"mean_acc", optional_json(s.mean_acc)},
              {"class_dsc", class_dsc},
              {"class_hd95", class_hd},
              {"excluded_absent", s.excluded_absent},
              {"hd95_missing", s.hd95_missing},
              {"per_case", cases}};
}

Json epoch_json(const EpochReport& r) {
  return Json{{"epoch", r.epoch},
              {"total", r.total},
              {"seg", r.seg},
              {"quant", r.quant},
              {"codebook_perplexity", r.codebook_perplexity},
              {"val_dsc", optional_json(r.val_dsc)}};
}

namespace {

void check_compatible(const ModelConfig& model, const Dataset& data, const fs::path& where) {
  if (data.spec.num_classes != model.num_classes) {
    throw ConfigError(where.string() + ": dataset has " + std::to_string(data.spec.num_classes) +
                      " classes, model expects " + std::to_string(model.num_classes));
  }
  if (data.spec.image_size % model.downsample_factor() != 0) {
    throw ConfigError(where.string() + ": image size " + std::to_string(data.spec.image_size) +
                      " is not divisible by " + std::to_string(model.downsample_factor()));
  }
  if (model.in_channels != 1) throw ConfigError("synthetic datasets are single-channel; set in_channels to 1");
}

}  // namespace

std::vector<EpochReport> run_training(const RunConfig& config, const fs::path& out_dir, std::ostream& out,
                                      std::ostream& err) {
  config.validate();
  const Dataset train = load_dataset(config.train_data);
  check_compatible(config.model, train, config.train_data);
  Dataset val;
  if (config.val_data) {
    val = load_dataset(*config.val_data);
    check_compatible(config.model, val, *config.val_data);
  }
  SegModel model = SegModel::init(config.model);
  fs::create_directories(out_dir);
  write_json_file(out_dir / "config.json", to_json(config));
  std::ofstream log(out_dir / "epochs.jsonl", std::ios::binary | std::ios::trunc);
  const TrainOptions options = config.train_options();
  err << "training " << count_parameters(model) << " parameters on " << train.samples.size() << " images for "
      << options.epochs << " epochs\n";

  if (options.epochs == 0) {
    std::vector<std::vector<double>> velocity;
    for (const auto& p : model.parameters()) velocity.emplace_back(p.numel(), 0.0);
    save_checkpoint(out_dir / "checkpoint",
                    Checkpoint{model, velocity, options.sgd, 0, 0, CounterRng(options.seed).state()});
  }
  auto history = fit(model, train.samples, val.samples, options, [&](const EpochReport& r, const Checkpoint& ck) {
    save_checkpoint(out_dir / "checkpoint", ck);
    const std::string line = epoch_json(r).dump();
    out << line << '\n' << std::flush;
    log << line << '\n' << std::flush;
    err << "epoch " << r.epoch << ": total " << fixed(r.total) << " (seg " << fixed(r.seg) << ", quant "
        << fixed(r.quant) << "), perplexity " << fixed(r.codebook_perplexity, 2) << ", val DSC "
        << fixed(r.val_dsc) << '\n';
  });
  return history;
}

Json run_evaluation(const fs::path& checkpoint, const fs::path& data_dir, const fs::path& report_path,
                    std::ostream& out, std::ostream& err) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Dataset data = load_dataset(data_dir);
  check_compatible(ck.model.config, data, data_dir);
  const MetricSummary summary = evaluate(ck.model, data.samples, 8);
  Json report = metrics_report(summary);
  report["step"] = ck.step;
  if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
  write_json_file(report_path, report);
  out << Json{{"command", "eval"},
              {"cases", summary.cases.size()},
              {"mean_dsc", report["mean_dsc"]},
              {"mean_hd95", report["mean_hd95"]},
              {"mean_iou", report["mean_iou"]}}
             .dump()
      << '\n';
  err << "evaluated " << summary.cases.size() << " cases: mean DSC " << fixed(summary.mean_dice) << ", mean HD95 "
      << fixed(summary.mean_hd95, 2) << ", mean IoU " << fixed(summary.mean_iou) << '\n';
  return report;
}

namespace {

std::size_t parse_count(const std::string& axis, const std::string& v) {
  std::size_t used = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || v[0] == '-') {
    throw ConfigError("ablate " + axis + ": \"" + v + "\" is not a positive integer");
  }
  return static_cast<std::size_t>(n);
}

std::string axes_list() {
  std::string s;
  for (const auto& a : kAblationAxes) s += (s.empty() ? "" : ", ") + a;
  return s;
}

}  // namespace

std::vector<AblationPoint> ablation_points(const RunConfig& base, const std::string& axis,
                                           const std::vector<std::string>& given) {
  if (std::find(kAblationAxes.begin(), kAblationAxes.end(), axis) == kAblationAxes.end()) {
    throw ConfigError("unknown ablation axis \"" + axis + "\" (valid axes: " + axes_list() + ")");
  }
  std::vector<std::string> values = given;
  if (values.empty()) {
    if (axis != "fusion") throw ConfigError("ablate " + axis + ": --values is required");
    values = {"disconx", "fusion"};
  }
  std::vector<AblationPoint> points;
  for (const auto& v : values) {
    RunConfig c = base;
    if (axis == "K") {
      c.model.codebook_size = parse_count(axis, v);
    } else if (axis == "dim") {
      c.model.dim = parse_count(axis, v);
    } else if (axis == "heads") {
      static const std::regex pattern("^([0-9]+)s([0-9]+)h$");
      std::smatch m;
      if (!std::regex_match(v, m, pattern)) {
        throw ConfigError("ablate heads: \"" + v + "\" should look like 8s2h (DisConX heads, refinement heads)");
      }
      c.model.cross_heads = parse_count(axis, m[1].str());
      c.model.refine_heads = parse_count(axis, m[2].str());
    } else if (axis == "fusion") {
      if (v == "disconx") {
        c.model.use_disconx = true;
      } else if (v == "fusion") {
        c.model.use_disconx = false;
      } else {
        throw ConfigError("ablate fusion: \"" + v + "\" should be disconx or fusion");
      }
    } else {  // depth
      const std::size_t depth = parse_count(axis, v);
      if (depth == 0) throw ConfigError("ablate depth: depth must be >= 1");
      const std::size_t first = base.model.encoder_channels.front();
      c.model.encoder_channels.clear();
      for (std::size_t i = 0; i < depth; ++i) c.model.encoder_channels.push_back(first << i);
    }
    c.model.validate();
    points.push_back({v, c});
  }
  return points;
}

Json run_ablation(const RunConfig& base, const std::string& axis, const std::vector<std::string>& values,
                  const fs::path& out_dir, bool parallel, std::ostream& out, std::ostream& err) {
  const auto points = ablation_points(base, axis, values);
  for (const auto& p : points) p.config.validate();

  struct Result {
    Json row;
    std::string log;
    std::exception_ptr error;
  };
  std::vector<Result> results(points.size());
  auto run_point = [&](std::size_t i) {
    const auto& p = points[i];
    std::ostringstream sink, log;
    try {
      const fs::path dir = out_dir / (axis + "-" + p.value);
      const auto history = run_training(p.config, dir, sink, log);
      const fs::path eval_data = p.config.val_data ? *p.config.val_data : p.config.train_data;
      const Json report = run_evaluation(dir / "checkpoint", eval_data, dir / "report.json", sink, log);
      Json row{{"axis", axis},
               {"value", p.value},
               {"parameters", expected_parameter_count(p.config.model)},
               {"mean_dsc", report["mean_dsc"]},
               {"mean_hd95", report["mean_hd95"]},
               {"mean_iou", report["mean_iou"]},
               {"mean_se", report["mean_se"]},
               {"mean_sp", report["mean_sp"]},
               {"mean_acc", report["mean_acc"]},
               {"class_dsc", report["class_dsc"]}};
      row["final_total"] = history.empty() ? Json(nullptr) : Json(history.back().total);
      row["codebook_perplexity"] = history.empty() ? Json(nullptr) : Json(history.back().codebook_perplexity);
      results[i].row = row;
    } catch (...) {
      results[i].error = std::current_exception();
    }
    results[i].log = log.str();
  };

  if (parallel && points.size() > 1) {
    std::vector<std::thread> workers;
    for (std::size_t i = 0; i < points.size(); ++i) workers.emplace_back(run_point, i);
    for (auto& w : workers) w.join();
  } else {
    for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
  }

  Json rows = Json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    err << "[" << axis << "=" << points[i].value << "]\n" << results[i].log;
    if (results[i].error) std::rethrow_exception(results[i].error);
    out << results[i].row.dump() << '\n';
    rows.push_back(results[i].row);
  }
  Json report{{"axis", axis}, {"seed", base.seed}, {"rows", rows}};
  if (axis == "fusion" && rows.size() == 2 && rows[0]["mean_dsc"].is_number() && rows[1]["mean_dsc"].is_number()) {
    std::size_t full = rows[0]["value"] == "disconx" ? 0 : 1;
    const double a = rows[full]["mean_dsc"].get<double>();
    const double b = rows[1 - full]["mean_dsc"].get<double>();
    report["comparison"] = Json{{"claim", "cross-attention fusion reaches a mean DSC at least as high as plain addition"},
                                {"disconx_mean_dsc", a},
                                {"fusion_mean_dsc", b},
                                {"holds", a >= b}};
  }
  fs::create_directories(out_dir);
  write_json_file(out_dir / "ablation.json", report);

  err << "\n" << std::left << std::setw(12) << axis << std::setw(12) << "mean DSC" << std::setw(12) << "mean HD95"
      << "mean IoU\n";
  for (const auto& r : rows) {
    auto num = [](const Json& v, int d) { return v.is_number() ? fixed(v.get<double>(), d) : std::string("n/a"); };
    err << std::setw(12) << r["value"].get<std::string>() << std::setw(12) << num(r["mean_dsc"], 4) << std::setw(12)
        << num(r["mean_hd95"], 2) << num(r["mean_iou"], 4) << '\n';
  }
  return report;
}

namespace {

int command_synth(const fs::path& spec_path, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  const SynthSpec spec = synth_spec_from_json(read_json_file(spec_path));
  const Dataset data = generate(spec);
  save_dataset(out_dir, data);
  const auto counts = class_pixel_counts(data);
  std::size_t total = 0;
  for (auto c : counts) total += c;
  Json fractions = Json::array();
  for (auto c : counts) fractions.push_back(total ? static_cast<double>(c) / static_cast<double>(total) : 0.0);
  out << Json{{"command", "synth"}, {"count", data.samples.size()}, {"class_pixels", counts},
              {"class_fraction", fractions}}
             .dump()
      << '\n';
  err << "wrote " << data.samples.size() << " samples to " << out_dir.string() << '\n';
  for (std::size_t c = 0; c < counts.size(); ++c) {
    err << "  class " << c << ": " << counts[c] << " pixels (" << fixed(fractions[c].get<double>() * 100.0, 2)
        << "%)\n";
  }
  return kExitOk;
}

int command_gradcheck(const std::optional<fs::path>& config_path, double eps, double tolerance,
                      std::size_t instances, std::ostream& out, std::ostream& err) {
  if (!(eps > 0.0)) throw ConfigError("--eps must be positive");
  if (!(tolerance > 0.0)) throw ConfigError("--tolerance must be positive");
  GradcheckOptions options;
  options.eps = eps;
  options.instances = instances;
  if (config_path) {
    const RunConfig run = load_run_config(*config_path, false);
    options.bottleneck = run.model.bottleneck();
    options.seed = run.seed;
  }
  const auto entries = run_gradcheck_suite(options);
  bool ok = true;
  for (const auto& e : entries) {
    const double limit = e.composed ? 10.0 * tolerance : tolerance;
    const bool pass = e.max_rel_error < limit;
    ok = ok && pass;
    out << Json{{"op", e.name},         {"composed", e.composed},     {"max_rel_error", e.max_rel_error},
                {"tolerance", limit},   {"pass", pass},               {"instances", e.instances},
                {"coordinates", e.coordinates}}
               .dump()
        << '\n';
    std::ostringstream err_str;
    err_str << std::scientific << std::setprecision(2) << e.max_rel_error;
    err << std::left << std::setw(28) << e.name << err_str.str() << (pass ? "  ok" : "  FAIL") << '\n';
  }
  err << (ok ? "all gradient checks passed\n" : "gradient check failed\n");
  return ok ? kExitOk : kExitTolerance;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"SynergyNet toy-scale segmentation toolkit", "synergy"};
  app.require_subcommand(1);

  fs::path spec_path, out_dir, config_path, checkpoint, data_dir, report_path;
  std::optional<fs::path> gradcheck_config;
  double eps = 1e-4, tolerance = 1e-5;
  std::size_t instances = 16;
  std::string axis;
  std::vector<std::string> values;
  bool parallel = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--spec", spec_path, "Dataset spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out_dir, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", config_path, "Run config JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--report", report_path, "Report JSON to write")->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every backward rule");
  grad->add_option("--config", gradcheck_config, "Run config JSON (bottleneck shape and seed)")
      ->check(CLI::ExistingFile);
  grad->add_option("--eps", eps, "Central-difference step")->capture_default_str();
  grad->add_option("--tolerance", tolerance, "Max relative error per op (x10 for the composed bottleneck)")
      ->capture_default_str();
  grad->add_option("--instances", instances, "Random instances per op")->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "Sweep one configuration axis");
  ablate->add_option("--axis", axis, "Axis to sweep")->required()->check(CLI::IsMember(kAblationAxes));
  ablate->add_option("--values", values, "Comma-separated values")->delimiter(',');
  ablate->add_option("--config", config_path, "Base run config JSON")->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", out_dir, "Output directory")->required();
  ablate->add_flag("--parallel", parallel, "Run sweep points concurrently");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*synth) return command_synth(spec_path, out_dir, out, err);
    if (*train) {
      run_training(load_run_config(config_path), out_dir, out, err);
      return kExitOk;
    }
    if (*eval) {
      run_evaluation(checkpoint, data_dir, report_path, out, err);
      return kExitOk;
    }
    if (*grad) return command_gradcheck(gradcheck_config, eps, tolerance, instances, out, err);
    if (*ablate) {
      run_ablation(load_run_config(config_path), axis, values, out_dir, parallel, out, err);
      return kExitOk;
    }
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace synergy
