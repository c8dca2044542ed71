// Copyright 2026 The zorefine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "config_io.hpp"
#include "manifest.hpp"
#include "zorefine/checkpoint.hpp"
#include "zorefine/csv.hpp"
#include "zorefine/error.hpp"
#include "zorefine/parallel.hpp"
#include "zorefine/pipeline.hpp"

namespace zorefine::cli {
namespace fs = std::filesystem;

namespace {

struct Options {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> out;
  std::vector<std::string> sets;
  std::optional<std::string> checkpoint;
  std::optional<std::string> selection;
  std::string only;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonFiniteLoss:
    case ErrorCode::kDomainExit:
      return kExitNumeric;
    default:
      return kExitConfig;
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

Json nan_to_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

void write_trace(const fs::path& path, const std::vector<double>& trace, std::size_t total,
                 double lr, Scheduler scheduler, double warmup_ratio) {
  auto out = open_out(path);
  write_csv_row(out, {"step", "lr", "loss"});
  for (std::size_t t = 0; t < trace.size(); ++t) {
    write_csv_row(out, {std::to_string(t), format_double(lr_at(t, total, lr, scheduler, warmup_ratio)),
                        format_double(trace[t])});
  }
}

Json layers_json(const LayerMask& mask, const LayeredParams& shape) {
  Json layers = Json::array();
  Json names = Json::array();
  for (std::size_t l : mask.selected()) {
    layers.push_back(l);
    names.push_back(shape.id(l).name);
  }
  return Json{{"layers", layers}, {"names", names}};
}

Json rows_json(const std::vector<RobustnessRow>& rows) {
  Json arr = Json::array();
  for (const auto& r : rows) {
    arr.push_back({{"spec", r.spec},
                   {"level", r.level},
                   {"base_loss", nan_to_null(r.base_loss)},
                   {"perturbed_loss", nan_to_null(r.perturbed_loss)},
                   {"delta_loss", nan_to_null(r.delta_loss)},
                   {"rob_gap_mean", nan_to_null(r.rob_gap_mean)},
                   {"rob_gap_stderr", nan_to_null(r.rob_gap_stderr)},
                   {"accuracy", nan_to_null(r.accuracy)},
                   {"asr_analog", nan_to_null(r.asr_analog)},
                   {"error", r.error}});
  }
  return arr;
}

class Session {
 public:
  Session(PipelineConfig cfg, fs::path dir, std::ostream& log)
      : cfg_(std::move(cfg)), dir_(std::move(dir)), log_(log), problem_(make_problem(cfg_)) {
    fs::create_directories(dir_);
  }

  const Objective& obj() const { return *problem_.objective; }
  const fs::path& dir() const { return dir_; }

  LayeredParams load(const std::optional<std::string>& path, const char* fallback) const {
    const fs::path file = path ? fs::path(*path) : dir_ / fallback;
    LayeredParams params = load_checkpoint(file);
    if (!params.same_structure(problem_.initial)) {
      throw Error(ErrorCode::kShapeMismatch, "checkpoint " + file.string() +
                                                 " does not match the configured objective");
    }
    return params;
  }

  TrainResult align() {
    TrainResult r = run_stage1(obj(), problem_.initial, cfg_);
    write_trace(dir_ / "fo_loss_trace.csv", r.loss_trace, cfg_.fo.steps, cfg_.fo.lr,
                cfg_.fo.scheduler, cfg_.fo.warmup_ratio);
    if (r.aborted) throw Error(ErrorCode::kNonFiniteLoss, "stage I: " + r.abort_reason);
    save_checkpoint(dir_ / "stage1.bin", r.params, {cfg_.seed, "stage1"});
    log_ << "stage I: " << r.loss_trace.size() << " steps written to " << dir_.string() << '\n';
    return r;
  }

  void write_selection(const Selection& sel, const LayeredParams& params) const {
    {
      auto out = open_out(dir_ / "sensitivity.csv");
      write_csv(sel.sensitivity, out);
    }
    {
      auto out = open_out(dir_ / "layer_scores_baselines.csv");
      write_csv_row(out, {"layer_index", "layer_name", "snip", "wanda"});
      for (std::size_t l = 0; l < params.num_layers(); ++l) {
        write_csv_row(out, {std::to_string(l), params.id(l).name,
                            sel.snip.empty() ? "" : format_double(sel.snip[l]),
                            sel.wanda.empty() ? "" : format_double(sel.wanda[l])});
      }
    }
    Json doc = layers_json(sel.mask, params);
    doc["strategy"] = to_string(cfg_.selection);
    doc["m"] = cfg_.sensitivity.m;
    auto out = open_out(dir_ / "selection.json");
    out << doc.dump(2) << '\n';
  }

  LayerMask read_selection(const std::optional<std::string>& path, const LayeredParams& params) const {
    const fs::path file = path ? fs::path(*path) : dir_ / "selection.json";
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::kIo, "cannot read selection " + file.string());
    std::vector<std::size_t> layers;
    try {
      layers = Json::parse(in).at("layers").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kConfig, "malformed selection file: " + std::string(e.what()));
    }
    if (layers.empty()) throw Error(ErrorCode::kConfig, "selection is empty");
    return LayerMask::of(params, layers);
  }

  TrainResult refine(const LayeredParams& aligned, const LayerMask& mask) {
    TrainResult r = run_stage3(obj(), aligned, mask, cfg_);
    write_trace(dir_ / "zo_loss_trace.csv", r.loss_trace, cfg_.zo.steps, cfg_.zo.lr,
                cfg_.zo.scheduler, cfg_.zo.warmup_ratio);
    if (r.aborted) throw Error(ErrorCode::kNonFiniteLoss, "stage III: " + r.abort_reason);
    save_checkpoint(dir_ / "stage3.bin", r.params, {cfg_.seed, "stage3"});
    log_ << "stage III: " << r.loss_trace.size() << " steps on " << mask.num_selected()
         << " layer(s)\n";
    return r;
  }

  std::vector<RobustnessRow> evaluate(const LayeredParams& params, const char* file) const {
    std::vector<RobustnessRow> rows = run_evaluation(obj(), params, cfg_);
    auto out = open_out(dir_ / file);
    write_csv(rows, out);
    return rows;
  }

 private:
  PipelineConfig cfg_;
  fs::path dir_;
  std::ostream& log_;
  Problem problem_;
};

void write_report(const fs::path& dir, const RunReport& rep, const std::vector<std::string>& artifacts) {
  const LayeredParams& shape = rep.stage1.params;
  Json sens = Json::array();
  for (std::size_t l = 0; l < rep.selection.sensitivity.rows.size(); ++l) {
    const auto& r = rep.selection.sensitivity.rows[l];
    sens.push_back({{"layer_index", r.id.index},
                    {"layer_name", r.id.name},
                    {"s_noise", r.s_noise},
                    {"s_noise_stderr", r.s_noise_std_err},
                    {"s_quant", r.s_quant},
                    {"s_combined", r.s_combined},
                    {"normalized", rep.selection.sensitivity.normalized[l]}});
  }
  Json selection = layers_json(rep.selection.mask, shape);
  selection["strategy"] = to_string(rep.config.selection);
  selection["sensitivity"] = sens;
  selection["robust_top_m"] = layers_json(rep.selection.sensitivity.selected, shape)["layers"];
  selection["snip"] = rep.selection.snip;
  selection["wanda"] = rep.selection.wanda;

  Json doc{{"config", to_json(rep.config)},
           {"seed", rep.config.seed},
           {"stage1", {{"steps", rep.stage1.loss_trace.size()}, {"fo_loss_trace", rep.stage1.loss_trace}}},
           {"selection", selection},
           {"stage3", {{"steps", rep.stage3.loss_trace.size()}, {"zo_loss_trace", rep.stage3.loss_trace}}},
           {"robustness", {{"baseline", rows_json(rep.baseline_robustness)},
                           {"refined", rows_json(rep.robustness)}}},
           {"artifacts", artifacts}};
  auto out = open_out(dir / "run_report.json");
  out << doc.dump(2) << '\n';
}

int cmd_run(Session& s, const PipelineConfig& cfg) {
  // Written stage by stage so a failure leaves the artifacts produced so far.
  const TrainResult stage1 = s.align();
  const Selection sel = select_layers(s.obj(), stage1.params, cfg);
  s.write_selection(sel, stage1.params);
  const TrainResult stage3 = s.refine(stage1.params, sel.mask);
  RunReport rep{cfg, stage1, sel, stage3,
                s.evaluate(stage1.params, "baseline_robustness.csv"),
                s.evaluate(stage3.params, "robustness.csv")};
  {
    auto out = open_out(s.dir() / "config.json");
    out << to_json(cfg).dump(2) << '\n';
  }
  std::vector<std::string> artifacts{
      "baseline_robustness.csv", "config.json",    "fo_loss_trace.csv", "layer_scores_baselines.csv",
      "robustness.csv",          "selection.json", "sensitivity.csv",   "stage1.bin",
      "stage1.json",             "stage3.bin",     "stage3.json",       "zo_loss_trace.csv"};
  write_report(s.dir(), rep, artifacts);
  artifacts.push_back("run_report.json");
  write_manifest(s.dir(), artifacts);
  return kExitOk;
}

int dispatch(const std::string& command, const Options& opt, std::ostream& out, std::ostream& err) {
  if (opt.threads) set_thread_limit(*opt.threads);
  ConfigSources sources;
  sources.config_path = opt.config;
  sources.overrides = opt.sets;
  if (const char* env = std::getenv("ZOREFINE_SEED"); env != nullptr && *env != '\0') {
    sources.env_seed = std::string(env);
  }
  sources.flag_seed = opt.seed;
  const PipelineConfig cfg = load_config(sources);
  const fs::path dir = opt.out ? fs::path(*opt.out) : fs::path(cfg.output_dir);

  if (command == "check-manifest") {
    const std::vector<std::string> bad = check_manifest(dir);
    for (const auto& name : bad) err << "modified or missing: " << name << '\n';
    out << (bad.empty() ? "manifest OK\n" : "manifest FAILED\n");
    return bad.empty() ? kExitOk : kExitVerification;
  }
  if (command == "verify") {
    fs::create_directories(dir);
    const auto results = run_verify_suite(cfg.verify, opt.only);
    bool ok = true;
    for (const auto& r : results) {
      out << r.name << ": " << to_string(r.status) << '\n';
      ok = ok && (r.passed() || !is_required_check(r.name));
    }
    auto file = open_out(dir / "verify.json");
    write_json(results, file);
    return ok ? kExitOk : kExitVerification;
  }

  Session s(cfg, dir, out);
  if (command == "align") {
    s.align();
  } else if (command == "sensitivity") {
    const LayeredParams params = s.load(opt.checkpoint, "stage1.bin");
    s.write_selection(select_layers(s.obj(), params, cfg), params);
  } else if (command == "refine") {
    const LayeredParams params = s.load(opt.checkpoint, "stage1.bin");
    s.refine(params, s.read_selection(opt.selection, params));
  } else if (command == "eval") {
    s.evaluate(s.load(opt.checkpoint, "stage3.bin"), "robustness.csv");
  } else if (command == "run") {
    return cmd_run(s, cfg);
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sensitivity-guided zeroth-order robustness refinement"};
  app.require_subcommand(1);
  Options opt;
  std::string chosen;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON configuration file");
    sub->add_option("--seed", opt.seed, "Run seed (overrides the config and ZOREFINE_SEED)");
    sub->add_option("--threads", opt.threads, "Worker thread cap (0 = hardware)");
    sub->add_option("--out", opt.out, "Output directory (overrides output_dir)");
    sub->add_option("--set", opt.sets, "Config override key.path=value (repeatable)");
    sub->callback([&chosen, sub] { chosen = sub->get_name(); });
  };
  common(app.add_subcommand("align", "Stage I: first-order alignment"));
  auto* sens = app.add_subcommand("sensitivity", "Stage II: layer scores and Top-m selection");
  common(sens);
  sens->add_option("--checkpoint", opt.checkpoint, "Stage I checkpoint (default OUT/stage1.bin)");
  auto* refine = app.add_subcommand("refine", "Stage III: masked zeroth-order refinement");
  common(refine);
  refine->add_option("--checkpoint", opt.checkpoint, "Stage I checkpoint (default OUT/stage1.bin)");
  refine->add_option("--selection", opt.selection, "Selection file (default OUT/selection.json)");
  auto* eval = app.add_subcommand("eval", "Perturbation suite on a checkpoint");
  common(eval);
  eval->add_option("--checkpoint", opt.checkpoint, "Checkpoint (default OUT/stage3.bin)");
  auto* verify = app.add_subcommand("verify", "Numeric checks on analytic objectives");
  common(verify);
  verify->add_option("--only", opt.only, "Run a single named check");
  common(app.add_subcommand("run", "All stages plus evaluation and a hash manifest"));
  common(app.add_subcommand("check-manifest", "Verify OUT/MANIFEST.sha256"));

  std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  try {
    return dispatch(chosen, opt, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace zorefine::cli
