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

#include "config_io.hpp"

#include <charconv>
#include <fstream>

#include "zorefine/error.hpp"

namespace zorefine::cli {
namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

// Every key of `doc` must also appear in `reference` (a full default
// document); arrays and scalars are leaves.
void reject_unknown_keys(const Json& doc, const Json& reference, const std::string& path) {
  if (!doc.is_object()) config_error((path.empty() ? "config" : path) + " must be an object");
  for (const auto& [key, value] : doc.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) config_error("unknown key " + where);
    if (reference.at(key).is_object()) reject_unknown_keys(value, reference.at(key), where);
  }
}

// Reads an object field by field.
class Reader {
 public:
  Reader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {}
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  template <typename T>
  void read(const char* key, T& out) {
    if (!obj_.contains(key)) return;
    const Json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) config_error(where(key) + " must be a number");
        out = v.get<double>();
      } else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_unsigned()) config_error(where(key) + " must be a non-negative integer");
        out = v.get<T>();
      } else if constexpr (std::is_same_v<T, int>) {
        if (!v.is_number_integer()) config_error(where(key) + " must be an integer");
        out = v.get<int>();
      } else {
        out = v.get<T>();
      }
    } catch (const nlohmann::json::exception&) {
      config_error(where(key) + " has the wrong type");
    }
  }

  template <typename T>
  void read_optional(const char* key, std::optional<T>& out) {
    if (!obj_.contains(key) || obj_.at(key).is_null()) return;
    T value{};
    read(key, value);
    out = value;
  }

  std::optional<Reader> child(const char* key) {
    if (!obj_.contains(key)) return std::nullopt;
    return std::optional<Reader>(std::in_place, obj_.at(key), where(key));
  }

  std::string where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const Json& obj_;
  std::string path_;
};

template <typename Parse, typename T>
void read_enum(Reader& r, const char* key, T& out, Parse parse) {
  std::optional<std::string> text;
  r.read_optional(key, text);
  if (!text) return;
  try {
    out = parse(*text);
  } catch (const Error& e) {
    config_error(r.where(key) + ": " + e.detail());
  }
}

std::string to_string(ZoScaling s) {
  return s == ZoScaling::kDimScaled ? "dim_scaled" : "gaussian_unit";
}

ZoScaling parse_scaling(const std::string& text) {
  if (text == "gaussian_unit") return ZoScaling::kGaussianUnit;
  if (text == "dim_scaled") return ZoScaling::kDimScaled;
  config_error("unknown scaling '" + text + "'");
}

Json verify_to_json(const VerifyConfig& v) {
  return Json{{"seed", v.seed},
              {"unbiased_dim", v.unbiased_dim},
              {"unbiased_beta", v.unbiased_beta},
              {"unbiased_samples", v.unbiased_samples},
              {"bump_a", v.bump_a},
              {"bump_clip", v.bump_clip},
              {"variance_betas", v.variance_betas},
              {"variance_trials", v.variance_trials},
              {"variance_x", v.variance_x},
              {"pl_dim", v.pl_dim},
              {"pl_lambda_min", v.pl_lambda_min},
              {"pl_lambda_max", v.pl_lambda_max},
              {"pl_radius", v.pl_radius},
              {"pl_eta", v.pl.eta},
              {"pl_beta", v.pl.beta},
              {"pl_steps", v.pl.steps},
              {"pl_seeds", v.pl.n_seeds},
              {"pl_eps_fraction", v.pl_eps_fraction},
              {"rho", v.rho},
              {"one_step_beta", v.one_step_beta},
              {"one_step_cap_fraction", v.one_step_cap_fraction},
              {"one_step_trials", v.one_step_trials},
              {"sigma_trials", v.sigma_trials}};
}

void verify_from_json(Reader& r, VerifyConfig& v) {
  r.read("seed", v.seed);
  r.read("unbiased_dim", v.unbiased_dim);
  r.read("unbiased_beta", v.unbiased_beta);
  r.read("unbiased_samples", v.unbiased_samples);
  r.read("bump_a", v.bump_a);
  r.read("bump_clip", v.bump_clip);
  r.read("variance_betas", v.variance_betas);
  r.read("variance_trials", v.variance_trials);
  r.read("variance_x", v.variance_x);
  r.read("pl_dim", v.pl_dim);
  r.read("pl_lambda_min", v.pl_lambda_min);
  r.read("pl_lambda_max", v.pl_lambda_max);
  r.read("pl_radius", v.pl_radius);
  r.read("pl_eta", v.pl.eta);
  r.read("pl_beta", v.pl.beta);
  r.read("pl_steps", v.pl.steps);
  r.read("pl_seeds", v.pl.n_seeds);
  r.read("pl_eps_fraction", v.pl_eps_fraction);
  r.read("rho", v.rho);
  r.read("one_step_beta", v.one_step_beta);
  r.read("one_step_cap_fraction", v.one_step_cap_fraction);
  r.read("one_step_trials", v.one_step_trials);
  r.read("sigma_trials", v.sigma_trials);
}

}  // namespace

Json to_json(const PipelineConfig& cfg) {
  const ObjectiveConfig& o = cfg.objective;
  Json quadratic{{"diagonal", o.quadratic.diagonal},
                 {"layer_sizes", o.quadratic.layer_sizes},
                 {"lipschitz_radius", nullptr},
                 {"init", o.quadratic.init}};
  if (o.quadratic.lipschitz_radius) quadratic["lipschitz_radius"] = *o.quadratic.lipschitz_radius;
  Json specs = Json::array();
  for (const auto& s : cfg.eval.specs) specs.push_back(s.to_string());
  return Json{
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir},
      {"objective",
       {{"kind", to_string(o.kind)},
        {"dataset",
         {{"n", o.dataset.n},
          {"features", o.dataset.features},
          {"separation", o.dataset.separation},
          {"margin", o.dataset.margin}}},
        {"mlp", {{"hidden", o.mlp.hidden}}},
        {"quadratic", quadratic},
        {"cubic_bump", {{"a", o.cubic_bump.a}, {"clip", o.cubic_bump.clip}, {"init", o.cubic_bump.init}}}}},
      {"fo",
       {{"steps", cfg.fo.steps},
        {"lr", cfg.fo.lr},
        {"momentum", cfg.fo.momentum},
        {"scheduler", to_string(cfg.fo.scheduler)},
        {"warmup_ratio", cfg.fo.warmup_ratio},
        {"weight_decay", cfg.fo.weight_decay},
        {"batch_size", cfg.fo.batch_size}}},
      {"zo",
       {{"steps", cfg.zo.steps},
        {"lr", cfg.zo.lr},
        {"beta", cfg.zo.zo.beta},
        {"samples_per_update", cfg.zo.zo.samples_per_update},
        {"scaling", to_string(cfg.zo.zo.scaling)},
        {"scheduler", to_string(cfg.zo.scheduler)},
        {"warmup_ratio", cfg.zo.warmup_ratio},
        {"weight_decay", cfg.zo.weight_decay},
        {"batch_size", cfg.zo.batch_size}}},
      {"sensitivity",
       {{"rho", cfg.sensitivity.rho},
        {"lambda", cfg.sensitivity.lambda},
        {"n_trials", cfg.sensitivity.n_trials},
        {"m", cfg.sensitivity.m},
        {"quant_bits", cfg.sensitivity.quant_bits}}},
      {"selection", to_string(cfg.selection)},
      {"eval",
       {{"specs", specs},
        {"n_repeats", cfg.eval.n_repeats},
        {"gap_samples", cfg.eval.gap_samples},
        {"default_rho", cfg.eval.default_rho},
        {"weight_noise_unit", cfg.eval.weight_noise_unit}}},
      {"verify", verify_to_json(cfg.verify)}};
}

PipelineConfig from_json(const Json& doc) {
  PipelineConfig cfg = PipelineConfig::defaults();
  reject_unknown_keys(doc, to_json(cfg), "");
  {
    Reader root(doc, "");
    root.read("seed", cfg.seed);
    root.read("output_dir", cfg.output_dir);
    if (auto o = root.child("objective")) {
      read_enum(*o, "kind", cfg.objective.kind, parse_objective_kind);
      if (auto d = o->child("dataset")) {
        d->read("n", cfg.objective.dataset.n);
        d->read("features", cfg.objective.dataset.features);
        d->read("separation", cfg.objective.dataset.separation);
        d->read("margin", cfg.objective.dataset.margin);
      }
      if (auto m = o->child("mlp")) m->read("hidden", cfg.objective.mlp.hidden);
      if (auto q = o->child("quadratic")) {
        q->read("diagonal", cfg.objective.quadratic.diagonal);
        q->read("layer_sizes", cfg.objective.quadratic.layer_sizes);
        q->read_optional("lipschitz_radius", cfg.objective.quadratic.lipschitz_radius);
        q->read("init", cfg.objective.quadratic.init);
      }
      if (auto c = o->child("cubic_bump")) {
        c->read("a", cfg.objective.cubic_bump.a);
        c->read("clip", cfg.objective.cubic_bump.clip);
        c->read("init", cfg.objective.cubic_bump.init);
      }
    }
    if (auto f = root.child("fo")) {
      f->read("steps", cfg.fo.steps);
      f->read("lr", cfg.fo.lr);
      f->read("momentum", cfg.fo.momentum);
      read_enum(*f, "scheduler", cfg.fo.scheduler, parse_scheduler);
      f->read("warmup_ratio", cfg.fo.warmup_ratio);
      f->read("weight_decay", cfg.fo.weight_decay);
      f->read("batch_size", cfg.fo.batch_size);
    }
    if (auto z = root.child("zo")) {
      z->read("steps", cfg.zo.steps);
      z->read("lr", cfg.zo.lr);
      z->read("beta", cfg.zo.zo.beta);
      z->read("samples_per_update", cfg.zo.zo.samples_per_update);
      read_enum(*z, "scaling", cfg.zo.zo.scaling, parse_scaling);
      read_enum(*z, "scheduler", cfg.zo.scheduler, parse_scheduler);
      z->read("warmup_ratio", cfg.zo.warmup_ratio);
      z->read("weight_decay", cfg.zo.weight_decay);
      z->read("batch_size", cfg.zo.batch_size);
    }
    if (auto s = root.child("sensitivity")) {
      s->read("rho", cfg.sensitivity.rho);
      s->read("lambda", cfg.sensitivity.lambda);
      s->read("n_trials", cfg.sensitivity.n_trials);
      s->read("m", cfg.sensitivity.m);
      s->read("quant_bits", cfg.sensitivity.quant_bits);
    }
    read_enum(root, "selection", cfg.selection, parse_selection_strategy);
    if (auto e = root.child("eval")) {
      std::optional<std::vector<std::string>> specs;
      e->read_optional("specs", specs);
      if (specs) {
        cfg.eval.specs.clear();
        for (const auto& s : *specs) {
          try {
            cfg.eval.specs.push_back(PerturbSpec::parse(s));
          } catch (const Error& err) {
            config_error("eval.specs: " + err.detail());
          }
        }
      }
      e->read("n_repeats", cfg.eval.n_repeats);
      e->read("gap_samples", cfg.eval.gap_samples);
      e->read("default_rho", cfg.eval.default_rho);
      e->read("weight_noise_unit", cfg.eval.weight_noise_unit);
    }
    if (auto v = root.child("verify")) verify_from_json(*v, cfg.verify);
  }
  cfg.validate();
  return cfg;
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    config_error("override '" + assignment + "' must look like key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) config_error("override '" + assignment + "' has an empty key");
    if (!node->is_object()) config_error("override '" + assignment + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

std::uint64_t parse_seed(const std::string& text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    config_error("seed '" + text + "' is not an unsigned 64-bit integer");
  }
  return v;
}

PipelineConfig load_config(const ConfigSources& sources) {
  Json doc = Json::object();
  if (sources.config_path) {
    std::ifstream in(*sources.config_path);
    if (!in) config_error("cannot open config " + *sources.config_path);
    try {
      doc = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      config_error("config " + *sources.config_path + " is not valid JSON: " + e.what());
    }
  }
  for (const auto& o : sources.overrides) apply_override(doc, o);
  if (sources.env_seed) doc["seed"] = parse_seed(*sources.env_seed);
  if (sources.flag_seed) doc["seed"] = *sources.flag_seed;
  return from_json(doc);
}

}  // namespace zorefine::cli
