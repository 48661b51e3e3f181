// Copyright 2026 The Causal-IMT Authors.
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

#include "cimt/config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "cimt/error.hpp"

namespace cimt::harness {

using nlohmann::json;

namespace {

json range_json(const synth::StyleRange& r) {
  return {{"gain", r.gain},
          {"bias", r.bias},
          {"gamma", r.gamma},
          {"speckle", r.speckle},
          {"blur_sigma", r.blur_sigma}};
}

// Reads known keys out of one JSON object and rejects the rest.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ValidationError(where_ + " must be a JSON object");
  }

  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : obj_.items()) {
      if (!known_.count(key)) {
        throw ValidationError("unknown config key \"" + where_ + key + "\"");
      }
    }
  }

  template <typename T>
  void read(const char* key, T& out) {
    known_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError("config key \"" + where_ + key + "\": " + e.what());
    }
  }

  const json* child(const char* key) {
    known_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

  const std::string& where() const { return where_; }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> known_;
};

void read_range(const json& j, const std::string& where, synth::StyleRange& r) {
  ObjectReader rd(j, where);
  rd.read("gain", r.gain);
  rd.read("bias", r.bias);
  rd.read("gamma", r.gamma);
  rd.read("speckle", r.speckle);
  rd.read("blur_sigma", r.blur_sigma);
}

}  // namespace

void RunConfig::validate() const {
  dataset.validate();
  if (epochs > 100000) throw ValidationError("epochs is implausibly large");
  if (batch_size < 1) throw ValidationError("batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must be in [0,1)");
  if (!(grad_clip >= 0.0)) throw ValidationError("grad_clip must be >= 0");
  if (optimizer != "sgd") throw ValidationError("optimizer must be \"sgd\"");
  weights.validate();
  if (!(eps_stat > 0.0) || !(eps_content > 0.0)) throw ValidationError("eps values must be > 0");
  if ((toggles.sce || toggles.cec) && batch_size < 2) {
    throw ValidationError("style and content modules need batch_size >= 2");
  }
}

model::StepOptions RunConfig::step_options() const {
  model::StepOptions o;
  o.weights = weights;
  o.toggles = toggles;
  o.ce_trains_encoder = ce_trains_encoder;
  o.eps_stat = eps_stat;
  o.eps_content = eps_content;
  return o;
}

model::PromptBank RunConfig::load_prompt_bank() const {
  return prompt_bank.empty() ? model::PromptBank::builtin() : model::PromptBank::load(prompt_bank);
}

std::string to_json(const RunConfig& c) {
  const auto& d = c.dataset;
  json j;
  j["dataset"] = {{"n_total", d.n_total},
                  {"positive_fraction", d.positive_fraction},
                  {"train_fraction", d.train_fraction},
                  {"val_fraction", d.val_fraction},
                  {"test_fraction", d.test_fraction},
                  {"train_range", range_json(d.train_range)},
                  {"shifted_range", range_json(d.shifted_range)},
                  {"seed", d.seed},
                  {"sequence_mode", d.sequence_mode},
                  {"frames_per_video", d.frames_per_video},
                  {"style_drift", d.style_drift}};
  j["model_seed"] = c.model_seed;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["optimizer"] = c.optimizer;
  j["momentum"] = c.momentum;
  j["grad_clip"] = c.grad_clip;
  j["weights"] = {{"alpha1", c.weights.alpha1},
                  {"alpha2", c.weights.alpha2},
                  {"alpha3", c.weights.alpha3},
                  {"tau", c.weights.tau}};
  j["toggles"] = {{"sce", c.toggles.sce}, {"cec", c.toggles.cec}, {"cta", c.toggles.cta}};
  j["ce_trains_encoder"] = c.ce_trains_encoder;
  j["eps_stat"] = c.eps_stat;
  j["eps_content"] = c.eps_content;
  j["prompt_bank"] = c.prompt_bank;
  j["output_dir"] = c.output_dir;
  return j.dump(2) + "\n";
}

RunConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  {
    ObjectReader rd(j, "");
    if (const json* ds = rd.child("dataset")) {
      auto& d = c.dataset;
      ObjectReader dr(*ds, "dataset.");
      dr.read("n_total", d.n_total);
      dr.read("positive_fraction", d.positive_fraction);
      dr.read("train_fraction", d.train_fraction);
      dr.read("val_fraction", d.val_fraction);
      dr.read("test_fraction", d.test_fraction);
      if (const json* r = dr.child("train_range")) read_range(*r, "dataset.train_range.", d.train_range);
      if (const json* r = dr.child("shifted_range")) {
        read_range(*r, "dataset.shifted_range.", d.shifted_range);
      }
      dr.read("seed", d.seed);
      dr.read("sequence_mode", d.sequence_mode);
      dr.read("frames_per_video", d.frames_per_video);
      dr.read("style_drift", d.style_drift);
    }
    rd.read("model_seed", c.model_seed);
    rd.read("epochs", c.epochs);
    rd.read("batch_size", c.batch_size);
    rd.read("learning_rate", c.learning_rate);
    rd.read("optimizer", c.optimizer);
    rd.read("momentum", c.momentum);
    rd.read("grad_clip", c.grad_clip);
    if (const json* w = rd.child("weights")) {
      ObjectReader wr(*w, "weights.");
      wr.read("alpha1", c.weights.alpha1);
      wr.read("alpha2", c.weights.alpha2);
      wr.read("alpha3", c.weights.alpha3);
      wr.read("tau", c.weights.tau);
    }
    if (const json* t = rd.child("toggles")) {
      ObjectReader tr(*t, "toggles.");
      tr.read("sce", c.toggles.sce);
      tr.read("cec", c.toggles.cec);
      tr.read("cta", c.toggles.cta);
    }
    rd.read("ce_trains_encoder", c.ce_trains_encoder);
    rd.read("eps_stat", c.eps_stat);
    rd.read("eps_content", c.eps_content);
    rd.read("prompt_bank", c.prompt_bank);
    rd.read("output_dir", c.output_dir);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const std::string& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write config " + path);
  out << to_json(config);
}

}  // namespace cimt::harness
