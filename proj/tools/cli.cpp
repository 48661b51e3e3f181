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

#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include "cimt/ablation.hpp"
#include "cimt/checkpoint.hpp"
#include "cimt/config.hpp"
#include "cimt/error.hpp"
#include "cimt/gradcheck_suite.hpp"
#include "cimt/synth.hpp"
#include "cimt/trainer.hpp"

namespace cimt::cli {

namespace fs = std::filesystem;
using harness::RunConfig;

namespace {

constexpr double kGradTolerance = 1e-5;

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void print_metrics(std::ostream& out, const std::string& split, const harness::MetricsReport& m) {
  char line[256];
  std::snprintf(line, sizeof line,
                "%s: accuracy %.4f  sensitivity %.4f%s  precision %.4f%s  f1 %.4f%s"
                "  (TP %zu FP %zu TN %zu FN %zu)\n",
                split.c_str(), m.accuracy, m.sensitivity, m.sensitivity_undefined ? "*" : "",
                m.precision, m.precision_undefined ? "*" : "", m.f1, m.f1_undefined ? "*" : "",
                m.tp, m.fp, m.tn, m.fn);
  out << line;
}

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : harness::load_config(path);
}

model::Model load_model(const std::string& checkpoint, const model::PromptBank& bank) {
  auto params = harness::load_checkpoint(checkpoint);
  const auto vocab = model::Vocabulary::from_bank(bank);
  const auto& table = params.get("txt.embedding");
  if (table.dim(0) != vocab.size()) {
    throw ValidationError("checkpoint vocabulary size " + std::to_string(table.dim(0)) +
                          " does not match the prompt bank (" + std::to_string(vocab.size()) +
                          ")");
  }
  return harness::inference_model(params, bank);
}

int cmd_generate(const std::string& config_path, const fs::path& out_dir, std::ostream& out) {
  const auto config = harness::load_config(config_path);
  const auto data = synth::sample_dataset(config.dataset);
  fs::create_directories(out_dir);
  const std::pair<const char*, const std::vector<synth::SynthFrame>*> splits[] = {
      {"train", &data.train}, {"val", &data.val}, {"test", &data.test},
      {"shifted", &data.shifted_test}};
  for (const auto& [name, frames] : splits) {
    auto f = open_out(out_dir / (std::string(name) + ".synth"));
    synth::write_split(f, *frames);
    std::size_t pos = 0;
    for (const auto& fr : *frames) pos += fr.label == 1;
    out << name << ": " << frames->size() << " frames, " << pos << " thickening\n";
  }
  harness::save_config((out_dir / "config.json").string(), config);
  return kExitOk;
}

int cmd_train(const std::string& config_path, const fs::path& out_dir, std::ostream& out) {
  const auto config = harness::load_config(config_path);
  const auto bank = config.load_prompt_bank();
  const auto data = synth::sample_dataset(config.dataset);
  fs::create_directories(out_dir);
  auto result = harness::train(config, data, bank, [&](const harness::EpochLog& e) {
    char line[200];
    std::snprintf(line, sizeof line, "epoch %3zu  total %.5f  itcl %.5f  cl %.5f  ce %.5f  adv %.5f  val_acc %.4f\n",
                  e.epoch, e.total, e.l_itcl, e.l_cl, e.l_ce, e.l_adv, e.val_acc);
    out << line << std::flush;
  });
  harness::save_checkpoint((out_dir / "checkpoint.bin").string(), result.best);
  auto log = open_out(out_dir / "log.csv");
  harness::write_log_csv(log, result.log);
  harness::save_config((out_dir / "config.json").string(), config);
  out << "best epoch " << result.best_epoch << ", val accuracy "
      << harness::format_real(result.best_val_accuracy) << '\n';
  const auto net = harness::inference_model(result.best, bank);
  print_metrics(out, "test", harness::evaluate(net, data.test).metrics);
  print_metrics(out, "shifted", harness::evaluate(net, data.shifted_test).metrics);
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path,
             const std::string& split, std::string csv, std::ostream& out) {
  const auto config = harness::load_config(config_path);
  const auto bank = config.load_prompt_bank();
  const auto net = load_model(checkpoint, bank);
  const auto data = synth::sample_dataset(config.dataset);
  const auto eval = harness::evaluate(net, harness::split_by_name(data, split));
  if (csv.empty()) csv = (fs::path(checkpoint).parent_path() / ("eval_" + split + ".csv")).string();
  auto f = open_out(csv);
  harness::write_eval_csv(f, eval);
  print_metrics(out, split, eval.metrics);
  out << "per-frame predictions: " << csv << '\n';
  return kExitOk;
}

int cmd_ablate(const std::string& config_path, const fs::path& out_dir, std::size_t seeds,
               std::size_t jobs, std::ostream& out) {
  const auto config = harness::load_config(config_path);
  harness::AblationOptions options;
  options.seeds = seeds;
  options.jobs = jobs;
  options.out_dir = out_dir.string();
  fs::create_directories(out_dir);
  const auto table = harness::ablate(config, options);
  for (const char* split : {"test", "shifted"}) {
    auto f = open_out(out_dir / (std::string("ablation_") + split + ".csv"));
    harness::write_ablation_csv(f, table, split);
  }
  const auto report = harness::format_ablation_report(table);
  auto f = open_out(out_dir / "report.txt");
  f << report;
  out << report;
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::ostream& out) {
  const auto report = run_gradcheck_suite(seed);
  char line[200];
  for (const auto& c : report.cases) {
    std::snprintf(line, sizeof line,
                  "%-36s probed %5zu  max rel error %.3e  (param %zu[%zu]: %.6e vs %.6e)\n",
                  c.name.c_str(), c.result.probed, c.result.max_rel_error, c.result.worst_param,
                  c.result.worst_index, c.result.worst_analytic, c.result.worst_numeric);
    out << line;
  }
  std::snprintf(line, sizeof line, "max relative error %.3e (%s) in %.1f s\n",
                report.max_rel_error, report.worst_case.c_str(), report.seconds);
  out << line;
  if (report.max_rel_error > kGradTolerance) {
    throw NumericError("gradient check exceeded tolerance 1e-5");
  }
  return kExitOk;
}

int cmd_export(const std::string& checkpoint, const std::string& config_path,
               const std::string& split, const std::string& csv, std::ostream& out) {
  const auto config = config_or_default(config_path);
  const auto bank = config.load_prompt_bank();
  const auto net = load_model(checkpoint, bank);
  const auto data = synth::sample_dataset(config.dataset);
  const auto& frames = harness::split_by_name(data, split);
  const auto features = harness::embed(net, frames);
  auto f = open_out(csv);
  harness::write_embeddings_csv(f, features, frames);
  out << "wrote " << features.size() << " embeddings to " << csv << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal style/content augmentation for carotid IMT classification"};
  app.name("cimt");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string config, checkpoint, out_path, split, csv;
  std::uint64_t seed = 0;
  std::size_t seeds = 5, jobs = 1;
  const std::vector<std::string> split_names{"train", "val", "test", "shifted"};

  auto* generate = app.add_subcommand("generate", "Sample the synthetic dataset and export it");
  generate->add_option("--config", config, "RunConfig JSON")->required();
  generate->add_option("--out", out_path, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train one model");
  train->add_option("--config", config, "RunConfig JSON")->required();
  train->add_option("--out", out_path, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--config", config, "RunConfig JSON")->required();
  eval->add_option("--split", split, "Split")->required()->check(CLI::IsMember(split_names));
  eval->add_option("--csv", csv, "Per-frame CSV (default: next to the checkpoint)");

  auto* ablate = app.add_subcommand("ablate", "Module ablation over several seeds");
  ablate->add_option("--config", config, "RunConfig JSON")->required();
  ablate->add_option("--out", out_path, "Output directory")->required();
  ablate->add_option("--seeds", seeds, "Seeds per variant")->check(CLI::PositiveNumber);
  ablate->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

  auto* gradcheck = app.add_subcommand("gradcheck", "Run the gradient-check suite");
  gradcheck->add_option("--seed", seed, "Suite seed");

  auto* exporter = app.add_subcommand("export-embeddings", "Write per-frame features to CSV");
  exporter->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  exporter->add_option("--split", split, "Split")->required()->check(CLI::IsMember(split_names));
  exporter->add_option("--out", csv, "Output CSV")->required();
  exporter->add_option("--config", config, "RunConfig JSON (default settings if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*generate) return cmd_generate(config, out_path, out);
    if (*train) return cmd_train(config, out_path, out);
    if (*eval) return cmd_eval(checkpoint, config, split, csv, out);
    if (*ablate) return cmd_ablate(config, out_path, seeds, jobs, out);
    if (*gradcheck) return cmd_gradcheck(seed, out);
    if (*exporter) return cmd_export(checkpoint, config, split, csv, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace cimt::cli
