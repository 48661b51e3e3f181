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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cimt/ablation.hpp"
#include "cimt/checkpoint.hpp"
#include "cimt/config.hpp"
#include "cimt/error.hpp"
#include "cimt/metrics.hpp"
#include "cimt/trainer.hpp"
#include "cli.hpp"

using namespace cimt;
using namespace cimt::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("cimt_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig small_config() {
  RunConfig c;
  c.dataset.n_total = 20;
  c.epochs = 2;
  c.batch_size = 4;
  return c;
}

std::string serialize(const model::ParameterSet& p) {
  std::ostringstream os;
  save_checkpoint(os, p);
  return os.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(std::vector<std::string> args, std::string* out = nullptr, std::string* err = nullptr) {
  args.insert(args.begin(), "cimt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return code;
}

}  // namespace

TEST(Metrics, HandConfusion) {
  const auto m = metrics_from_counts(8, 1, 9, 2);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.85);
  EXPECT_DOUBLE_EQ(m.sensitivity, 0.8);
  EXPECT_NEAR(m.precision, 0.8889, 5e-5);
  EXPECT_NEAR(m.f1, 0.8421, 5e-5);
}

TEST(Metrics, FromPredictions) {
  const std::vector<int> truth{1, 1, 0, 0, 1}, pred{1, 0, 0, 1, 1};
  const auto m = compute_metrics(pred, truth);
  EXPECT_EQ(m.tp, 2u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.tn, 1u);
  const auto perfect = compute_metrics(truth, truth);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.sensitivity, 1.0);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
  EXPECT_THROW(compute_metrics(std::vector<int>{1}, truth), ValidationError);
  EXPECT_THROW(compute_metrics(std::vector<int>{}, std::vector<int>{}), ValidationError);
}

TEST(Metrics, NoPositivesPredicted) {
  const auto m = compute_metrics(std::vector<int>{0, 0, 0}, std::vector<int>{1, 0, 1});
  EXPECT_EQ(m.sensitivity, 0.0);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_TRUE(m.precision_undefined);
  EXPECT_TRUE(m.f1_undefined);
}

TEST(Metrics, FormulaIdentities) {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t tp = rng.below(30), fp = rng.below(30), tn = rng.below(30), fn = rng.below(30);
    if (tp + fp + tn + fn == 0) continue;
    const auto m = metrics_from_counts(tp, fp, tn, fn);
    const double n = static_cast<double>(tp + fp + tn + fn);
    EXPECT_DOUBLE_EQ(m.accuracy, static_cast<double>(tp + tn) / n);
    const double sens = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double prec = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    EXPECT_DOUBLE_EQ(m.sensitivity, sens);
    EXPECT_DOUBLE_EQ(m.precision, prec);
    EXPECT_NEAR(m.f1, prec + sens > 0 ? 2 * prec * sens / (prec + sens) : 0.0, 1e-15);
    EXPECT_EQ(m.sensitivity_undefined, tp + fn == 0);
    EXPECT_EQ(m.precision_undefined, tp + fp == 0);
  }
}

TEST(Config, RoundTrip) {
  RunConfig c;
  c.epochs = 17;
  c.learning_rate = 0.0123456789012345;
  c.toggles.cec = false;
  c.dataset.shifted_range.gain = {1.5, 1.7};
  c.weights.tau = 0.1;
  const auto text = to_json(c);
  const auto back = config_from_json(text);
  EXPECT_EQ(to_json(back), text);
  EXPECT_EQ(back.learning_rate, c.learning_rate);
  EXPECT_FALSE(back.toggles.cec);
}

TEST(Config, Rejections) {
  EXPECT_THROW(config_from_json(R"({"epochz": 3})"), ValidationError);
  EXPECT_THROW(config_from_json(R"({"weights": {"tau": 0}})"), ValidationError);
  EXPECT_THROW(config_from_json(R"({"batch_size": 0})"), ValidationError);
  EXPECT_THROW(config_from_json(R"({"optimizer": "adam"})"), ValidationError);
  EXPECT_THROW(config_from_json("{"), ValidationError);
  EXPECT_THROW(config_from_json(R"({"learning_rate": -1})"), ValidationError);
  const auto partial = config_from_json(R"({"epochs": 5})");
  EXPECT_EQ(partial.epochs, 5u);
  EXPECT_EQ(partial.batch_size, 16u);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  const auto params = model::init_parameters(4, 30);
  const auto bytes = serialize(params);
  std::istringstream in(bytes);
  const auto back = load_checkpoint(in);
  EXPECT_EQ(serialize(back), bytes);
  ASSERT_EQ(back.items().size(), params.items().size());
  for (std::size_t i = 0; i < params.items().size(); ++i) {
    EXPECT_EQ(back.items()[i].name, params.items()[i].name);
    EXPECT_EQ(back.items()[i].group, params.items()[i].group);
  }

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream a(bad_magic);
  EXPECT_THROW(load_checkpoint(a), ValidationError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  std::istringstream b(bad_version);
  EXPECT_THROW(load_checkpoint(b), ValidationError);
  std::istringstream c(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_checkpoint(c), ValidationError);
}

TEST(Train, ZeroEpochsKeepsInitialization) {
  auto c = small_config();
  c.epochs = 0;
  const auto bank = c.load_prompt_bank();
  const auto data = synth::sample_dataset(c.dataset);
  const auto r = train(c, data, bank);
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(serialize(r.best),
            serialize(model::init_parameters(c.model_seed, model::Vocabulary::from_bank(bank).size())));
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  auto c = small_config();
  c.learning_rate = 0.0;
  const auto bank = c.load_prompt_bank();
  const auto data = synth::sample_dataset(c.dataset);
  const auto r = train(c, data, bank);
  ASSERT_EQ(r.log.size(), 2u);
  const auto init =
      serialize(model::init_parameters(c.model_seed, model::Vocabulary::from_bank(bank).size()));
  EXPECT_EQ(serialize(r.last), init);
  EXPECT_EQ(serialize(r.best), init);
}

TEST(Train, DeterministicAndLogged) {
  const auto c = small_config();
  const auto bank = c.load_prompt_bank();
  const auto data = synth::sample_dataset(c.dataset);
  const auto a = train(c, data, bank), b = train(c, data, bank);
  EXPECT_EQ(serialize(a.best), serialize(b.best));
  EXPECT_EQ(serialize(a.last), serialize(b.last));
  std::ostringstream la, lb;
  write_log_csv(la, a.log);
  write_log_csv(lb, b.log);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(la.str().substr(0, la.str().find('\n')), "epoch,l_itcl,l_cl,l_ce,l_adv,total,val_acc,val_f1");
  for (const auto& e : a.log) {
    EXPECT_TRUE(std::isfinite(e.total));
    EXPECT_GT(e.l_itcl, 0.0);
    EXPECT_GT(e.l_adv, 0.0);
  }
}

TEST(Train, GradClipBoundsTheStep) {
  auto c = small_config();
  c.epochs = 1;
  c.grad_clip = 1e-9;
  c.momentum = 0.0;
  const auto bank = c.load_prompt_bank();
  const auto data = synth::sample_dataset(c.dataset);
  const auto r = train(c, data, bank);
  const auto init = model::init_parameters(c.model_seed, model::Vocabulary::from_bank(bank).size());
  double moved = 0.0;
  for (std::size_t i = 0; i < init.items().size(); ++i) {
    const auto a = init.items()[i].tensor.values(), b = r.last.items()[i].tensor.values();
    for (std::size_t k = 0; k < a.size(); ++k) moved += (a[k] - b[k]) * (a[k] - b[k]);
  }
  // Three steps, each at most lr * clip in global norm.
  EXPECT_LE(std::sqrt(moved), 3 * c.learning_rate * c.grad_clip * (1 + 1e-9));
}

TEST(Evaluate, ContractAndCsv) {
  const auto c = small_config();
  const auto bank = c.load_prompt_bank();
  const auto data = synth::sample_dataset(c.dataset);
  const auto net = inference_model(model::init_parameters(1, model::Vocabulary::from_bank(bank).size()), bank);
  EXPECT_THROW(evaluate(net, {}), ValidationError);
  const auto a = evaluate(net, data.test), b = evaluate(net, data.test);
  std::ostringstream ca, cb;
  write_eval_csv(ca, a);
  write_eval_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(ca.str().substr(0, ca.str().find('\n')), "frame,truth,pred,p_thickening");
  EXPECT_EQ(a.frames.size(), data.test.size());
}

TEST(Ablation, VariantsAndConfig) {
  const auto v = ablation_variants();
  ASSERT_EQ(v.size(), 5u);
  EXPECT_EQ(v[3].name, "full");
  EXPECT_EQ(v[4].name, "baseline");
  RunConfig base;
  const auto cell = ablation_config(base, v[0], 3);
  EXPECT_TRUE(cell.ce_trains_encoder);
  EXPECT_EQ(cell.dataset.seed, base.dataset.seed + 3);
  EXPECT_EQ(cell.model_seed, base.model_seed + 3);
  EXPECT_FALSE(ablation_config(base, v[3], 0).ce_trains_encoder);
}

TEST(Ablation, CsvLayout) {
  AblationTable table;
  for (const auto& variant : ablation_variants()) {
    std::vector<MetricsReport> reps;
    for (std::size_t s = 0; s < 5; ++s) {
      AblationRun r;
      r.variant = variant;
      r.seed = s;
      r.test = metrics_from_counts(8, 1, 9, 2);
      r.shifted = metrics_from_counts(5 + s % 2, 2, 8, 5);
      table.runs.push_back(r);
      reps.push_back(r.shifted);
    }
    table.summary.push_back({variant, summarize(reps), summarize(reps)});
  }
  std::ostringstream os;
  write_ablation_csv(os, table, "shifted");
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "variant,sce,cec,cta,seed,split,accuracy,sensitivity,precision,f1");
  std::size_t runs = 0, summaries = 0;
  while (std::getline(in, line)) {
    if (line.find("mean±std") != std::string::npos) {
      ++summaries;
    } else {
      ++runs;
      EXPECT_NE(line.find(",shifted,"), std::string::npos);
    }
  }
  EXPECT_EQ(runs, 25u);
  EXPECT_EQ(summaries, 5u);
  EXPECT_NE(os.str().find("full,1,1,1,"), std::string::npos);
  EXPECT_NE(os.str().find("baseline,0,0,0,"), std::string::npos);
  EXPECT_THROW(write_ablation_csv(os, table, "val"), ValidationError);
}

TEST(Ablation, Summary) {
  std::vector<MetricsReport> reps{metrics_from_counts(1, 0, 1, 0), metrics_from_counts(0, 1, 0, 1)};
  const auto s = summarize(reps);
  EXPECT_DOUBLE_EQ(s.accuracy.mean, 0.5);
  EXPECT_NEAR(s.accuracy.std, std::sqrt(0.5), 1e-15);
}

TEST(Cli, ExitCodes) {
  std::string out, err;
  EXPECT_EQ(run_cli({"--help"}, &out), 0);
  EXPECT_NE(out.find("gradcheck"), std::string::npos);
  EXPECT_EQ(run_cli({}, &out, &err), 1);
  EXPECT_EQ(run_cli({"train", "--bogus"}, &out, &err), 1);
  EXPECT_FALSE((out + err).empty());
  EXPECT_EQ(run_cli({"train", "--out", "x"}, &out, &err), 1);
  EXPECT_EQ(run_cli({"train", "--config", "/nonexistent/cfg.json", "--out", "x"}, &out, &err), 1);
  EXPECT_EQ(run_cli({"eval", "--checkpoint", "a", "--config", "b", "--split", "nope"}), 1);

  const auto dir = scratch_dir("cli_codes");
  std::ofstream(dir / "bad.json") << R"({"weights": {"tau": -1}})";
  EXPECT_EQ(run_cli({"generate", "--config", (dir / "bad.json").string(), "--out", dir.string()}), 1);
  std::ofstream(dir / "ok.json") << R"({"dataset": {"n_total": 20}, "epochs": 1})";
  std::ofstream(dir / "junk.bin") << "not a checkpoint";
  EXPECT_EQ(run_cli({"eval", "--checkpoint", (dir / "junk.bin").string(), "--config",
                     (dir / "ok.json").string(), "--split", "test"}),
            1);
}

TEST(Cli, Pipeline) {
  const auto dir = scratch_dir("cli_pipeline");
  const auto cfg = (dir / "cfg.json").string();
  std::ofstream(cfg) << R"({"dataset": {"n_total": 20}, "epochs": 2, "batch_size": 4})";
  std::string out, err;
  ASSERT_EQ(run_cli({"generate", "--config", cfg, "--out", (dir / "data").string()}, &out, &err), 0)
      << err;
  EXPECT_EQ(synth::read_split((dir / "data" / "train.synth").string()).size(), 12u);
  EXPECT_EQ(synth::read_split((dir / "data" / "shifted.synth").string()).size(), 4u);

  ASSERT_EQ(run_cli({"train", "--config", cfg, "--out", (dir / "run").string()}, &out, &err), 0)
      << err;
  const auto ckpt = (dir / "run" / "checkpoint.bin").string();
  EXPECT_TRUE(fs::exists(dir / "run" / "log.csv"));
  EXPECT_EQ(config_from_json(read_file(dir / "run" / "config.json")).epochs, 2u);

  ASSERT_EQ(run_cli({"eval", "--checkpoint", ckpt, "--config", cfg, "--split", "shifted"}, &out,
                    &err),
            0)
      << err;
  EXPECT_TRUE(fs::exists(dir / "run" / "eval_shifted.csv"));

  const auto emb = (dir / "emb.csv").string();
  ASSERT_EQ(run_cli({"export-embeddings", "--checkpoint", ckpt, "--split", "test", "--out", emb,
                     "--config", cfg},
                    &out, &err),
            0)
      << err;
  std::istringstream rows(read_file(emb));
  std::string header;
  std::getline(rows, header);
  EXPECT_EQ(header.substr(0, 17), "frame,label,f0,f1");
  std::size_t n = 0;
  for (std::string line; std::getline(rows, line);) {
    ++n;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 65);
  }
  EXPECT_EQ(n, 4u);

  // Running the same command again yields identical bytes.
  const auto first = read_file(ckpt);
  ASSERT_EQ(run_cli({"train", "--config", cfg, "--out", (dir / "run").string()}), 0);
  EXPECT_EQ(read_file(ckpt), first);
}
