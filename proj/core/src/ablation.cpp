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

#include "cimt/ablation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "cimt/checkpoint.hpp"
#include "cimt/error.hpp"
#include "cimt/trainer.hpp"

namespace cimt::harness {

namespace fs = std::filesystem;

std::vector<AblationVariant> ablation_variants() {
  return {
      {"sce+cec", {true, true, false}},
      {"cec+cta", {false, true, true}},
      {"sce+cta", {true, false, true}},
      {"full", {true, true, true}},
      {"baseline", {false, false, false}},
  };
}

const VariantSummary& AblationTable::find(const std::string& variant) const {
  for (const auto& s : summary) {
    if (s.variant.name == variant) return s;
  }
  throw ValidationError("no ablation variant named " + variant);
}

RunConfig ablation_config(const RunConfig& base, const AblationVariant& variant,
                          std::size_t seed) {
  RunConfig c = base;
  c.toggles = variant.toggles;
  if (!variant.toggles.cta) c.ce_trains_encoder = true;
  c.dataset.seed = base.dataset.seed + seed;
  c.model_seed = base.model_seed + seed;
  return c;
}

namespace {

MetricSummary summarize_values(const std::vector<double>& v) {
  MetricSummary s;
  if (v.empty()) return s;
  double total = 0.0;
  for (double x : v) total += x;
  s.mean = total / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

std::string pm(const MetricSummary& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f±%.4f", s.mean, s.std);
  return buf;
}

}  // namespace

SplitSummary summarize(const std::vector<MetricsReport>& reports) {
  std::vector<double> a, se, p, f;
  for (const auto& r : reports) {
    a.push_back(r.accuracy);
    se.push_back(r.sensitivity);
    p.push_back(r.precision);
    f.push_back(r.f1);
  }
  return {summarize_values(a), summarize_values(se), summarize_values(p), summarize_values(f)};
}

AblationTable ablate(const RunConfig& base, const AblationOptions& options) {
  base.validate();
  if (options.seeds == 0) throw ValidationError("ablation needs at least one seed");
  const auto variants = ablation_variants();
  const auto bank = base.load_prompt_bank();

  // Datasets depend only on the seed, so each is built once and shared.
  std::vector<synth::Dataset> datasets;
  for (std::size_t s = 0; s < options.seeds; ++s) {
    datasets.push_back(synth::sample_dataset(ablation_config(base, variants[0], s).dataset));
  }

  AblationTable table;
  table.runs.resize(variants.size() * options.seeds);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t cell = next.fetch_add(1);
      if (cell >= table.runs.size()) return;
      {
        std::lock_guard lock(failure_mu);
        if (failure) return;
      }
      try {
        const auto& variant = variants[cell / options.seeds];
        const std::size_t seed = cell % options.seeds;
        const auto config = ablation_config(base, variant, seed);
        const auto& data = datasets[seed];
        auto result = train(config, data, bank);
        const auto net = inference_model(result.best, bank);
        AblationRun run;
        run.variant = variant;
        run.seed = seed;
        run.test = evaluate(net, data.test).metrics;
        run.shifted = evaluate(net, data.shifted_test).metrics;
        run.best_val_accuracy = result.best_val_accuracy;
        run.best_epoch = result.best_epoch;
        if (!options.out_dir.empty()) {
          const fs::path dir =
              fs::path(options.out_dir) / "runs" / (variant.name + "_seed" + std::to_string(seed));
          fs::create_directories(dir);
          std::ofstream log(dir / "log.csv");
          write_log_csv(log, result.log);
          save_checkpoint((dir / "checkpoint.bin").string(), result.best);
        }
        table.runs[cell] = std::move(run);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, table.runs.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t v = 0; v < variants.size(); ++v) {
    std::vector<MetricsReport> test, shifted;
    for (std::size_t s = 0; s < options.seeds; ++s) {
      test.push_back(table.runs[v * options.seeds + s].test);
      shifted.push_back(table.runs[v * options.seeds + s].shifted);
    }
    table.summary.push_back({variants[v], summarize(test), summarize(shifted)});
  }
  return table;
}

void write_ablation_csv(std::ostream& out, const AblationTable& table, const std::string& split) {
  const bool shifted = split == "shifted";
  if (!shifted && split != "test") throw ValidationError("ablation split must be test or shifted");
  auto flags = [](const model::Toggles& t) {
    return std::string(t.sce ? "1" : "0") + ',' + (t.cec ? "1" : "0") + ',' + (t.cta ? "1" : "0");
  };
  out << "variant,sce,cec,cta,seed,split,accuracy,sensitivity,precision,f1\n";
  for (const auto& r : table.runs) {
    const auto& m = shifted ? r.shifted : r.test;
    out << r.variant.name << ',' << flags(r.variant.toggles) << ',' << r.seed << ',' << split
        << ',' << format_real(m.accuracy) << ',' << format_real(m.sensitivity) << ','
        << format_real(m.precision) << ',' << format_real(m.f1) << '\n';
  }
  for (const auto& s : table.summary) {
    const auto& m = shifted ? s.shifted : s.test;
    out << s.variant.name << ',' << flags(s.variant.toggles) << ",mean±std," << split << ','
        << pm(m.accuracy) << ',' << pm(m.sensitivity) << ',' << pm(m.precision) << ','
        << pm(m.f1) << '\n';
  }
}

std::string format_ablation_report(const AblationTable& table) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-22s %-22s %-22s\n", "variant", "test acc",
                "shifted acc", "shifted sens");
  os << line;
  for (const auto& s : table.summary) {
    std::snprintf(line, sizeof line, "%-10s %-22s %-22s %-22s\n", s.variant.name.c_str(),
                  pm(s.test.accuracy).c_str(), pm(s.shifted.accuracy).c_str(),
                  pm(s.shifted.sensitivity).c_str());
    os << line;
  }
  os << "shifted accuracy ordering:";
  std::vector<const VariantSummary*> order;
  for (const auto& s : table.summary) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    return a->shifted.accuracy.mean > b->shifted.accuracy.mean;
  });
  for (std::size_t i = 0; i < order.size(); ++i) {
    os << (i ? " > " : " ") << order[i]->variant.name;
  }
  os << '\n';
  return os.str();
}

}  // namespace cimt::harness
