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

#include <benchmark/benchmark.h>

#include <vector>

#include "cimt/causal.hpp"
#include "cimt/models.hpp"
#include "cimt/ops.hpp"
#include "cimt/rng.hpp"
#include "cimt/synth.hpp"
#include "cimt/trainer.hpp"

using namespace cimt;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool grad = false) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

// Layers of the image encoder at batch 16: {C_in, H, C_out, stride}.
void BM_Conv2dForward(benchmark::State& state) {
  Rng rng(1);
  const auto cin = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  const auto cout = static_cast<std::size_t>(state.range(2));
  const auto stride = static_cast<std::size_t>(state.range(3));
  auto x = random_tensor({16, cin, hw, hw}, rng);
  auto k = random_tensor({cout, cin, 3, 3}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, stride, 1));
}
BENCHMARK(BM_Conv2dForward)->Args({1, 64, 8, 2})->Args({8, 32, 16, 2})->Args({16, 16, 32, 1});

void BM_Conv2dBackward(benchmark::State& state) {
  Rng rng(2);
  auto x = random_tensor({16, 8, 32, 32}, rng, true);
  auto k = random_tensor({16, 8, 3, 3}, rng, true);
  for (auto _ : state) {
    auto loss = sum(conv2d(x, k, 2, 1));
    backward(loss);
    x.zero_grad();
    k.zero_grad();
  }
}
BENCHMARK(BM_Conv2dBackward);

void BM_Matmul(benchmark::State& state) {
  Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_tensor({n, n}, rng);
  auto b = random_tensor({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(4)->Range(16, 256);

void BM_ContentRandomize(benchmark::State& state) {
  Rng rng(4);
  auto m = random_tensor({16, 16, 16, 16}, rng);
  const auto perm = causal::ChannelPermutation::random(16, 16, rng);
  for (auto _ : state) benchmark::DoNotOptimize(causal::content_randomize(m, perm));
}
BENCHMARK(BM_ContentRandomize);

void BM_RenderFrame(benchmark::State& state) {
  Rng rng(5);
  const auto range = synth::StyleRange::train_default();
  synth::ContentParams c;
  for (auto _ : state) benchmark::DoNotOptimize(synth::render_frame(c, range.sample(rng), rng));
}
BENCHMARK(BM_RenderFrame);

// Forward and backward of the full objective on one batch of 16.
void BM_TrainingStep(benchmark::State& state) {
  const auto bank = model::PromptBank::builtin();
  const auto vocab = model::Vocabulary::from_bank(bank);
  model::Model net(model::init_parameters(1, vocab.size()), vocab);
  synth::DatasetSpec spec;
  spec.n_total = 40;
  const auto data = synth::sample_dataset(spec);
  std::vector<std::size_t> idx(16);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto batch = harness::make_batch(data.train, idx);
  model::StepOptions opt;
  opt.toggles = {state.range(0) != 0, state.range(1) != 0, state.range(2) != 0};
  opt.ce_trains_encoder = !opt.toggles.cta;
  Rng rng(6);
  for (auto _ : state) {
    const auto r = model::forward_training_step(net, batch, bank, opt, rng);
    backward(r.total);
    net.params().zero_grad();
  }
}
BENCHMARK(BM_TrainingStep)->Args({0, 0, 0})->Args({1, 1, 1})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
