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

#include "cimt/gradcheck_suite.hpp"

#include <chrono>
#include <functional>
#include <string>
#include <string_view>

#include "cimt/causal.hpp"
#include "cimt/losses.hpp"
#include "cimt/models.hpp"
#include "cimt/ops.hpp"
#include "cimt/rng.hpp"
#include "cimt/synth.hpp"

namespace cimt {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Row-stochastic (N,K) constant.
Tensor random_probs(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<double> v(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += v[i * k + j] = rng.uniform(0.1, 1.0);
    for (std::size_t j = 0; j < k; ++j) v[i * k + j] /= s;
  }
  return Tensor::from({n, k}, std::move(v), true);
}

// Contracts a tensor of any shape to a scalar with fixed random weights, so
// every output entry contributes a distinct amount.
class Probe {
 public:
  explicit Probe(std::uint64_t seed) : seed_(seed) {}
  Tensor operator()(const Tensor& t) const {
    Rng rng(seed_);
    std::vector<double> w(t.numel());
    for (auto& x : w) x = rng.uniform(-1.0, 1.0);
    return sum(t * Tensor::from(t.shape(), std::move(w)));
  }

 private:
  std::uint64_t seed_;
};

GradCheckOptions default_options() {
  GradCheckOptions o;
  o.method = GradCheckOptions::Method::ridders;
  o.step = 1e-3;
  return o;
}

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : rng_(seed), probe_(Rng::derive(seed, 1)) {}

  void check(std::string name, const std::function<Tensor()>& fn, std::vector<Tensor> params,
             GradCheckOptions options = default_options()) {
    options.seed = Rng::derive(options.seed, report_.cases.size());
    report_.cases.push_back({std::move(name), grad_check(fn, std::move(params), options)});
  }

  Rng& rng() { return rng_; }
  const Probe& probe() const { return probe_; }
  GradCheckReport& report() { return report_; }

 private:
  Rng rng_;
  Probe probe_;
  GradCheckReport report_;
};

void check_ops(Suite& s) {
  auto& rng = s.rng();
  const auto& P = s.probe();

  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({3, 4}, rng);
  auto pos = random_tensor({3, 4}, rng, 0.5, 2.0);
  auto chan = random_tensor({4}, rng, 0.5, 2.0);
  auto scalar = Tensor::scalar(0.7, true);
  s.check("add", [&] { return P(a + b); }, {a, b});
  s.check("sub", [&] { return P(a - b); }, {a, b});
  s.check("mul", [&] { return P(a * b); }, {a, b});
  s.check("div", [&] { return P(a / pos); }, {a, pos});
  s.check("add_scalar_tensor", [&] { return P(a + scalar); }, {a, scalar});
  s.check("mul_channel", [&] { return P(a * chan); }, {a, chan});
  s.check("div_channel", [&] { return P(a / chan); }, {a, chan});
  s.check("pow", [&] { return P(pow(pos, 1.7)); }, {pos});
  s.check("pow_integer", [&] { return P(pow(a, 3.0)); }, {a});
  s.check("exp", [&] { return P(exp(a)); }, {a});
  s.check("log", [&] { return P(log(pos)); }, {pos});
  s.check("relu", [&] { return P(relu(a)); }, {a});
  s.check("clamp", [&] { return P(clamp(a, -0.5, 0.5)); }, {a});

  auto m = random_tensor({3, 5}, rng);
  s.check("matmul", [&] { return P(matmul(a, transpose(b))); }, {a, b});
  s.check("matmul_rect", [&] { return P(matmul(transpose(a), m)); }, {a, m});
  s.check("reshape", [&] { return P(reshape(a, {2, 6})); }, {a});
  s.check("softmax_axis1", [&] { return P(softmax(a, 1)); }, {a});
  s.check("softmax_axis0", [&] { return P(softmax(a, 0)); }, {a});
  s.check("sum", [&] { return sum(a * a); }, {a});
  s.check("mean", [&] { return mean(a * b); }, {a, b});
  s.check("normalize_rows", [&] { return P(normalize_rows(a)); }, {a});
  const std::vector<std::size_t> rows{2, 0, 2};
  s.check("select_rows", [&] { return P(select_rows(a, rows)); }, {a});
  s.check("concat_rows", [&] { return P(concat_rows({a, b})); }, {a, b});

  auto table = random_tensor({6, 4}, rng);
  const std::vector<std::vector<std::size_t>> tokens{{1, 3}, {5}, {0, 0, 2}};
  s.check("embedding_mean", [&] { return P(embedding_mean(table, tokens)); }, {table});

  auto img = random_tensor({2, 2, 6, 6}, rng);
  auto k = random_tensor({3, 2, 3, 3}, rng);
  s.check("conv2d_s1_p1", [&] { return P(conv2d(img, k, 1, 1)); }, {img, k});
  s.check("conv2d_s1_p0", [&] { return P(conv2d(img, k, 1, 0)); }, {img, k});
  auto img7 = random_tensor({2, 2, 7, 7}, rng);
  s.check("conv2d_s2_p0", [&] { return P(conv2d(img7, k, 2, 0)); }, {img7, k});
  s.check("conv2d_s2_p1", [&] { return P(conv2d(img, k, 2, 1)); }, {img, k});

  auto fm = random_tensor({2, 3, 4, 4}, rng);
  s.check("spatial_mean", [&] { return P(spatial_mean(fm)); }, {fm});
  s.check("spatial_std", [&] { return P(spatial_std(fm, 1e-5)); }, {fm});
}

void check_causal(Suite& s) {
  auto& rng = s.rng();
  const auto& P = s.probe();
  auto m = random_tensor({3, 4, 4, 4}, rng);
  auto mu = random_tensor({3, 4}, rng);
  auto sigma = random_tensor({3, 4}, rng, 0.5, 2.0);
  s.check("channel_stats", [&] {
    auto st = causal::channel_stats(m);
    return P(st.mu) + P(st.sigma);
  }, {m});
  s.check("adain", [&] { return P(causal::adain(m, {mu, sigma})); }, {m, mu, sigma});

  auto mu2 = random_tensor({3, 4}, rng);
  auto sigma2 = random_tensor({3, 4}, rng, 0.5, 2.0);
  const std::vector<double> lambda{0.2, 0.9, 0.5};
  s.check("interpolate_style", [&] {
    auto st = causal::interpolate_style({mu, sigma}, {mu2, sigma2}, lambda);
    return P(st.mu) + P(st.sigma);
  }, {mu, sigma, mu2, sigma2});

  const causal::StylePerturbMeta meta{{1, 2, 0}, {0.3, 0.6, 0.1}};
  s.check("style_perturb", [&] { return P(causal::apply_style_perturb(m, meta)); }, {m});

  const auto perm = causal::ChannelPermutation::random(3, 4, rng);
  s.check("content_randomize", [&] { return P(causal::content_randomize(m, perm)); }, {m});
  const auto ident = causal::ChannelPermutation::identity(3, 4);
  s.check("content_randomize_identity",
          [&] { return P(causal::content_randomize(m, ident)); }, {m});
}

void check_losses(Suite& s) {
  auto& rng = s.rng();
  auto p = random_probs(4, 2, rng);
  auto q = random_probs(4, 2, rng);
  const std::vector<int> labels{1, 0, 0, 1};
  s.check("kl_div", [&] { return loss::kl_div(p, q); }, {p, q});
  s.check("consistency_loss", [&] { return loss::consistency_loss(p, q); }, {p, q});
  s.check("cross_entropy", [&] { return loss::cross_entropy(p, labels); }, {p});
  s.check("adversarial_uniform", [&] { return loss::adversarial_uniform_loss(p); }, {p});

  auto f = random_tensor({1, 6}, rng);
  auto f_pos = random_tensor({1, 6}, rng);
  auto n1 = random_tensor({1, 6}, rng);
  auto n2 = random_tensor({1, 6}, rng);
  s.check("info_nce", [&] { return loss::info_nce(f, f_pos, {n1, n2}, 0.5); },
          {f, f_pos, n1, n2});

  auto sim = random_tensor({3, 5}, rng);
  const std::vector<std::size_t> positive{0, 3, 1};
  const std::vector<std::vector<std::size_t>> negatives{{1, 2}, {0, 4, 2}, {4}};
  s.check("info_nce_from_similarity",
          [&] { return loss::info_nce_from_similarity(sim, positive, negatives, 0.3); }, {sim});
  auto image = random_tensor({3, 6}, rng);
  auto prompts = random_tensor({5, 6}, rng);
  s.check("info_nce_batch",
          [&] { return loss::info_nce_batch(image, prompts, positive, negatives, 0.3); },
          {image, prompts});
}

void check_training_step(Suite& s, std::uint64_t seed) {
  // Two frames per class, rendered at fixed content so both labels appear.
  const double thickness[] = {2.0, 6.5, 3.0, 7.0};
  Rng frame_rng(Rng::derive(seed, 2));
  std::vector<double> pixels;
  model::LabeledBatch batch;
  for (double t : thickness) {
    synth::ContentParams c;
    c.wall_y = frame_rng.uniform(28.0, 42.0);
    c.im_thickness = t;
    c.curvature = frame_rng.uniform(0.0, 2.0);
    const auto style = synth::StyleRange::train_default().sample(frame_rng);
    auto frame = synth::render_frame(c, style, frame_rng);
    pixels.insert(pixels.end(), frame.image.begin(), frame.image.end());
    batch.labels.push_back(frame.label);
  }
  batch.images = Tensor::from({4, 1, model::kImageSize, model::kImageSize}, std::move(pixels));

  const auto bank = model::PromptBank::builtin();
  const auto vocab = model::Vocabulary::from_bank(bank);
  // Damped conv weights and positive biases keep every ReLU pre-activation
  // well above zero: no probe step straddles a kink, and no channel is dead,
  // which would leave gradients below finite-difference resolution.
  auto params = model::init_parameters(Rng::derive(seed, 3), vocab.size());
  Rng bias_rng(Rng::derive(seed, 4));
  for (const char* layer : {"enc.conv1", "enc.conv2", "enc.conv3"}) {
    // conv1 also absorbs the input gain.
    const double damp = std::string_view(layer) == "enc.conv1" ? 0.25 / model::kInputGain : 0.25;
    for (auto& w : params.get(std::string(layer) + ".weight").mutable_values()) w *= damp;
    for (auto& b : params.get(std::string(layer) + ".bias").mutable_values()) {
      b = bias_rng.uniform(1.0, 2.0);
    }
  }
  const model::Model net(std::move(params), vocab);

  auto options = default_options();
  options.max_entries_per_param = 20;
  for (int mask = 0; mask < 8; ++mask) {
    model::StepOptions step;
    step.toggles = {(mask & 4) != 0, (mask & 2) != 0, (mask & 1) != 0};
    step.ce_trains_encoder = !step.toggles.cta;
    const std::uint64_t step_seed = Rng::derive(seed, 10 + mask);
    auto fn = [&] {
      Rng rng(step_seed);
      return model::forward_training_step(net, batch, bank, step, rng).total;
    };
    std::string name = "training_step[sce=" + std::to_string(step.toggles.sce) +
                       ",cec=" + std::to_string(step.toggles.cec) +
                       ",cta=" + std::to_string(step.toggles.cta) + "]";
    auto opts = options;
    opts.seed = step_seed;
    s.check(std::move(name), fn, net.params().tensors(), opts);
  }
}

}  // namespace

GradCheckReport run_gradcheck_suite(std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Suite s(seed);
  check_ops(s);
  check_causal(s);
  check_losses(s);
  check_training_step(s, seed);
  auto report = std::move(s.report());
  for (const auto& c : report.cases) {
    if (c.result.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = c.result.max_rel_error;
      report.worst_case = c.name;
    }
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace cimt
