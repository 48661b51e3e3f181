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

#include <algorithm>
#include <cmath>
#include <vector>

#include "cimt/error.hpp"
#include "cimt/gradcheck.hpp"
#include "cimt/models.hpp"
#include "cimt/ops.hpp"
#include "cimt/synth.hpp"

using namespace cimt;
using namespace cimt::model;

namespace {

Model fresh_model(std::uint64_t seed = 3) {
  const auto bank = PromptBank::builtin();
  auto vocab = Vocabulary::from_bank(bank);
  return Model(init_parameters(seed, vocab.size()), vocab);
}

LabeledBatch synthetic_batch(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> px;
  LabeledBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    synth::ContentParams c;
    c.wall_y = rng.uniform(25.0, 45.0);
    c.im_thickness = i % 2 ? 6.0 : 2.5;
    synth::StyleParams s;
    s.gain = rng.uniform(0.8, 1.2);
    const auto f = synth::render_frame(c, s, rng);
    px.insert(px.end(), f.image.begin(), f.image.end());
    b.labels.push_back(f.label);
  }
  b.images = Tensor::from({n, 1, 64, 64}, px);
  return b;
}

bool all_zero_grad(const Tensor& t) {
  if (!t.has_grad()) return true;
  return std::all_of(t.grad().begin(), t.grad().end(), [](double g) { return g == 0.0; });
}

bool any_nonzero_grad(const std::vector<Tensor>& ts) {
  for (const auto& t : ts) {
    if (!all_zero_grad(t)) return true;
  }
  return false;
}

}  // namespace

TEST(PromptBank, BuiltinAndJson) {
  const auto bank = PromptBank::builtin();
  EXPECT_EQ(bank.indices_of(0).size(), 8u);
  EXPECT_EQ(bank.indices_of(1).size(), 8u);
  const auto again = PromptBank::from_json(bank.to_json());
  ASSERT_EQ(again.size(), bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    EXPECT_EQ(again.entries()[i].label, bank.entries()[i].label);
    EXPECT_EQ(again.entries()[i].text, bank.entries()[i].text);
  }
  EXPECT_THROW(PromptBank::from_json(R"([{"class": "thickening", "text": "a"}])"),
               ValidationError);
  EXPECT_THROW(PromptBank::from_json(R"([{"class": "other", "text": "a"}])"), ValidationError);
  EXPECT_THROW(PromptBank::from_json(
                   R"([{"class": "thickening", "text": " "}, {"class": "non_thickening", "text": "b"}])"),
               ValidationError);
}

TEST(Vocabulary, TokenizeAndOov) {
  EXPECT_EQ(tokenize("Thick, bright-echo  Wall."),
            (std::vector<std::string>{"thick", "bright", "echo", "wall"}));
  PromptBank bank({{0, "thin smooth wall"}, {1, "thick wall"}});
  const auto vocab = Vocabulary::from_bank(bank);
  EXPECT_EQ(vocab.size(), 5u);
  EXPECT_EQ(vocab.index("zebra"), Vocabulary::kOov);
  EXPECT_NE(vocab.index("wall"), Vocabulary::kOov);
  EXPECT_EQ(vocab.encode("?!"), (std::vector<std::size_t>{Vocabulary::kOov}));
}

TEST(InitParameters, Contract) {
  const auto a = init_parameters(5, 40), b = init_parameters(5, 40), c = init_parameters(6, 40);
  bool differs = false;
  for (std::size_t i = 0; i < a.items().size(); ++i) {
    const auto& name = a.items()[i].name;
    const auto va = a.items()[i].tensor.values(), vb = b.items()[i].tensor.values();
    EXPECT_TRUE(std::equal(va.begin(), va.end(), vb.begin()));
    const auto vc = c.items()[i].tensor.values();
    differs = differs || !std::equal(va.begin(), va.end(), vc.begin());
    if (name.ends_with(".bias")) {
      for (double v : va) EXPECT_EQ(v, 0.0) << name;
    }
  }
  EXPECT_TRUE(differs);
  // Glorot bound of the first conv: fan_in 9, fan_out 72.
  const double bound = std::sqrt(6.0 / 81.0);
  for (double v : a.get("enc.conv1.weight").values()) EXPECT_LE(std::abs(v), bound);
}

TEST(Encoder, ShapesAndZeroPropagation) {
  auto net = fresh_model();
  const auto enc = net.encode_image(Tensor::zeros({2, 1, 64, 64}));
  EXPECT_EQ(enc.map.shape(), (Shape{2, 16, 16, 16}));
  EXPECT_EQ(enc.feature.shape(), (Shape{2, 64}));
  for (double v : enc.map.values()) EXPECT_EQ(v, 0.0);
  for (double v : enc.feature.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(net.encode_image(Tensor::zeros({1, 1, 32, 32})), ShapeError);
}

TEST(Encoder, HookComposition) {
  auto net = fresh_model();
  const auto batch = synthetic_batch(3, 1);
  const auto enc = net.encode_image(batch.images);
  const auto f = net.encode_from_map(net.stem(batch.images));
  for (std::size_t i = 0; i < f.numel(); ++i) EXPECT_EQ(f[i], enc.feature[i]);

  // Identical images give identical rows, up to summation order in the
  // vectorized kernels.
  std::vector<double> px(batch.images.values().begin(), batch.images.values().begin() + 4096);
  px.insert(px.end(), px.begin(), px.end());
  const auto dup = net.encode_image(Tensor::from({2, 1, 64, 64}, px)).feature;
  for (std::size_t k = 0; k < 64; ++k) EXPECT_NEAR(dup[k], dup[64 + k], 1e-12);
}

TEST(Classifier, ZeroWeightsGiveUniform) {
  auto net = fresh_model();
  for (auto& p : net.params().items()) {
    if (p.name.starts_with("cls.")) std::fill(p.tensor.mutable_values().begin(), p.tensor.mutable_values().end(), 0.0);
  }
  Rng rng(2);
  std::vector<double> f(3 * 64);
  for (auto& x : f) x = rng.uniform(-5.0, 5.0);
  const auto p = net.classify(Tensor::from({3, 64}, f));
  for (double v : p.values()) EXPECT_EQ(v, 0.5);
  EXPECT_THROW(net.classify(Tensor::zeros({3, 32})), ShapeError);
}

TEST(Classifier, RowsSumToOne) {
  auto net = fresh_model();
  const auto p = net.classify(net.encode_image(synthetic_batch(4, 3).images).feature);
  for (std::size_t n = 0; n < 4; ++n) EXPECT_NEAR(p[2 * n] + p[2 * n + 1], 1.0, 1e-12);
}

TEST(TextEncoder, UnitNormAndPooling) {
  auto net = fresh_model();
  const auto bank = PromptBank::builtin();
  const auto e = net.encode_text(bank.entries()[0].text);
  double sq = 0.0;
  for (double v : e.values()) sq += v * v;
  EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-10);
  const auto a = net.encode_text("thickened wall"), b = net.encode_text("wall thickened");
  for (std::size_t k = 0; k < 64; ++k) EXPECT_EQ(a[k], b[k]);
  const auto again = net.encode_text(bank.entries()[0].text);
  for (std::size_t k = 0; k < 64; ++k) EXPECT_EQ(e[k], again[k]);
  const auto all = net.encode_prompts(bank);
  EXPECT_EQ(all.shape(), (Shape{16, 64}));
  for (std::size_t k = 0; k < 64; ++k) EXPECT_NEAR(all[k], e[k], 1e-15);
}

TEST(TrainingStep, AllTogglesOffIsWeightedCe) {
  auto net = fresh_model();
  const auto bank = PromptBank::builtin();
  StepOptions opt;
  opt.toggles = {false, false, false};
  Rng rng(4);
  const auto r = forward_training_step(net, synthetic_batch(4, 5), bank, opt, rng);
  EXPECT_EQ(r.breakdown.l_itcl, 0.0);
  EXPECT_EQ(r.breakdown.l_cl, 0.0);
  EXPECT_EQ(r.breakdown.l_adv, 0.0);
  EXPECT_NEAR(r.breakdown.total, 0.1 * r.breakdown.l_ce, 1e-15);
}

TEST(TrainingStep, LambdaOneGivesZeroConsistency) {
  auto net = fresh_model();
  StepOptions opt;
  opt.toggles = {true, false, false};
  StepOverrides ov;
  ov.lambda = std::vector<double>(4, 1.0);
  Rng rng(5);
  const auto r = forward_training_step(net, synthetic_batch(4, 6), PromptBank::builtin(), opt, rng, ov);
  EXPECT_NEAR(r.breakdown.l_cl, 0.0, 1e-12);
}

TEST(TrainingStep, IdentityPermutationAdversarial) {
  auto net = fresh_model();
  StepOptions opt;
  opt.toggles = {false, true, false};
  StepOverrides ov;
  ov.identity_permutations = true;
  Rng rng(6);
  const auto r =
      forward_training_step(net, synthetic_batch(4, 7), PromptBank::builtin(), opt, rng, ov);
  EXPECT_NEAR(r.breakdown.l_adv, loss::adversarial_uniform_loss(r.probs).item(), 1e-12);
}

TEST(TrainingStep, RequiresPairs) {
  auto net = fresh_model();
  StepOptions opt;
  opt.toggles = {true, false, false};
  Rng rng(7);
  EXPECT_THROW(forward_training_step(net, synthetic_batch(1, 8), PromptBank::builtin(), opt, rng),
               ValidationError);
}

// For each term, parameters outside its routing set receive bitwise-zero
// gradient, and parameters inside it receive some.
TEST(TrainingStep, RoutingAudit) {
  const auto bank = PromptBank::builtin();
  for (bool widen : {false, true}) {
    auto net = fresh_model();
    StepOptions opt;
    opt.ce_trains_encoder = widen;
    Rng rng(8);
    const auto r = forward_training_step(net, synthetic_batch(4, 9), bank, opt, rng);
    const auto table = loss::routing(widen);
    const std::pair<const Tensor*, const std::vector<loss::ParamGroup>*> terms[] = {
        {&r.terms.itcl, &table.itcl}, {&r.terms.cl, &table.cl},
        {&r.terms.ce, &table.ce}, {&r.terms.adv, &table.adv}};
    for (const auto& [term, groups] : terms) {
      net.params().zero_grad();
      backward(*term);
      for (auto g : {loss::ParamGroup::image_encoder, loss::ParamGroup::classifier,
                     loss::ParamGroup::text_encoder}) {
        const bool allowed = std::find(groups->begin(), groups->end(), g) != groups->end();
        const auto params = net.params().group(g);
        if (allowed) {
          EXPECT_TRUE(any_nonzero_grad(params)) << static_cast<int>(g);
        } else {
          for (const auto& t : params) EXPECT_TRUE(all_zero_grad(t)) << static_cast<int>(g);
        }
      }
    }
  }
}

TEST(TrainingStep, DisabledTogglesContributeNothing) {
  const auto bank = PromptBank::builtin();
  auto net = fresh_model();
  StepOptions opt;
  opt.toggles = {true, false, false};
  Rng rng(9);
  const auto r = forward_training_step(net, synthetic_batch(4, 10), bank, opt, rng);
  net.params().zero_grad();
  backward(r.total);
  for (const auto& t : net.params().group(loss::ParamGroup::text_encoder)) {
    EXPECT_TRUE(all_zero_grad(t));
  }
}

TEST(TrainingStep, GradCheckTwoSamples) {
  const auto bank = PromptBank::builtin();
  auto net = fresh_model(11);
  // Keep every ReLU away from its kink at the probe point; conv1 also
  // absorbs the input gain.
  for (auto& p : net.params().items()) {
    if (p.name.starts_with("enc.conv")) {
      auto v = p.tensor.mutable_values();
      if (p.name.ends_with(".weight")) {
        for (auto& x : v) x *= p.name == "enc.conv1.weight" ? 0.25 / kInputGain : 0.25;
      } else {
        Rng rng(12);
        for (auto& x : v) x = rng.uniform(1.0, 2.0);
      }
    }
  }
  const auto batch = synthetic_batch(2, 13);
  StepOptions opt;
  GradCheckOptions gc;
  gc.method = GradCheckOptions::Method::ridders;
  gc.step = 1e-3;
  gc.max_entries_per_param = 6;
  auto fn = [&] {
    Rng rng(14);
    return forward_training_step(net, batch, bank, opt, rng).total;
  };
  const auto r = grad_check(fn, net.params().tensors(), gc);
  EXPECT_LT(r.max_rel_error, 1e-5) << net.params().items()[r.worst_param].name << '['
                                   << r.worst_index << ']';
}
