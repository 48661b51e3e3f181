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
#include <sstream>

#include "cimt/error.hpp"
#include "cimt/synth.hpp"

using namespace cimt;
using namespace cimt::synth;

namespace {

std::size_t positives(const std::vector<SynthFrame>& frames) {
  return static_cast<std::size_t>(
      std::count_if(frames.begin(), frames.end(), [](const auto& f) { return f.label == 1; }));
}

}  // namespace

TEST(Render, GainZeroGivesBias) {
  Rng rng(1);
  StyleParams s;
  s.gain = 0.0;
  s.bias = 0.1;
  const auto f = render_frame(ContentParams{}, s, rng);
  for (double v : f.image) EXPECT_DOUBLE_EQ(v, 0.1);
}

TEST(Render, CleanLumenIntensity) {
  Rng rng(2);
  ContentParams c;
  c.wall_y = 35.0;
  const auto f = render_frame(c, StyleParams{}, rng);
  // Well inside the lumen band, far from both interfaces.
  EXPECT_NEAR(f.image[25 * kFrameSize + 32], kLumenIntensity, 1e-12);
}

TEST(Render, ThresholdRule) {
  EXPECT_EQ(label_for(4.5), 1);
  EXPECT_EQ(label_for(4.4999), 0);
  Rng rng(3);
  ContentParams c;
  c.im_thickness = 4.5;
  EXPECT_EQ(render_frame(c, StyleParams{}, rng).label, 1);
}

TEST(Render, RangeAndDeterminism) {
  ContentParams c;
  c.curvature = 3.0;
  c.bifurcation = true;
  StyleParams s;
  s.gain = 1.8;
  s.speckle = 0.5;
  s.blur_sigma = 1.5;
  Rng a(4), b(4);
  const auto fa = render_frame(c, s, a), fb = render_frame(c, s, b);
  EXPECT_EQ(fa.image, fb.image);
  for (double v : fa.image) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Render, RejectsOutOfRange) {
  Rng rng(5);
  ContentParams c;
  c.im_thickness = 9.0;
  EXPECT_THROW(render_frame(c, StyleParams{}, rng), ValidationError);
  StyleParams s;
  s.gamma = 2.0;
  EXPECT_THROW(render_frame(ContentParams{}, s, rng), ValidationError);
}

TEST(Dataset, SplitSizes) {
  DatasetSpec spec;
  spec.n_total = 100;
  const auto ds = sample_dataset(spec);
  EXPECT_EQ(ds.train.size(), 60u);
  EXPECT_EQ(ds.val.size(), 20u);
  EXPECT_EQ(ds.test.size(), 20u);
  EXPECT_EQ(ds.shifted_test.size(), 20u);
  const auto pos = positives(ds.train) + positives(ds.val) + positives(ds.test);
  EXPECT_GE(pos, 19u);
  EXPECT_LE(pos, 21u);
}

TEST(Dataset, ClassBalancePerSplit) {
  DatasetSpec spec;
  spec.n_total = 137;
  spec.positive_fraction = 0.3;
  const auto ds = sample_dataset(spec);
  for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
    const double expected = 0.3 * static_cast<double>(split->size());
    EXPECT_LE(std::abs(static_cast<double>(positives(*split)) - expected), 1.0);
  }
}

TEST(Dataset, ShiftedPairing) {
  const auto ds = sample_dataset(DatasetSpec{});
  ASSERT_EQ(ds.shifted_test.size(), ds.test.size());
  const auto range = StyleRange::shifted_default();
  for (std::size_t i = 0; i < ds.test.size(); ++i) {
    const auto& a = ds.test[i].content;
    const auto& b = ds.shifted_test[i].content;
    EXPECT_EQ(a.wall_y, b.wall_y);
    EXPECT_EQ(a.im_thickness, b.im_thickness);
    EXPECT_EQ(a.curvature, b.curvature);
    EXPECT_EQ(a.bifurcation, b.bifurcation);
    EXPECT_EQ(ds.test[i].label, ds.shifted_test[i].label);
    EXPECT_GE(ds.shifted_test[i].style.gain, range.gain[0]);
    EXPECT_LE(ds.shifted_test[i].style.gain, range.gain[1]);
  }
}

TEST(Dataset, LabelFollowsContent) {
  const auto ds = sample_dataset(DatasetSpec{});
  for (const auto* split : {&ds.train, &ds.val, &ds.test, &ds.shifted_test}) {
    for (const auto& f : *split) EXPECT_EQ(f.label, label_for(f.content.im_thickness));
  }
}

TEST(Dataset, DeterministicPerSeed) {
  DatasetSpec spec;
  spec.n_total = 40;
  const auto a = sample_dataset(spec), b = sample_dataset(spec);
  for (std::size_t i = 0; i < a.train.size(); ++i) EXPECT_EQ(a.train[i].image, b.train[i].image);
  spec.seed = 2;
  const auto c = sample_dataset(spec);
  EXPECT_NE(a.train[0].image, c.train[0].image);
}

TEST(Dataset, Validation) {
  DatasetSpec spec;
  spec.n_total = 10;
  EXPECT_THROW(sample_dataset(spec), ValidationError);
  spec = DatasetSpec{};
  spec.train_fraction = 0.7;
  EXPECT_THROW(sample_dataset(spec), ValidationError);
  spec = DatasetSpec{};
  spec.shifted_range = spec.train_range;
  EXPECT_THROW(sample_dataset(spec), ValidationError);
}

TEST(Apportion, LargestRemainder) {
  EXPECT_EQ(apportion(100, {0.6, 0.2, 0.2}), (std::vector<std::size_t>{60, 20, 20}));
  EXPECT_EQ(apportion(7, {0.6, 0.2, 0.2}), (std::vector<std::size_t>{4, 2, 1}));
}

TEST(Video, DriftContract) {
  DatasetSpec spec;
  spec.sequence_mode = true;
  spec.frames_per_video = 40;
  spec.style_drift = 0.03;
  Rng rng(6);
  const auto frames = sample_video(spec, rng);
  ASSERT_EQ(frames.size(), 40u);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const auto& a = frames[i - 1].style;
    const auto& b = frames[i].style;
    const double linf = std::max({std::abs(a.gain - b.gain), std::abs(a.bias - b.bias),
                                  std::abs(a.gamma - b.gamma), std::abs(a.speckle - b.speckle),
                                  std::abs(a.blur_sigma - b.blur_sigma)});
    EXPECT_LE(linf, spec.style_drift + 1e-15);
    EXPECT_LE(std::abs(frames[i].content.im_thickness - frames[i - 1].content.im_thickness), 0.2);
    EXPECT_EQ(frames[i].label, label_for(frames[i].content.im_thickness));
  }

  spec.style_drift = 0.0;
  Rng rng2(7);
  const auto still = sample_video(spec, rng2);
  for (const auto& f : still) {
    EXPECT_EQ(f.style.gain, still[0].style.gain);
    EXPECT_EQ(f.style.gamma, still[0].style.gamma);
  }
  spec.sequence_mode = false;
  EXPECT_THROW(sample_video(spec, rng2), ValidationError);
}

TEST(Export, RoundTrip) {
  DatasetSpec spec;
  spec.n_total = 20;
  const auto ds = sample_dataset(spec);
  std::stringstream ss;
  write_split(ss, ds.train);
  const auto back = read_split(ss);
  ASSERT_EQ(back.size(), ds.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back[i], to_record(ds.train[i]));

  std::istringstream bad("SYNTHv1 1 32 32\n");
  EXPECT_THROW(read_split(bad), ValidationError);
  std::stringstream cut;
  write_split(cut, ds.val);
  const auto text = cut.str();
  std::istringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(read_split(truncated), ValidationError);
}
