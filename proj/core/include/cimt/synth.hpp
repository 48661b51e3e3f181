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

#pragma once

// Ultrasound-like carotid frames with observable content and style factors.
//
// Content (wall geometry, intima-media thickness) alone determines the label;
// style (gain, offset, gamma, speckle, blur) is drawn independently, so any
// dependence of a classifier on style is spurious by construction.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cimt/rng.hpp"

namespace cimt::synth {

inline constexpr std::size_t kFrameSize = 64;
inline constexpr double kThicknessThreshold = 4.5;

inline constexpr double kLumenIntensity = 0.05;
inline constexpr double kTissueIntensity = 0.35;
inline constexpr double kInterfaceIntensity = 0.9;
inline constexpr double kLumenHeight = 14.0;
inline constexpr double kBifurcationDegrees = 15.0;

struct ContentParams {
  double wall_y = 35.0;        // far wall position [20, 50]
  double im_thickness = 3.0;   // interface separation [1, 8]
  double curvature = 0.0;      // bow amplitude [0, 4]
  bool bifurcation = false;

  void validate() const;
};

struct StyleParams {
  double gain = 1.0;        // [0.5, 1.8]; the renderer also accepts [0, 0.5)
  double bias = 0.0;        // [-0.15, 0.15]
  double gamma = 1.0;       // [0.6, 1.6]
  double speckle = 0.0;     // [0, 0.5]
  double blur_sigma = 0.0;  // [0, 1.5]

  void validate() const;
};

int label_for(double im_thickness);

struct SynthFrame {
  std::vector<double> image;  // kFrameSize * kFrameSize, row-major, in [0,1]
  int label = 0;
  ContentParams content;
  StyleParams style;
};

// Closed intervals per style parameter, each inside the StyleParams ranges.
struct StyleRange {
  std::array<double, 2> gain{0.5, 1.8};
  std::array<double, 2> bias{-0.15, 0.15};
  std::array<double, 2> gamma{0.6, 1.6};
  std::array<double, 2> speckle{0.0, 0.5};
  std::array<double, 2> blur_sigma{0.0, 1.5};

  void validate() const;
  StyleParams sample(Rng& rng) const;
  StyleParams clip(StyleParams s) const;

  static StyleRange train_default();
  static StyleRange shifted_default();
};

struct DatasetSpec {
  std::size_t n_total = 600;
  double positive_fraction = 0.2;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  double test_fraction = 0.2;
  StyleRange train_range = StyleRange::train_default();
  StyleRange shifted_range = StyleRange::shifted_default();
  std::uint64_t seed = 1;
  bool sequence_mode = false;
  std::size_t frames_per_video = 32;
  double style_drift = 0.02;

  void validate() const;
};

struct Dataset {
  std::vector<SynthFrame> train;
  std::vector<SynthFrame> val;
  std::vector<SynthFrame> test;
  std::vector<SynthFrame> shifted_test;
};

// Draws the speckle field from `rng`; everything else is a pure function of
// (content, style).
SynthFrame render_frame(const ContentParams& content, const StyleParams& style, Rng& rng);

// Largest-remainder apportionment of `total` by `fractions`.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& fractions);

Dataset sample_dataset(const DatasetSpec& spec);

// One simulated sweep: slowly drifting content, random-walk style.
std::vector<SynthFrame> sample_video(const DatasetSpec& spec, Rng& rng);

// ---- export -------------------------------------------------------------
//
// SYNTHv1 <count> 64 64
// label <int> im <real> gain <real> gamma <real>
// <64 lines of 64 reals>

struct FrameRecord {
  int label = 0;
  double im_thickness = 0.0;
  double gain = 0.0;
  double gamma = 0.0;
  std::vector<double> image;

  bool operator==(const FrameRecord&) const = default;
};

FrameRecord to_record(const SynthFrame& frame);
void write_split(std::ostream& out, const std::vector<SynthFrame>& frames);
void write_split(const std::string& path, const std::vector<SynthFrame>& frames);
std::vector<FrameRecord> read_split(std::istream& in);
std::vector<FrameRecord> read_split(const std::string& path);

}  // namespace cimt::synth
