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

#include "cimt/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cimt/error.hpp"

namespace cimt::synth {

namespace {

void check_range(double v, double lo, double hi, const char* name) {
  if (!(v >= lo && v <= hi)) {
    std::ostringstream os;
    os << name << " = " << v << " outside [" << lo << ", " << hi << "]";
    throw ValidationError(os.str());
  }
}

void check_interval(const std::array<double, 2>& r, double lo, double hi, const char* name) {
  if (!(r[0] <= r[1])) throw ValidationError(std::string("empty style interval for ") + name);
  check_range(r[0], lo, hi, name);
  check_range(r[1], lo, hi, name);
}

bool overlaps(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return a[0] <= b[1] && b[0] <= a[1];
}

std::uint64_t bits_of(double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, sizeof u);
  return u;
}

std::uint64_t content_seed(const ContentParams& c) {
  std::uint64_t h = 0x243F6A8885A308D3ULL;
  h = Rng::derive(h, bits_of(c.wall_y));
  h = Rng::derive(h, bits_of(c.im_thickness));
  h = Rng::derive(h, bits_of(c.curvature));
  return Rng::derive(h, c.bifurcation ? 1 : 0);
}

// Uniform [0,1) texture value for one pixel.
double hash_unit(std::uint64_t seed, std::size_t x, std::size_t y) {
  return static_cast<double>(Rng::derive(seed, y * kFrameSize + x) >> 11) * 0x1.0p-53;
}

// Blends a 1-px Gaussian interface centred at row `center` into column x.
void draw_interface(std::vector<double>& img, std::size_t x, double center) {
  const int lo = static_cast<int>(std::ceil(center - 3.0));
  const int hi = static_cast<int>(std::floor(center + 3.0));
  for (int y = std::max(lo, 0); y <= std::min(hi, static_cast<int>(kFrameSize) - 1); ++y) {
    const double d = y - center;
    const double w = std::exp(-0.5 * d * d);
    double& px = img[static_cast<std::size_t>(y) * kFrameSize + x];
    px += (kInterfaceIntensity - px) * w;
  }
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[i + radius];
  }
  for (auto& v : k) v /= total;
  return k;
}

void blur(std::vector<double>& img, double sigma) {
  if (sigma <= 0.0) return;
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int n = static_cast<int>(kFrameSize);
  std::vector<double> tmp(img.size());
  // Separable, clamp-to-edge.
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        s += k[i + radius] * img[y * n + std::clamp(x + i, 0, n - 1)];
      }
      tmp[y * n + x] = s;
    }
  }
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        s += k[i + radius] * tmp[std::clamp(y + i, 0, n - 1) * n + x];
      }
      img[y * n + x] = s;
    }
  }
}

ContentParams sample_content(Rng& rng, int label) {
  ContentParams c;
  c.wall_y = rng.uniform(20.0, 50.0);
  c.im_thickness = label == 1 ? rng.uniform(kThicknessThreshold, 8.0)
                              : rng.uniform(1.0, kThicknessThreshold);
  c.curvature = rng.uniform(0.0, 4.0);
  c.bifurcation = rng.uniform() < 0.3;
  return c;
}

}  // namespace

void ContentParams::validate() const {
  check_range(wall_y, 20.0, 50.0, "wall_y");
  check_range(im_thickness, 1.0, 8.0, "im_thickness");
  check_range(curvature, 0.0, 4.0, "curvature");
}

void StyleParams::validate() const {
  check_range(gain, 0.0, 1.8, "gain");
  check_range(bias, -0.15, 0.15, "bias");
  check_range(gamma, 0.6, 1.6, "gamma");
  check_range(speckle, 0.0, 0.5, "speckle");
  check_range(blur_sigma, 0.0, 1.5, "blur_sigma");
}

int label_for(double im_thickness) { return im_thickness >= kThicknessThreshold ? 1 : 0; }

void StyleRange::validate() const {
  check_interval(gain, 0.5, 1.8, "gain");
  check_interval(bias, -0.15, 0.15, "bias");
  check_interval(gamma, 0.6, 1.6, "gamma");
  check_interval(speckle, 0.0, 0.5, "speckle");
  check_interval(blur_sigma, 0.0, 1.5, "blur_sigma");
}

StyleParams StyleRange::sample(Rng& rng) const {
  StyleParams s;
  s.gain = rng.uniform(gain[0], gain[1]);
  s.bias = rng.uniform(bias[0], bias[1]);
  s.gamma = rng.uniform(gamma[0], gamma[1]);
  s.speckle = rng.uniform(speckle[0], speckle[1]);
  s.blur_sigma = rng.uniform(blur_sigma[0], blur_sigma[1]);
  return s;
}

StyleParams StyleRange::clip(StyleParams s) const {
  s.gain = std::clamp(s.gain, gain[0], gain[1]);
  s.bias = std::clamp(s.bias, bias[0], bias[1]);
  s.gamma = std::clamp(s.gamma, gamma[0], gamma[1]);
  s.speckle = std::clamp(s.speckle, speckle[0], speckle[1]);
  s.blur_sigma = std::clamp(s.blur_sigma, blur_sigma[0], blur_sigma[1]);
  return s;
}

StyleRange StyleRange::train_default() {
  StyleRange r;
  r.gain = {0.8, 1.2};
  r.bias = {-0.05, 0.05};
  r.gamma = {0.8, 1.25};
  r.speckle = {0.0, 0.3};
  r.blur_sigma = {0.0, 1.0};
  return r;
}

StyleRange StyleRange::shifted_default() {
  StyleRange r;
  r.gain = {1.4, 1.8};
  r.bias = {-0.05, 0.05};
  r.gamma = {0.6, 0.75};
  r.speckle = {0.0, 0.3};
  r.blur_sigma = {0.0, 1.0};
  return r;
}

void DatasetSpec::validate() const {
  if (n_total < 20) throw ValidationError("n_total must be at least 20");
  check_range(positive_fraction, 0.0, 1.0, "positive_fraction");
  for (double f : {train_fraction, val_fraction, test_fraction}) {
    check_range(f, 0.0, 1.0, "split fraction");
  }
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    throw ValidationError("split fractions must sum to 1");
  }
  train_range.validate();
  shifted_range.validate();
  if (overlaps(train_range.gain, shifted_range.gain) ||
      overlaps(train_range.gamma, shifted_range.gamma)) {
    throw ValidationError("shifted style range must be disjoint from the training range in "
                          "gain and gamma");
  }
  if (sequence_mode) {
    if (frames_per_video < 1) throw ValidationError("frames_per_video must be >= 1");
    if (!(style_drift >= 0.0)) throw ValidationError("style_drift must be >= 0");
  }
}

SynthFrame render_frame(const ContentParams& content, const StyleParams& style, Rng& rng) {
  content.validate();
  style.validate();
  constexpr std::size_t n = kFrameSize;
  SynthFrame frame;
  frame.content = content;
  frame.style = style;
  frame.label = label_for(content.im_thickness);
  auto& img = frame.image;
  img.resize(n * n);

  const auto seed = content_seed(content);
  const double slope = std::tan(kBifurcationDegrees * std::numbers::pi / 180.0);
  const double branch_x0 = static_cast<double>(n) / 2.0;
  for (std::size_t x = 0; x < n; ++x) {
    const double wall = content.wall_y +
                        content.curvature * std::sin(std::numbers::pi * static_cast<double>(x) /
                                                     static_cast<double>(n - 1));
    for (std::size_t y = 0; y < n; ++y) {
      const double yy = static_cast<double>(y);
      img[y * n + x] = (yy >= wall - kLumenHeight && yy < wall)
                           ? kLumenIntensity
                           : kTissueIntensity + 0.1 * (hash_unit(seed, x, y) - 0.5);
    }
    draw_interface(img, x, wall);
    draw_interface(img, x, wall + content.im_thickness);
    if (content.bifurcation && static_cast<double>(x) > branch_x0) {
      const double branch = wall + (static_cast<double>(x) - branch_x0) * slope;
      draw_interface(img, x, branch);
      draw_interface(img, x, branch + content.im_thickness);
    }
  }

  blur(img, style.blur_sigma);
  const double rayleigh_mean = std::sqrt(std::numbers::pi / 2.0);
  for (auto& v : img) {
    v = std::pow(std::max(v, 0.0), style.gamma);
    v = v * style.gain + style.bias;
    if (style.speckle > 0.0) v *= 1.0 + style.speckle * (rng.rayleigh() - rayleigh_mean);
    v = std::clamp(v, 0.0, 1.0);
  }
  return frame;
}

std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& fractions) {
  std::vector<std::size_t> counts(fractions.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t used = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = fractions[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    used += counts[i];
    rema.emplace_back(exact - static_cast<double>(counts[i]), i);
  }
  // Largest remainder first; ties go to the earlier index.
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < total && k < rema.size(); ++k, ++used) {
    ++counts[rema[k].second];
  }
  return counts;
}

Dataset sample_dataset(const DatasetSpec& spec) {
  spec.validate();
  const std::vector<double> fractions{spec.train_fraction, spec.val_fraction,
                                      spec.test_fraction};
  const auto sizes = apportion(spec.n_total, fractions);
  const auto n_pos = static_cast<std::size_t>(
      std::llround(spec.positive_fraction * static_cast<double>(spec.n_total)));
  const auto pos_split = apportion(n_pos, fractions);
  for (std::size_t s = 0; s < 3; ++s) {
    if (pos_split[s] > sizes[s]) throw ValidationError("infeasible positive fraction");
  }

  Dataset ds;
  std::vector<SynthFrame>* splits[3] = {&ds.train, &ds.val, &ds.test};
  std::uint64_t frame_index = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<int> labels(sizes[s], 0);
    std::fill_n(labels.begin(), pos_split[s], 1);
    Rng order(Rng::derive(spec.seed, 0xA11CE000ULL + s));
    order.shuffle(labels);
    for (int y : labels) {
      Rng rng(Rng::derive(spec.seed, frame_index++));
      const auto content = sample_content(rng, y);
      const auto style = spec.train_range.sample(rng);
      splits[s]->push_back(render_frame(content, style, rng));
    }
  }
  for (std::size_t i = 0; i < ds.test.size(); ++i) {
    Rng rng(Rng::derive(spec.seed, 0x5A1F7ED00000ULL + i));
    const auto style = spec.shifted_range.sample(rng);
    ds.shifted_test.push_back(render_frame(ds.test[i].content, style, rng));
  }
  return ds;
}

std::vector<SynthFrame> sample_video(const DatasetSpec& spec, Rng& rng) {
  if (!spec.sequence_mode) throw ValidationError("sample_video requires sequence_mode");
  spec.validate();
  constexpr double kContentDrift = 0.2;
  ContentParams content = sample_content(rng, rng.uniform() < spec.positive_fraction ? 1 : 0);
  StyleParams style = spec.train_range.sample(rng);
  const double d = spec.style_drift;
  std::vector<SynthFrame> frames;
  frames.reserve(spec.frames_per_video);
  for (std::size_t f = 0; f < spec.frames_per_video; ++f) {
    if (f > 0) {
      content.wall_y = std::clamp(content.wall_y + rng.uniform(-kContentDrift, kContentDrift),
                                  20.0, 50.0);
      content.im_thickness = std::clamp(
          content.im_thickness + rng.uniform(-kContentDrift, kContentDrift), 1.0, 8.0);
      style.gain += rng.uniform(-d, d);
      style.bias += rng.uniform(-d, d);
      style.gamma += rng.uniform(-d, d);
      style.speckle += rng.uniform(-d, d);
      style.blur_sigma += rng.uniform(-d, d);
      style = spec.train_range.clip(style);
    }
    frames.push_back(render_frame(content, style, rng));
  }
  return frames;
}

// ---- export -------------------------------------------------------------

namespace {

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_real(const std::string& tok) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ValidationError("malformed real \"" + tok + "\" in dataset export");
  }
  return v;
}

void expect_token(std::istream& in, const char* want) {
  std::string tok;
  if (!(in >> tok) || tok != want) {
    throw ValidationError(std::string("dataset export: expected \"") + want + "\"");
  }
}

std::string next_token(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw ValidationError("dataset export truncated");
  return tok;
}

}  // namespace

FrameRecord to_record(const SynthFrame& frame) {
  return {frame.label, frame.content.im_thickness, frame.style.gain, frame.style.gamma,
          frame.image};
}

void write_split(std::ostream& out, const std::vector<SynthFrame>& frames) {
  out << "SYNTHv1 " << frames.size() << ' ' << kFrameSize << ' ' << kFrameSize << '\n';
  for (const auto& f : frames) {
    out << "label " << f.label << " im " << format_real(f.content.im_thickness) << " gain "
        << format_real(f.style.gain) << " gamma " << format_real(f.style.gamma) << '\n';
    for (std::size_t y = 0; y < kFrameSize; ++y) {
      for (std::size_t x = 0; x < kFrameSize; ++x) {
        if (x) out << ' ';
        out << format_real(f.image[y * kFrameSize + x]);
      }
      out << '\n';
    }
  }
}

void write_split(const std::string& path, const std::vector<SynthFrame>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_split(out, frames);
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::vector<FrameRecord> read_split(std::istream& in) {
  expect_token(in, "SYNTHv1");
  const auto count = std::stoull(next_token(in));
  const auto h = std::stoull(next_token(in));
  const auto w = std::stoull(next_token(in));
  if (h != kFrameSize || w != kFrameSize) {
    throw ValidationError("dataset export has unsupported frame size");
  }
  std::vector<FrameRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    FrameRecord r;
    expect_token(in, "label");
    r.label = std::stoi(next_token(in));
    expect_token(in, "im");
    r.im_thickness = parse_real(next_token(in));
    expect_token(in, "gain");
    r.gain = parse_real(next_token(in));
    expect_token(in, "gamma");
    r.gamma = parse_real(next_token(in));
    r.image.resize(h * w);
    for (auto& v : r.image) v = parse_real(next_token(in));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<FrameRecord> read_split(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset export " + path);
  return read_split(in);
}

}  // namespace cimt::synth
