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

#include <algorithm>
#include <cctype>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cimt/error.hpp"
#include "cimt/models.hpp"

namespace cimt::model {

namespace {

constexpr const char* kThickening = "thickening";
constexpr const char* kNonThickening = "non_thickening";

const char* class_name(int label) { return label == 1 ? kThickening : kNonThickening; }

}  // namespace

PromptBank::PromptBank(std::vector<PromptEntry> entries) : entries_(std::move(entries)) {
  bool seen[2] = {false, false};
  for (const auto& e : entries_) {
    if (e.label != 0 && e.label != 1) throw ValidationError("prompt label must be 0 or 1");
    if (tokenize(e.text).empty()) throw ValidationError("prompt text has no tokens");
    seen[e.label] = true;
  }
  if (!seen[0] || !seen[1]) {
    throw ValidationError("prompt bank needs at least one prompt per class");
  }
}

PromptBank PromptBank::from_json(std::string_view json) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("prompt bank is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ValidationError("prompt bank must be a JSON array");
  std::vector<PromptEntry> entries;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("class") || !item.contains("text") ||
        !item["class"].is_string() || !item["text"].is_string()) {
      throw ValidationError("prompt bank entries need string fields \"class\" and \"text\"");
    }
    const auto cls = item["class"].get<std::string>();
    PromptEntry e;
    if (cls == kThickening) {
      e.label = 1;
    } else if (cls == kNonThickening) {
      e.label = 0;
    } else {
      throw ValidationError("unknown prompt class \"" + cls + "\"");
    }
    e.text = item["text"].get<std::string>();
    entries.push_back(std::move(e));
  }
  return PromptBank(std::move(entries));
}

PromptBank PromptBank::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open prompt bank " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

PromptBank PromptBank::builtin() {
  static const char* const kThick[] = {
      "the two bright interface lines of the far wall are widely separated with a broad "
      "intima media band",
      "thickened intima media complex with a wide gap between the lumen intima and media "
      "adventitia echoes",
      "the far wall shows a broad double line pattern and the media layer is clearly widened",
      "increased distance between the inner and outer wall echoes indicating wall thickening",
      "wide hypoechoic media band bounded by two distinct bright echoes along the far wall",
      "the intima media layer is thick and the double line boundary is spread apart",
      "step one find the lumen, step two follow the wall layers, step three the wall layers "
      "are far apart",
      "broad separation of the echogenic lines near the bifurcation with a thick wall segment",
  };
  static const char* const kThin[] = {
      "the two bright interface lines of the far wall are close together with a thin intima "
      "media band",
      "normal thin intima media complex with a narrow gap between the lumen intima and media "
      "adventitia echoes",
      "the far wall shows a tight double line pattern and the media layer is thin",
      "short distance between the inner and outer wall echoes indicating no wall thickening",
      "narrow media band bounded by two closely spaced bright echoes along the far wall",
      "the intima media layer is thin and the double line boundary is compact",
      "step one find the lumen, step two follow the wall layers, step three the wall layers "
      "are close together",
      "close spacing of the echogenic lines near the bifurcation with a thin smooth wall "
      "segment",
  };
  std::vector<PromptEntry> entries;
  for (const char* t : kThin) entries.push_back({0, t});
  for (const char* t : kThick) entries.push_back({1, t});
  return PromptBank(std::move(entries));
}

std::string PromptBank::to_json() const {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& e : entries_) {
    doc.push_back({{"class", class_name(e.label)}, {"text", e.text}});
  }
  return doc.dump(2) + "\n";
}

std::vector<std::size_t> PromptBank::indices_of(int label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].label == label) out.push_back(i);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u) || std::ispunct(u)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary Vocabulary::from_bank(const PromptBank& bank) {
  Vocabulary v;
  for (const auto& e : bank.entries()) {
    for (auto& tok : tokenize(e.text)) v.tokens_.push_back(std::move(tok));
  }
  std::sort(v.tokens_.begin(), v.tokens_.end());
  v.tokens_.erase(std::unique(v.tokens_.begin(), v.tokens_.end()), v.tokens_.end());
  return v;
}

std::size_t Vocabulary::index(std::string_view token) const {
  auto it = std::lower_bound(tokens_.begin(), tokens_.end(), token);
  if (it == tokens_.end() || *it != token) return kOov;
  return static_cast<std::size_t>(it - tokens_.begin()) + 1;
}

std::vector<std::size_t> Vocabulary::encode(std::string_view text) const {
  std::vector<std::size_t> ids;
  for (const auto& tok : tokenize(text)) ids.push_back(index(tok));
  if (ids.empty()) ids.push_back(kOov);
  return ids;
}

}  // namespace cimt::model
