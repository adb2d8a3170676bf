// Copyright (c) 2026, The mitoforge Authors. All rights reserved.
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

#ifndef MITOFORGE_ANNOTATION_HPP
#define MITOFORGE_ANNOTATION_HPP

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "mitoforge/geometry.hpp"

namespace mitoforge {

/// The two annotated classes: mitotic figures and look-alike hard negatives.
enum class Label { Mitosis = 0, HardNegative = 1 };

inline constexpr std::array<Label, 2> kAllLabels{Label::Mitosis, Label::HardNegative};

inline constexpr std::string_view to_string(Label label) {
  return label == Label::Mitosis ? "mitosis" : "hard_negative";
}

inline std::optional<Label> parse_label(std::string_view text) {
  if (text == "mitosis") return Label::Mitosis;
  if (text == "hard_negative") return Label::HardNegative;
  return std::nullopt;
}

inline constexpr int class_index(Label label) { return static_cast<int>(label); }

struct LabeledBox {
  BBox box;
  Label label{Label::Mitosis};

  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

/// Ground-truth box in global image coordinates.
struct Annotation {
  BBox box;
  Label label{Label::Mitosis};
  std::string image_id;

  LabeledBox labeled() const { return {box, label}; }
};

}  // namespace mitoforge

#endif  // MITOFORGE_ANNOTATION_HPP
