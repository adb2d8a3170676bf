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

// JSON documents exchanged with other tools.
//
//   annotation file  {"image_id", "width", "height",
//                     "annotations": [{"bbox": [x0,y0,x1,y1], "label"}]}
//   detection file   {"image_id", "detections": [{"bbox", "label", "score"}],
//                     optional "origin": [x,y] for tile-local boxes}
//   patch manifest   JSON lines, {"image_id", "origin", "tile_size", "file",
//                     "annotations"}
//   stain basis      {"stain_vectors": [[r0,r1],[g0,g1],[b0,b1]],
//                     "max_concentrations": [c0,c1], "io"}
//
// Annotation and detection files may hold one object, an array of objects,
// or one object per line.

#ifndef MITOFORGE_FORMATS_HPP
#define MITOFORGE_FORMATS_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mitoforge/annotation.hpp"
#include "mitoforge/cascade.hpp"
#include "mitoforge/eval.hpp"
#include "mitoforge/stain.hpp"
#include "mitoforge/tiling.hpp"

namespace mitoforge {

using Json = nlohmann::json;

struct AnnotatedImage {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Annotation> annotations;
};

struct DetectionSet {
  std::string image_id;
  std::optional<Origin> origin;
  std::vector<Detection> detections;
};

/// Parses a whole document that is a JSON value, an array, or JSON lines.
std::vector<Json> parse_documents(const std::string& text, const std::string& source);

AnnotatedImage annotated_image_from_json(const Json& j, const std::string& path = "");
Json to_json(const AnnotatedImage& image);
std::vector<AnnotatedImage> load_annotation_file(const std::filesystem::path& path);

DetectionSet detection_set_from_json(const Json& j, const std::string& path = "");
Json to_json(const DetectionSet& set);
std::vector<DetectionSet> load_detection_file(const std::filesystem::path& path);

Json to_json(const PatchRecord& record);
PatchRecord patch_record_from_json(const Json& j, const std::string& path = "");
/// One compact JSON object per line, in record order.
std::string to_manifest(const std::vector<PatchRecord>& records);
std::vector<PatchRecord> load_manifest(const std::filesystem::path& path);

Json to_json(const StainBasis& basis);
StainBasis stain_basis_from_json(const Json& j);
StainBasis load_stain_basis(const std::filesystem::path& path);
void save_stain_basis(const std::filesystem::path& path, const StainBasis& basis);

/// {"stages": [{"positives", "negatives", "sampled_positives", "mean_pos_iou"}]}
Json to_json(const CascadeReport& report);

/// {"per_class": {label: {"precision", "recall", "f1", "ap", ...}}, "mean_f1"}
Json to_json(const EvalReport& report);

/// Pretty-printed with a trailing newline.
std::string dump(const Json& j);

}  // namespace mitoforge

#endif  // MITOFORGE_FORMATS_HPP
