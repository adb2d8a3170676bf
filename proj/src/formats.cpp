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

#include "mitoforge/formats.hpp"

#include <sstream>

#include "mitoforge/fs_util.hpp"

namespace mitoforge {

namespace {

const Json& member(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "/" + key, "missing required field");
  return *it;
}

std::string get_string(const Json& j, const char* key, const std::string& path) {
  const Json& v = member(j, key, path);
  if (!v.is_string()) throw SchemaError(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

double get_number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  return v.get<double>();
}

int get_int(const Json& j, const char* key, const std::string& path) {
  const Json& v = member(j, key, path);
  if (!v.is_number_integer()) throw SchemaError(path + "/" + key, "expected an integer");
  return v.get<int>();
}

BBox get_bbox(const Json& j, const std::string& path) {
  const Json& v = member(j, "bbox", path);
  const std::string p = path + "/bbox";
  if (!v.is_array() || v.size() != 4) throw SchemaError(p, "expected [x_min, y_min, x_max, y_max]");
  BBox b{get_number(v[0], p + "/0"), get_number(v[1], p + "/1"), get_number(v[2], p + "/2"),
         get_number(v[3], p + "/3")};
  if (!b.valid()) throw SchemaError(p, "box must satisfy x_min < x_max and y_min < y_max");
  return b;
}

Label get_label(const Json& j, const std::string& path) {
  const std::string text = get_string(j, "label", path);
  const auto label = parse_label(text);
  if (!label) {
    throw SchemaError(path + "/label",
                      "unknown label \"" + text + "\" (expected \"mitosis\" or \"hard_negative\")");
  }
  return *label;
}

Origin get_origin(const Json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    throw SchemaError(path, "expected integer pair [x, y]");
  }
  return {v[0].get<int>(), v[1].get<int>()};
}

Json bbox_json(const BBox& b) { return Json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

const Json& array_member(const Json& j, const char* key, const std::string& path) {
  const Json& v = member(j, key, path);
  if (!v.is_array()) throw SchemaError(path + "/" + key, "expected an array");
  return v;
}

}  // namespace

std::vector<Json> parse_documents(const std::string& text, const std::string& source) {
  std::vector<Json> docs;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return docs;
  Json whole = Json::parse(text, nullptr, false);
  if (!whole.is_discarded()) {
    if (whole.is_array()) {
      for (auto& item : whole) docs.push_back(std::move(item));
    } else {
      docs.push_back(std::move(whole));
    }
    return docs;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json doc = Json::parse(line, nullptr, false);
    if (doc.is_discarded()) {
      throw SchemaError(source + ":" + std::to_string(line_no), "invalid JSON");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

AnnotatedImage annotated_image_from_json(const Json& j, const std::string& path) {
  AnnotatedImage img;
  img.image_id = get_string(j, "image_id", path);
  img.width = get_int(j, "width", path);
  img.height = get_int(j, "height", path);
  if (img.width <= 0 || img.height <= 0) throw SchemaError(path, "width and height must be positive");
  const Json& anns = array_member(j, "annotations", path);
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string p = path + "/annotations/" + std::to_string(i);
    img.annotations.push_back({get_bbox(anns[i], p), get_label(anns[i], p), img.image_id});
  }
  return img;
}

Json to_json(const AnnotatedImage& image) {
  Json anns = Json::array();
  for (const Annotation& a : image.annotations) {
    anns.push_back({{"bbox", bbox_json(a.box)}, {"label", to_string(a.label)}});
  }
  return {{"image_id", image.image_id},
          {"width", image.width},
          {"height", image.height},
          {"annotations", std::move(anns)}};
}

std::vector<AnnotatedImage> load_annotation_file(const std::filesystem::path& path) {
  const auto docs = parse_documents(read_text_file(path), path.string());
  std::vector<AnnotatedImage> out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    out.push_back(annotated_image_from_json(
        docs[i], path.string() + (docs.size() > 1 ? ":/" + std::to_string(i) : ":")));
  }
  return out;
}

DetectionSet detection_set_from_json(const Json& j, const std::string& path) {
  DetectionSet set;
  set.image_id = get_string(j, "image_id", path);
  if (const auto it = j.find("origin"); it != j.end()) set.origin = get_origin(*it, path + "/origin");
  const Json& dets = array_member(j, "detections", path);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const std::string p = path + "/detections/" + std::to_string(i);
    const double score = get_number(member(dets[i], "score", p), p + "/score");
    if (!(score >= 0.0 && score <= 1.0)) throw SchemaError(p + "/score", "score must lie in [0, 1]");
    set.detections.push_back({get_bbox(dets[i], p), get_label(dets[i], p), score, set.image_id});
  }
  return set;
}

Json to_json(const DetectionSet& set) {
  Json dets = Json::array();
  for (const Detection& d : set.detections) {
    dets.push_back({{"bbox", bbox_json(d.box)}, {"label", to_string(d.label)}, {"score", d.score}});
  }
  Json j{{"image_id", set.image_id}, {"detections", std::move(dets)}};
  if (set.origin) j["origin"] = Json::array({set.origin->x, set.origin->y});
  return j;
}

std::vector<DetectionSet> load_detection_file(const std::filesystem::path& path) {
  const auto docs = parse_documents(read_text_file(path), path.string());
  std::vector<DetectionSet> out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    out.push_back(detection_set_from_json(
        docs[i], path.string() + (docs.size() > 1 ? ":/" + std::to_string(i) : ":")));
  }
  return out;
}

Json to_json(const PatchRecord& record) {
  Json anns = Json::array();
  for (const LabeledBox& a : record.annotations) {
    anns.push_back({{"bbox", bbox_json(a.box)}, {"label", to_string(a.label)}});
  }
  return {{"image_id", record.image_id},
          {"origin", Json::array({record.origin.x, record.origin.y})},
          {"tile_size", record.tile_size},
          {"file", record.file_name()},
          {"annotations", std::move(anns)}};
}

PatchRecord patch_record_from_json(const Json& j, const std::string& path) {
  PatchRecord rec;
  rec.image_id = get_string(j, "image_id", path);
  rec.origin = get_origin(member(j, "origin", path), path + "/origin");
  rec.tile_size = j.contains("tile_size") ? get_int(j, "tile_size", path) : 512;
  if (j.contains("file")) rec.file = get_string(j, "file", path);
  const Json& anns = array_member(j, "annotations", path);
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string p = path + "/annotations/" + std::to_string(i);
    rec.annotations.push_back({get_bbox(anns[i], p), get_label(anns[i], p)});
  }
  return rec;
}

std::string to_manifest(const std::vector<PatchRecord>& records) {
  std::string out;
  for (const PatchRecord& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<PatchRecord> load_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<PatchRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) throw SchemaError(where, "invalid JSON");
    out.push_back(patch_record_from_json(j, where));
  }
  return out;
}

Json to_json(const StainBasis& basis) {
  Json rows = Json::array();
  for (int r = 0; r < 3; ++r) {
    rows.push_back(Json::array({basis.stain_vectors(r, 0), basis.stain_vectors(r, 1)}));
  }
  return {{"stain_vectors", std::move(rows)},
          {"max_concentrations",
           Json::array({basis.max_concentrations(0), basis.max_concentrations(1)})},
          {"io", basis.io}};
}

StainBasis stain_basis_from_json(const Json& j) {
  StainBasis basis;
  const Json& rows = array_member(j, "stain_vectors", "");
  if (rows.size() != 3) throw SchemaError("/stain_vectors", "expected 3 rows");
  for (int r = 0; r < 3; ++r) {
    const std::string p = "/stain_vectors/" + std::to_string(r);
    if (!rows[r].is_array() || rows[r].size() != 2) throw SchemaError(p, "expected 2 columns");
    for (int c = 0; c < 2; ++c) basis.stain_vectors(r, c) = get_number(rows[r][c], p + "/" + std::to_string(c));
  }
  const Json& maxc = array_member(j, "max_concentrations", "");
  if (maxc.size() != 2) throw SchemaError("/max_concentrations", "expected 2 values");
  for (int k = 0; k < 2; ++k) {
    basis.max_concentrations(k) = get_number(maxc[k], "/max_concentrations/" + std::to_string(k));
    if (!(basis.max_concentrations(k) > 0.0)) {
      throw SchemaError("/max_concentrations/" + std::to_string(k), "must be positive");
    }
  }
  basis.io = get_number(member(j, "io", ""), "/io");
  if (!(basis.io > 0.0)) throw SchemaError("/io", "must be positive");
  try {
    validate(basis);
  } catch (const SingularBasis& e) {
    throw SchemaError("/stain_vectors", e.what());
  }
  return basis;
}

StainBasis load_stain_basis(const std::filesystem::path& path) {
  const Json j = Json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw SchemaError(path.string(), "invalid JSON");
  try {
    return stain_basis_from_json(j);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ":" + e.path(), e.what());
  }
}

void save_stain_basis(const std::filesystem::path& path, const StainBasis& basis) {
  write_text_atomic(path, dump(to_json(basis)));
}

Json to_json(const CascadeReport& report) {
  Json stages = Json::array();
  for (const StageStats& s : report.stages) {
    stages.push_back({{"positives", s.positives},
                      {"negatives", s.negatives},
                      {"sampled_positives", s.sampled_positives},
                      {"sampled_negatives", s.sampled_negatives},
                      {"mean_pos_iou", s.mean_pos_iou}});
  }
  return {{"stages", std::move(stages)}};
}

Json to_json(const EvalReport& report) {
  Json per_class = Json::object();
  for (const auto& [label, c] : report.per_class) {
    per_class[std::string(to_string(label))] = {
        {"precision", c.precision},
        {"recall", c.recall},
        {"f1", c.f1},
        {"ap", c.ap},
        {"best_f1", c.best_f1},
        {"best_f1_threshold", c.best_f1_threshold},
        {"tp", c.counts.tp},
        {"fp", c.counts.fp},
        {"fn", c.counts.fn}};
  }
  Json per_image = Json::object();
  for (const auto& [id, by_label] : report.per_image) {
    Json entry = Json::object();
    for (const auto& [label, c] : by_label) {
      entry[std::string(to_string(label))] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
    }
    per_image[id] = std::move(entry);
  }
  return {{"per_class", std::move(per_class)},
          {"mean_f1", report.mean_f1},
          {"per_image", std::move(per_image)}};
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace mitoforge
