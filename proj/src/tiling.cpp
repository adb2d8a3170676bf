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

#include "mitoforge/tiling.hpp"

#include <cmath>

#include "mitoforge/random.hpp"

namespace mitoforge {

namespace {

std::vector<int> axis_anchors(int extent, int tile, int stride) {
  std::vector<int> anchors;
  for (int p = 0; p + tile <= extent; p += stride) anchors.push_back(p);
  if (anchors.back() + tile < extent) anchors.push_back(extent - tile);
  return anchors;
}

}  // namespace

TileGrid build_tile_grid(ImageSize image_size, int tile_size, std::optional<int> stride) {
  const int step = stride.value_or(tile_size);
  if (tile_size <= 0) throw InvalidArgument("tile_size must be positive");
  if (step <= 0 || step > tile_size) throw InvalidArgument("stride must lie in (0, tile_size]");
  if (tile_size > image_size.width || tile_size > image_size.height) {
    throw ImageTooSmall("tile size " + std::to_string(tile_size) + " exceeds image " +
                        std::to_string(image_size.width) + "x" +
                        std::to_string(image_size.height));
  }
  TileGrid grid;
  grid.tile_size = tile_size;
  grid.stride = step;
  grid.image_size = image_size;
  const auto xs = axis_anchors(image_size.width, tile_size, step);
  const auto ys = axis_anchors(image_size.height, tile_size, step);
  grid.origins.reserve(xs.size() * ys.size());
  for (int y : ys) {
    for (int x : xs) grid.origins.push_back({x, y});
  }
  return grid;
}

std::string PatchRecord::file_name() const {
  if (!file.empty()) return file;
  return image_id + "_" + std::to_string(origin.x) + "_" + std::to_string(origin.y) + ".png";
}

std::vector<PatchRecord> project_annotations(std::span<const Annotation> annotations,
                                             const TileGrid& grid, const std::string& image_id,
                                             double min_visible_iou) {
  if (!(min_visible_iou >= 0.0 && min_visible_iou <= 1.0)) {
    throw InvalidArgument("min_visible_iou must lie in [0, 1]");
  }
  std::vector<PatchRecord> records;
  records.reserve(grid.origins.size());
  for (const Origin& o : grid.origins) {
    PatchRecord rec{image_id, o, grid.tile_size, {}, {}};
    const BBox tile = grid.tile_box(o);
    for (const Annotation& a : annotations) {
      const auto clipped = clip_to_region(a.box, tile);
      if (!clipped || iou(a.box, *clipped) < min_visible_iou) continue;
      rec.annotations.push_back({clipped->translated(-o.x, -o.y), a.label});
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<PatchRecord> filter_nonempty(std::vector<PatchRecord> records) {
  std::erase_if(records, [](const PatchRecord& r) { return r.annotations.empty(); });
  return records;
}

DatasetSplit split_random(std::vector<PatchRecord> records, std::size_t train_count,
                          std::size_t val_count, std::uint64_t seed) {
  if (train_count + val_count > records.size()) {
    throw InsufficientRecords("requested " + std::to_string(train_count) + "+" +
                              std::to_string(val_count) + " records but only " +
                              std::to_string(records.size()) + " available");
  }
  Rng rng(seed);
  rng.shuffle(std::span<PatchRecord>(records));
  DatasetSplit split;
  split.seed = seed;
  const auto train_end = records.begin() + static_cast<std::ptrdiff_t>(train_count);
  const auto val_end = train_end + static_cast<std::ptrdiff_t>(val_count);
  split.train.assign(std::make_move_iterator(records.begin()), std::make_move_iterator(train_end));
  split.val.assign(std::make_move_iterator(train_end), std::make_move_iterator(val_end));
  return split;
}

DatasetSplit split_random_fraction(std::vector<PatchRecord> records, double train_fraction,
                                   std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw InvalidArgument("train_fraction must lie in [0, 1]");
  }
  const std::size_t n = records.size();
  const auto train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  return split_random(std::move(records), train, n - train, seed);
}

}  // namespace mitoforge
