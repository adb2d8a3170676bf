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

#ifndef MITOFORGE_TILING_HPP
#define MITOFORGE_TILING_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mitoforge/annotation.hpp"

namespace mitoforge {

struct Origin {
  int x = 0;
  int y = 0;
  friend bool operator==(const Origin&, const Origin&) = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;
};

/// Square tile anchors over an image. Edge tiles are anchored to the image
/// border, so every tile is exactly `tile_size` on a side.
struct TileGrid {
  int tile_size = 512;
  int stride = 512;
  ImageSize image_size;
  std::vector<Origin> origins;  // row-major: y outer, x inner

  BBox tile_box(const Origin& o) const {
    return {static_cast<double>(o.x), static_cast<double>(o.y),
            static_cast<double>(o.x + tile_size), static_cast<double>(o.y + tile_size)};
  }
};

TileGrid build_tile_grid(ImageSize image_size, int tile_size = 512,
                         std::optional<int> stride = std::nullopt);

/// Annotations of one tile, translated into tile-local coordinates.
struct PatchRecord {
  std::string image_id;
  Origin origin;
  int tile_size = 512;
  std::vector<LabeledBox> annotations;
  /// Raster file name; empty means the default "<image_id>_<x>_<y>.png".
  std::string file;

  /// File name of the patch raster.
  std::string file_name() const;
};

/// One record per tile. An annotation is kept for a tile when the IoU
/// between it and its tile-clipped part is at least `min_visible_iou`.
std::vector<PatchRecord> project_annotations(std::span<const Annotation> annotations,
                                             const TileGrid& grid, const std::string& image_id,
                                             double min_visible_iou = 0.3);

std::vector<PatchRecord> filter_nonempty(std::vector<PatchRecord> records);

struct DatasetSplit {
  std::vector<PatchRecord> train;
  std::vector<PatchRecord> val;
  std::uint64_t seed = 0;
};

/// Exact-count split: shuffle under `seed`, take the first `train_count`
/// records for training and the next `val_count` for validation. Records
/// beyond the two counts are discarded.
DatasetSplit split_random(std::vector<PatchRecord> records, std::size_t train_count,
                          std::size_t val_count, std::uint64_t seed);

/// Fraction split: the first round(train_fraction * N) shuffled records go
/// to training, the rest to validation.
DatasetSplit split_random_fraction(std::vector<PatchRecord> records, double train_fraction,
                                   std::uint64_t seed);

}  // namespace mitoforge

#endif  // MITOFORGE_TILING_HPP
