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

#ifndef MITOFORGE_IMAGE_HPP
#define MITOFORGE_IMAGE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "mitoforge/error.hpp"

namespace mitoforge {

/// 8-bit interleaved RGB raster.
class ImagePatch {
 public:
  ImagePatch() = default;
  ImagePatch(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw InvalidArgument("image dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * height * 3, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  std::uint8_t& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c) const { return data_[index(x, y, c)]; }

  std::span<std::uint8_t> data() { return data_; }
  std::span<const std::uint8_t> data() const { return data_; }

  const std::optional<double>& microns_per_pixel() const { return mpp_; }
  void set_microns_per_pixel(std::optional<double> mpp) { mpp_ = mpp; }

  /// Copy of the `w`x`h` window anchored at (x, y); must lie inside the image.
  ImagePatch crop(int x, int y, int w, int h) const;

  friend bool operator==(const ImagePatch& a, const ImagePatch& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
  std::optional<double> mpp_;
};

/// Reads an 8-bit PNG or TIFF (chosen by extension). Gray and alpha channels
/// are converted to RGB. Throws IoError naming the file on failure.
ImagePatch read_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG via a temporary file and rename.
void write_png(const std::filesystem::path& path, const ImagePatch& image);

}  // namespace mitoforge

#endif  // MITOFORGE_IMAGE_HPP
