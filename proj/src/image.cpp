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

#include "mitoforge/image.hpp"

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <memory>
#include <string>

#include "mitoforge/fs_util.hpp"

namespace mitoforge {

namespace fs = std::filesystem;

ImagePatch ImagePatch::crop(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > width_ || y + h > height_) {
    throw InvalidArgument("crop window outside image");
  }
  ImagePatch out(w, h);
  for (int row = 0; row < h; ++row) {
    const auto* src = &data_[index(x, y + row, 0)];
    std::copy(src, src + static_cast<std::size_t>(w) * 3, &out.at(0, row, 0));
  }
  out.mpp_ = mpp_;
  return out;
}

namespace {

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

ImagePatch read_png(const fs::path& path) {
  const std::string bytes = read_text_file(path);
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw IoError("not a readable PNG: " + path.string() + " (" + img.message + ")");
  }
  img.format = PNG_FORMAT_RGB;
  if (img.width == 0 || img.height == 0) {
    png_image_free(&img);
    throw IoError("empty PNG: " + path.string());
  }
  ImagePatch out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (!png_image_finish_read(&img, nullptr, out.data().data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("corrupt PNG: " + path.string() + " (" + msg + ")");
  }
  return out;
}

ImagePatch read_tiff(const fs::path& path) {
  TIFFSetWarningHandler(nullptr);
  std::unique_ptr<TIFF, decltype(&TIFFClose)> tif(TIFFOpen(path.c_str(), "r"), &TIFFClose);
  if (!tif) throw IoError("not a readable TIFF: " + path.string());
  std::uint32_t w = 0;
  std::uint32_t h = 0;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
  if (w == 0 || h == 0) throw IoError("empty TIFF: " + path.string());
  std::vector<std::uint32_t> raster(static_cast<std::size_t>(w) * h);
  if (!TIFFReadRGBAImageOriented(tif.get(), w, h, raster.data(), ORIENTATION_TOPLEFT, 0)) {
    throw IoError("corrupt TIFF: " + path.string());
  }
  ImagePatch out(static_cast<int>(w), static_cast<int>(h));
  auto dst = out.data();
  for (std::size_t i = 0; i < raster.size(); ++i) {
    dst[3 * i + 0] = static_cast<std::uint8_t>(TIFFGetR(raster[i]));
    dst[3 * i + 1] = static_cast<std::uint8_t>(TIFFGetG(raster[i]));
    dst[3 * i + 2] = static_cast<std::uint8_t>(TIFFGetB(raster[i]));
  }
  float xres = 0.0f;
  std::uint16_t unit = 0;
  if (TIFFGetField(tif.get(), TIFFTAG_XRESOLUTION, &xres) &&
      TIFFGetField(tif.get(), TIFFTAG_RESOLUTIONUNIT, &unit) && xres > 0.0f) {
    if (unit == RESUNIT_CENTIMETER) out.set_microns_per_pixel(1.0e4 / xres);
    if (unit == RESUNIT_INCH) out.set_microns_per_pixel(25400.0 / xres);
  }
  return out;
}

}  // namespace

ImagePatch read_image(const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".tif" || ext == ".tiff") return read_tiff(path);
  if (ext == ".png") return read_png(path);
  throw IoError("unsupported image format: " + path.string());
}

void write_png(const fs::path& path, const ImagePatch& image) {
  if (image.empty()) throw IoError("refusing to write empty image: " + path.string());
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.data().data(), 0, nullptr)) {
    throw IoError("PNG encode failed: " + path.string() + " (" + img.message + ")");
  }
  std::vector<unsigned char> buffer(size);
  if (!png_image_write_to_memory(&img, buffer.data(), &size, 0, image.data().data(), 0,
                                 nullptr)) {
    throw IoError("PNG encode failed: " + path.string() + " (" + img.message + ")");
  }
  write_file_atomic(path, [&](std::ostream& out) {
    out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(size));
  });
}

}  // namespace mitoforge
