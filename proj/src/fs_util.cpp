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

#include "mitoforge/fs_util.hpp"

#include <array>
#include <atomic>
#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <thread>

#include "mitoforge/error.hpp"

namespace mitoforge {

namespace fs = std::filesystem;

fs::path temp_path_for(const fs::path& target) {
  static std::atomic<unsigned long> counter{0};
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(tid % 100000) + "." + std::to_string(counter++);
  return tmp;
}

void write_file_atomic(const fs::path& target, const std::function<void(std::ostream&)>& writer) {
  const fs::path tmp = temp_path_for(target);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + target.string());
    writer(out);
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw IoError("write failed: " + target.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot rename into place: " + target.string() + " (" + ec.message() + ")");
  }
}

void write_text_atomic(const fs::path& target, std::string_view text) {
  write_file_atomic(target, [&](std::ostream& out) { out.write(text.data(), text.size()); });
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), ptr);
}

}  // namespace mitoforge
