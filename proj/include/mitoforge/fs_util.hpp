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

#ifndef MITOFORGE_FS_UTIL_HPP
#define MITOFORGE_FS_UTIL_HPP

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>

namespace mitoforge {

/// Path next to `target` used for write-then-rename.
std::filesystem::path temp_path_for(const std::filesystem::path& target);

/// Writes through `writer` into a temporary file, then renames it onto
/// `target`. Throws IoError with the target path on failure.
void write_file_atomic(const std::filesystem::path& target,
                       const std::function<void(std::ostream&)>& writer);

void write_text_atomic(const std::filesystem::path& target, std::string_view text);

std::string read_text_file(const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace mitoforge

#endif  // MITOFORGE_FS_UTIL_HPP
