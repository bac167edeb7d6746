// Copyright 2026 The xfer-tune Authors.
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

// File helpers shared by the persistence code and the CLI.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace xfer {

/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Shortest text that reads back to the same double (17 significant digits).
std::string format_double(double v);

/// Parses a whole string as a double; throws DataError naming `field`.
double parse_double(const std::string& text, const std::string& field);

}  // namespace xfer
