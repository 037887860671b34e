// Copyright 2026 The fishcast Authors. All Rights Reserved.
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

#pragma once

// Text report helpers shared by the metrics, gbm and pipeline modules.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fishcast/grid_data.hpp"

namespace fishcast {

// Shortest decimal form that round-trips exactly; "nan" for non-values.
std::string format_real(double value);
// Inverse of format_real. Throws FormatError.
double parse_real(std::string_view text);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

// Grid as CSV: one line per row, comma separated, non-values as "nan".
std::string grid_csv(std::span<const double> grid, GridShape shape);
std::vector<double> parse_grid_csv(const std::string& text, GridShape& shape);

}  // namespace fishcast
