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

#include "fishcast/report_format.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fishcast/errors.hpp"

namespace fishcast {

std::string format_real(double value) {
  if (is_non_value(value)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw FormatError("cannot format value");
  return std::string(buf, ptr);
}

double parse_real(std::string_view text) {
  if (text == "nan") return kNonValue;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw FormatError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string grid_csv(std::span<const double> grid, GridShape shape) {
  if (grid.size() != shape.cells()) throw ShapeError("grid size does not match shape");
  std::string out;
  for (std::size_t r = 0; r < shape.rows; ++r) {
    for (std::size_t c = 0; c < shape.cols; ++c) {
      if (c != 0) out += ',';
      out += format_real(grid[r * shape.cols + c]);
    }
    out += '\n';
  }
  return out;
}

std::vector<double> parse_grid_csv(const std::string& text, GridShape& shape) {
  std::vector<double> values;
  std::istringstream in(text);
  std::string line;
  std::size_t rows = 0, cols = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t count = 0, begin = 0;
    while (true) {
      const std::size_t end = line.find(',', begin);
      values.push_back(parse_real(std::string_view(line).substr(begin, end - begin)));
      ++count;
      if (end == std::string::npos) break;
      begin = end + 1;
    }
    if (rows == 0) cols = count;
    else if (count != cols) throw FormatError("ragged grid CSV");
    ++rows;
  }
  shape = GridShape{rows, cols};
  return values;
}

}  // namespace fishcast
