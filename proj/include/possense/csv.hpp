/**
 * Copyright 2026 The possense Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace possense::csv {

/// Minimal reader for the numeric tables used here: comma separated, no
/// quoting, '#' comment lines and blank lines skipped.
struct Table {
  std::vector<std::string> header;
  /// Each row keeps its 1-based source line for error messages.
  std::vector<std::pair<int, std::vector<std::string>>> rows;

  /// Column index by name; throws DataError naming `what` when absent.
  std::size_t column(std::string_view name, std::string_view what) const;
};

Table parse(std::string_view text, std::string_view what);

/// Strict number parse; throws DataError with "<what>:<line>" context.
double to_double(const std::string& cell, std::string_view what, int line);
long long to_int(const std::string& cell, std::string_view what, int line);

/// Shortest round-trip decimal form ("%.17g").
std::string format_double(double v);

}  // namespace possense::csv
