// Copyright 2026 The zorefine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ZOREFINE_CSV_HPP_
#define ZOREFINE_CSV_HPP_

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace zorefine {

/// Shortest round-trip decimal form; independent of the C/C++ locale.
/// NaN prints as the empty string so missing metrics stay blank in CSV.
std::string format_double(double x);

/// Writes one comma-separated row terminated by '\n'. Fields containing a
/// comma, quote or newline are quoted.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Splits one CSV line (quoted fields supported).
std::vector<std::string> split_csv_line(std::string_view line);

/// Locale-independent parse; kInvalidArgument on malformed input.
double parse_double(std::string_view text);

}  // namespace zorefine

#endif  // ZOREFINE_CSV_HPP_
