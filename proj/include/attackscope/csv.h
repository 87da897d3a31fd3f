//
// Copyright 2026 The Attackscope Authors
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
//

// Minimal CSV support for the pipeline's tabular artifacts. Fields never
// contain commas, quotes or newlines (ids are validated on write), so no
// quoting is needed.

#ifndef ATTACKSCOPE_CSV_H_
#define ATTACKSCOPE_CSV_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace attackscope {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of `name` in the header; throws kParse if absent.
  std::size_t Column(std::string_view name) const;
};

// Throws kParse (with the line number) when a row's width differs from the
// header's.
CsvTable ParseCsv(std::string_view text, const std::string& what);
CsvTable ReadCsv(const std::string& path);

std::string JoinCsvRow(const std::vector<std::string>& fields);

// Shortest decimal that round-trips, with the literals inf, -inf and nan.
std::string FormatDouble(double value);
// Inverse of FormatDouble; throws kParse on anything else.
double ParseDouble(std::string_view text);

// Throws kContractViolation if `field` cannot be written unquoted.
void CheckCsvField(std::string_view field);

}  // namespace attackscope

#endif  // ATTACKSCOPE_CSV_H_
