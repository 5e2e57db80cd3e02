// Copyright 2026 The Pepita Authors
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

#include "pepita/csvio.hpp"

#include <cstdio>

#include "pepita/errors.hpp"

namespace pepita {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::vector<std::string>& header)
    : out_(path), path_(path), columns_(header.size()) {
  if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ",";
    out_ << header[i];
  }
  out_ << "\n";
}

void CsvWriter::begin_row() {
  if (row_open_) throw IoError("CsvWriter: previous row still open");
  row_open_ = true;
  in_row_ = 0;
}

void CsvWriter::add(double v) { add(format_double(v)); }

void CsvWriter::add(std::size_t v) { add(std::to_string(v)); }

void CsvWriter::add(const std::string& v) {
  if (!row_open_) throw IoError("CsvWriter: add outside a row");
  if (in_row_) out_ << ",";
  out_ << v;
  ++in_row_;
}

void CsvWriter::end_row() {
  if (!row_open_) throw IoError("CsvWriter: end_row without begin_row");
  if (in_row_ != columns_) {
    throw IoError("CsvWriter: row has " + std::to_string(in_row_) + " of " +
                  std::to_string(columns_) + " columns in " + path_.string());
  }
  out_ << "\n";
  out_.flush();
  if (!out_) throw IoError("write failure on " + path_.string());
  row_open_ = false;
}

}  // namespace pepita
