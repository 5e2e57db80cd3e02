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

#ifndef PEPITA_CSVIO_HPP
#define PEPITA_CSVIO_HPP

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace pepita {

// Doubles are printed with %.17g so files round-trip exactly and repeated
// runs compare bit for bit.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void begin_row();
  void add(double v);
  void add(std::size_t v);
  void add(const std::string& v);
  void end_row();  // flushes, so partial runs still leave usable files

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
  bool row_open_ = false;
};

}  // namespace pepita

#endif  // PEPITA_CSVIO_HPP
