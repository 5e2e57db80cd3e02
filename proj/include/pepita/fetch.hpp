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

#ifndef PEPITA_FETCH_HPP
#define PEPITA_FETCH_HPP

#include <filesystem>
#include <string>
#include <vector>

namespace pepita {

struct FetchItem {
  std::string url;          // https://host/path
  std::string sha256;       // lowercase hex of the archive as downloaded
  std::string archive_name; // local name for the downloaded file
  enum class Unpack { None, Gunzip, TarGz } unpack = Unpack::None;
  // Gunzip: the decompressed file name. TarGz: members to keep (paths inside
  // the archive), extracted flat into the target directory.
  std::vector<std::string> outputs;
};

// Canonical archives and their published digests.
std::vector<FetchItem> dataset_fetch_plan(const std::string& dataset_id);

std::string sha256_hex(const std::filesystem::path& file);

// Downloads, verifies and unpacks every item into `dir`. Existing outputs
// with valid checksums are kept (idempotent); checksum mismatches abort and
// delete the partial download. `base_url` rewrites the scheme+host of every
// item, for mirrors. Returns the number of files actually downloaded.
std::size_t fetch_all(const std::vector<FetchItem>& items,
                      const std::filesystem::path& dir,
                      const std::string& base_url = "");

// Helpers exposed for tests.
void gunzip_file(const std::filesystem::path& src, const std::filesystem::path& dst);
void untar_gz(const std::filesystem::path& archive, const std::filesystem::path& dir,
              const std::vector<std::string>& members);

}  // namespace pepita

#endif  // PEPITA_FETCH_HPP
