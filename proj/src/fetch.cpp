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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "pepita/fetch.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iostream>

#include <httplib.h>
#include <openssl/evp.h>

#include "pepita/errors.hpp"

namespace pepita {

namespace {

// MNIST digests are for the canonical gzip files; CIFAR digests cover the
// tar.gz archives published by the dataset authors.
const char* kMnistBase = "https://storage.googleapis.com/cvdf-datasets/mnist";
const char* kCifarBase = "https://www.cs.toronto.edu/~kriz";

std::vector<FetchItem> mnist_plan() {
  using U = FetchItem::Unpack;
  return {
      {std::string(kMnistBase) + "/train-images-idx3-ubyte.gz",
       "440fcabf73cc546fa21475e81ea370265605f56be210a4024d2ca8f203523609",
       "train-images-idx3-ubyte.gz", U::Gunzip, {"train-images-idx3-ubyte"}},
      {std::string(kMnistBase) + "/train-labels-idx1-ubyte.gz",
       "3552534a0a558bbed6aed32b30c495cca23d567ec52cac8be1a0730e8010255c",
       "train-labels-idx1-ubyte.gz", U::Gunzip, {"train-labels-idx1-ubyte"}},
      {std::string(kMnistBase) + "/t10k-images-idx3-ubyte.gz",
       "8d422c7b0a1c1c79245a5bcf07fe86e33eeafee792b84584aec276f5a2dbc4e6",
       "t10k-images-idx3-ubyte.gz", U::Gunzip, {"t10k-images-idx3-ubyte"}},
      {std::string(kMnistBase) + "/t10k-labels-idx1-ubyte.gz",
       "f7ae60f92e00ec6debd23a6088c31dbd2371eca3ffa0defaefb259924204aec6",
       "t10k-labels-idx1-ubyte.gz", U::Gunzip, {"t10k-labels-idx1-ubyte"}},
  };
}

std::vector<FetchItem> cifar10_plan() {
  return {{std::string(kCifarBase) + "/cifar-10-binary.tar.gz",
           "c4a38c50a1bc5f3a1c5537f2155ab9d68f9f25eb1ed8d9ddda3db29a59bca1dd",
           "cifar-10-binary.tar.gz", FetchItem::Unpack::TarGz,
           {"cifar-10-batches-bin/data_batch_1.bin",
            "cifar-10-batches-bin/data_batch_2.bin",
            "cifar-10-batches-bin/data_batch_3.bin",
            "cifar-10-batches-bin/data_batch_4.bin",
            "cifar-10-batches-bin/data_batch_5.bin",
            "cifar-10-batches-bin/test_batch.bin"}}};
}

std::vector<FetchItem> cifar100_plan() {
  return {{std::string(kCifarBase) + "/cifar-100-binary.tar.gz",
           "58a81ae192c23a4be8b1804d68e518ed807d710a4eb253b1f2a199162a40d8ec",
           "cifar-100-binary.tar.gz", FetchItem::Unpack::TarGz,
           {"cifar-100-binary/train.bin", "cifar-100-binary/test.bin"}}};
}

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ParamError("bad url: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

void download(const std::string& url, const std::filesystem::path& dst) {
  const UrlParts parts = split_url(url);
  httplib::Client client(parts.origin);
  client.set_follow_location(true);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  std::ofstream out(dst, std::ios::binary);
  if (!out) throw IoError("cannot open " + dst.string() + " for writing");
  auto res = client.Get(parts.path, [&](const char* data, size_t len) {
    out.write(data, static_cast<std::streamsize>(len));
    return static_cast<bool>(out);
  });
  out.close();
  if (!res || res->status != 200) {
    std::filesystem::remove(dst);
    throw IoError("download failed for " + url +
                  (res ? " (http " + std::to_string(res->status) + ")"
                       : " (" + httplib::to_string(res.error()) + ")"));
  }
}

}  // namespace

std::vector<FetchItem> dataset_fetch_plan(const std::string& dataset_id) {
  if (dataset_id == "mnist") return mnist_plan();
  if (dataset_id == "cifar10") return cifar10_plan();
  if (dataset_id == "cifar100" || dataset_id == "cifar100_coarse") return cifar100_plan();
  throw ParamError("no fetch plan for dataset '" + dataset_id + "'");
}

std::string sha256_hex(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw IoError("EVP_MD_CTX_new failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

void gunzip_file(const std::filesystem::path& src, const std::filesystem::path& dst) {
  gzFile in = gzopen(src.c_str(), "rb");
  if (!in) throw IoError("cannot open " + src.string());
  std::ofstream out(dst, std::ios::binary);
  if (!out) {
    gzclose(in);
    throw IoError("cannot open " + dst.string() + " for writing");
  }
  std::vector<char> buf(1 << 16);
  int n;
  while ((n = gzread(in, buf.data(), static_cast<unsigned>(buf.size()))) > 0) {
    out.write(buf.data(), n);
  }
  const bool ok = n == 0 && out.good();
  gzclose(in);
  if (!ok) {
    std::filesystem::remove(dst);
    throw FormatError("gunzip failed for " + src.string());
  }
}

void untar_gz(const std::filesystem::path& archive, const std::filesystem::path& dir,
              const std::vector<std::string>& members) {
  gzFile in = gzopen(archive.c_str(), "rb");
  if (!in) throw IoError("cannot open " + archive.string());
  std::vector<std::string> pending = members;
  char header[512];
  while (gzread(in, header, 512) == 512) {
    if (header[0] == '\0') continue;  // padding blocks at the end
    char name[101] = {0};
    std::memcpy(name, header, 100);
    char size_field[13] = {0};
    std::memcpy(size_field, header + 124, 12);
    const unsigned long long size = std::strtoull(size_field, nullptr, 8);
    const unsigned long long padded = (size + 511) / 512 * 512;
    const auto it = std::find(pending.begin(), pending.end(), std::string(name));
    if (it != pending.end() && header[156] != '5') {
      const std::filesystem::path out_path =
          dir / std::filesystem::path(*it).filename();
      std::ofstream out(out_path, std::ios::binary);
      std::vector<char> buf(1 << 16);
      unsigned long long remaining = padded;
      unsigned long long to_write = size;
      while (remaining > 0) {
        const auto chunk = static_cast<unsigned>(std::min<unsigned long long>(buf.size(), remaining));
        if (gzread(in, buf.data(), chunk) != static_cast<int>(chunk)) {
          gzclose(in);
          std::filesystem::remove(out_path);
          throw FormatError("truncated tar archive " + archive.string());
        }
        const auto wr = static_cast<std::streamsize>(std::min<unsigned long long>(chunk, to_write));
        out.write(buf.data(), wr);
        to_write -= static_cast<unsigned long long>(wr);
        remaining -= chunk;
      }
      pending.erase(it);
      if (pending.empty()) break;
    } else {
      // Skip this member's payload.
      if (gzseek(in, static_cast<z_off_t>(padded), SEEK_CUR) < 0) break;
    }
  }
  gzclose(in);
  if (!pending.empty()) {
    throw FormatError("tar member '" + pending.front() + "' not found in " +
                      archive.string());
  }
}

std::size_t fetch_all(const std::vector<FetchItem>& items,
                      const std::filesystem::path& dir, const std::string& base_url) {
  std::filesystem::create_directories(dir);
  std::size_t downloaded = 0;
  for (const FetchItem& item : items) {
    const std::filesystem::path archive = dir / item.archive_name;
    bool had_valid_archive = false;
    if (std::filesystem::exists(archive)) {
      had_valid_archive = sha256_hex(archive) == item.sha256;
      if (!had_valid_archive) std::filesystem::remove(archive);
    }
    if (!had_valid_archive) {
      std::string url = item.url;
      if (!base_url.empty()) {
        url = base_url + split_url(item.url).path;
      }
      std::cerr << "fetching " << url << "\n";
      download(url, archive);
      const std::string got = sha256_hex(archive);
      if (got != item.sha256) {
        std::filesystem::remove(archive);
        throw FormatError("checksum mismatch for " + item.archive_name + ": got " +
                          got + ", expected " + item.sha256);
      }
      ++downloaded;
    }
    bool outputs_present = true;
    for (const std::string& member : item.outputs) {
      if (!std::filesystem::exists(dir / std::filesystem::path(member).filename())) {
        outputs_present = false;
        break;
      }
    }
    if (had_valid_archive && outputs_present) continue;  // idempotent re-run
    switch (item.unpack) {
      case FetchItem::Unpack::None:
        break;
      case FetchItem::Unpack::Gunzip:
        gunzip_file(archive, dir / item.outputs.front());
        break;
      case FetchItem::Unpack::TarGz:
        untar_gz(archive, dir, item.outputs);
        break;
    }
  }
  return downloaded;
}

}  // namespace pepita
