// Copyright 2026 The evosquish Authors.
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

#include <filesystem>
#include <string>

#include "doctest.h"
#include "evosquish/arch_io.hpp"
#include "evosquish/error.hpp"
#include "evosquish/rng.hpp"

using namespace evosquish;

namespace {

void Scramble(ArchGraph& arch, std::uint64_t seed, double keep) {
  Rng rng(seed);
  for (int l : arch.ConvIndices()) {
    for (auto& bit : arch.masks[l]) bit = rng.Bernoulli(keep) ? 1 : 0;
  }
}

}  // namespace

TEST_CASE("json and mask encodings round-trip random graphs") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    ArchGraph arch = seed % 2 ? BuildSqueezeNetMini(static_cast<int>(2 + seed)) : BuildSqueezeNetV11(10);
    Scramble(arch, seed, seed % 3 == 0 ? 1.0 : 0.3 + 0.05 * static_cast<double>(seed));
    ArchGraph back = ArchFromJson(ArchToJson(arch));
    DecodeMasks(EncodeMasks(arch), back);
    CHECK(back == arch);
    CHECK(ReportSize(back).live_params == ReportSize(arch).live_params);
  }
}

TEST_CASE("a parsed manifest is fully live") {
  ArchGraph arch = BuildSqueezeNetMini(10);
  Scramble(arch, 3, 0.5);
  const ArchGraph parsed = ArchFromJson(ArchToJson(arch));
  CHECK(ReportSize(parsed).live_params == ReportSize(parsed).total_params);
}

TEST_CASE("run-length mask records stay small for dense masks") {
  const ArchGraph arch = BuildSqueezeNetV11(10);
  const std::string bytes = EncodeMasks(arch);
  CHECK(bytes.substr(0, 8) == kMaskMagic);
  CHECK(bytes.size() < 1024);
}

TEST_CASE("corrupt inputs are rejected") {
  ArchGraph arch = BuildSqueezeNetMini(10);
  const std::string masks = EncodeMasks(arch);
  CHECK_THROWS_AS(DecodeMasks(masks.substr(0, masks.size() - 3), arch), Error);
  std::string bad_magic = masks;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(DecodeMasks(bad_magic, arch), Error);
  CHECK_THROWS_AS(ArchFromJson("{\"schema\": \"other\"}"), Error);
  CHECK_THROWS_AS(ArchFromJson("not json"), Error);

  ArchGraph other = BuildSqueezeNetV11(10);
  CHECK_THROWS_AS(DecodeMasks(masks, other), Error);
}

TEST_CASE("files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "evosquish_arch_io_test";
  std::filesystem::create_directories(dir);
  ArchGraph arch = BuildSqueezeNetMini(10);
  Scramble(arch, 9, 0.6);
  WriteArch(dir / "arch.json", arch);
  WriteMasks(dir / "masks.bin", arch);
  ArchGraph back = ReadArch(dir / "arch.json");
  ReadMasks(dir / "masks.bin", back);
  CHECK(back == arch);
  std::filesystem::remove_all(dir);
}

TEST_CASE("size report csv") {
  const auto report = ReportSize(BuildSqueezeNetMini(10));
  const std::string csv = SizeReportToCsv(report);
  CHECK(csv.rfind("layer_id,kind,total_params,live_params,macs\n", 0) == 0);
  CHECK(csv.find("conv10,conv,") != std::string::npos);
  CHECK(SizeReportToJson(report).find("\"live_params\"") != std::string::npos);
}
