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

#ifndef EVOSQUISH_ARCH_IO_HPP_
#define EVOSQUISH_ARCH_IO_HPP_

// On-disk forms of an ArchGraph:
//   arch.json  - layers, edges and shapes (schema "evosquish.arch/1")
//   masks.bin  - "EVSQMASK" magic, u32 version, u32 record count, then per conv
//                layer: u32 layer index, u64 bit count, u32 run count and the
//                u32 run lengths, alternating dead/live and starting with dead.
// All integers little-endian.

#include <filesystem>
#include <string>
#include <string_view>

#include "evosquish/net_ir.hpp"

namespace evosquish {

inline constexpr std::string_view kArchSchema = "evosquish.arch/1";
inline constexpr std::string_view kMaskMagic = "EVSQMASK";

// Masks are not part of the manifest; a parsed manifest comes back fully live.
std::string ArchToJson(const ArchGraph& arch);
ArchGraph ArchFromJson(std::string_view text);

std::string EncodeMasks(const ArchGraph& arch);
// Overwrites the masks of `arch`; every conv layer must have a record.
void DecodeMasks(std::string_view bytes, ArchGraph& arch);

void WriteArch(const std::filesystem::path& path, const ArchGraph& arch);
ArchGraph ReadArch(const std::filesystem::path& path);
void WriteMasks(const std::filesystem::path& path, const ArchGraph& arch);
void ReadMasks(const std::filesystem::path& path, ArchGraph& arch);

std::string SizeReportToJson(const SizeReport& report);
// Columns: layer_id,kind,total_params,live_params,macs
std::string SizeReportToCsv(const SizeReport& report);

}  // namespace evosquish

#endif  // EVOSQUISH_ARCH_IO_HPP_
