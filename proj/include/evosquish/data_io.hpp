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

#ifndef EVOSQUISH_DATA_IO_HPP_
#define EVOSQUISH_DATA_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evosquish/net_ir.hpp"
#include "evosquish/tensor.hpp"

namespace evosquish {

enum class SourceFormat { kCifarBinary, kIdx, kImageFolder };

std::string_view FormatName(SourceFormat format);
SourceFormat ParseFormat(std::string_view name);

struct ClassEntry {
  int class_id = 0;
  std::string external_id;
  std::string display_name;

  bool operator==(const ClassEntry&) const = default;
};

struct DatasetManifest {
  std::string name;
  std::vector<ClassEntry> classes;
  SourceFormat format = SourceFormat::kCifarBinary;
  // Relative file entries resolve against root.
  std::filesystem::path root;
  std::vector<std::string> train_files;
  std::vector<std::string> test_files;
  // Source label ids to keep, in the order they map onto 0..K-1. Empty keeps
  // every class.
  std::vector<int> subset;
  Shape3 input_shape{3, 32, 32};
  // 0 keeps the whole split; otherwise the first N records.
  std::size_t max_train = 0;
  std::size_t max_test = 0;
  // Per-channel stats on the [0, 1] pixel scale. Empty until computed from
  // the train split.
  std::vector<double> mean;
  std::vector<double> stddev;

  // Throws kInvalidConfig unless class ids are 0..K-1 and external ids unique.
  void Validate() const;
  bool operator==(const DatasetManifest&) const = default;
};

// The ten (wnid, name) pairs of the 10-class ImageNet subset.
DatasetManifest ImageNet10Manifest();
// Upstream CIFAR-10 binary distribution living in `dir`.
DatasetManifest Cifar10Manifest(const std::filesystem::path& dir);

std::string ManifestToJson(const DatasetManifest& manifest);
// Relative roots resolve against base_dir.
DatasetManifest ManifestFromJson(std::string_view text, const std::filesystem::path& base_dir = {});
DatasetManifest ReadManifest(const std::filesystem::path& path);
void WriteManifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Images in NCHW float order plus labels. Pixel scale depends on the stage:
// loaders produce [0, 1], Normalize maps to zero mean / unit variance.
struct ImageSet {
  Shape3 shape;
  std::vector<float> pixels;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const float> Image(std::size_t i) const {
    return {pixels.data() + i * shape.Volume(), shape.Volume()};
  }
};

struct DataStore {
  DatasetManifest manifest;
  ImageSet train;
  ImageSet test;
};

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::size_t kCifarClasses = 10;

// Parses the upstream CIFAR-10 binary layout. With a subset, labels are
// remapped onto 0..K-1 in the subset's order and other records are dropped.
ImageSet DecodeCifarBinary(std::string_view bytes, std::span<const int> subset = {});
ImageSet LoadCifarBinary(std::span<const std::filesystem::path> paths,
                         std::span<const int> subset = {}, std::size_t limit = 0);

// Reads one split laid out as <split_dir>/<external_id>/*.ppm, resized to the
// manifest input shape.
ImageSet LoadImageFolder(const DatasetManifest& manifest, const std::filesystem::path& split_dir);

// Decodes binary (P6) or ASCII (P3) PPM with maxval <= 255 into CHW [0, 1].
ImageSet DecodePpm(std::string_view bytes);
// Bilinear resize of one CHW image.
std::vector<float> ResizeBilinear(std::span<const float> chw, Shape3 from, Shape3 to);

// Loads both splits, computes normalization stats from train when the
// manifest has none, and normalizes both splits.
DataStore LoadDataset(const DatasetManifest& manifest);

void ComputeNormalization(const ImageSet& train, DatasetManifest& manifest);
void Normalize(const DatasetManifest& manifest, ImageSet& set);

// Writes records in the upstream CIFAR-10 binary layout.
std::string EncodeCifarBinary(const ImageSet& set);

// Procedural 10-class CIFAR-format images (oriented, tinted gratings with
// clutter and noise) for exercising the pipeline without the real dataset.
ImageSet MakeSyntheticCifar(std::size_t count, std::uint64_t seed);

enum class Split { kTrain, kTest };

struct Batch {
  Tensor images;
  std::vector<int> labels;
};

// Minibatches over one epoch. Train order is shuffled by
// DeriveSeed(cfg.rng_seed, epoch); augmentation applies to train only. The
// last batch may be short.
class LabeledBatchStream {
 public:
  LabeledBatchStream(const ImageSet& set, const TrainConfig& cfg, Split split, int epoch);

  bool Next(Batch& batch);
  std::size_t batch_count() const;
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const ImageSet* set_;
  int batch_size_;
  bool hflip_;
  bool pad_crop_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::uint64_t aug_seed_;
};

LabeledBatchStream MakeStream(const ImageSet& set, const TrainConfig& cfg, Split split, int epoch = 0);

// Mirrors one CHW image left-right.
void FlipHorizontal(Shape3 shape, std::span<float> chw);

}  // namespace evosquish

#endif  // EVOSQUISH_DATA_IO_HPP_
