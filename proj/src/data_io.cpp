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

#include "evosquish/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <set>

#include "binary_io.hpp"
#include "evosquish/error.hpp"
#include "evosquish/rng.hpp"
#include "json.hpp"

namespace evosquish {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kManifestSchema = "evosquish.dataset/1";
constexpr std::uint64_t kAugmentStream = 0xA11A;

fs::path Resolve(const DatasetManifest& m, const std::string& file) {
  const fs::path p(file);
  return p.is_absolute() ? p : m.root / p;
}

std::vector<fs::path> ResolveAll(const DatasetManifest& m, const std::vector<std::string>& files) {
  std::vector<fs::path> out;
  for (const auto& f : files) out.push_back(Resolve(m, f));
  return out;
}

void Truncate(ImageSet& set, std::size_t limit) {
  if (limit == 0 || set.size() <= limit) return;
  set.labels.resize(limit);
  set.pixels.resize(limit * set.shape.Volume());
}

std::uint32_t ReadBigEndian32(detail::ByteReader& r) {
  const std::string_view b = r.Bytes(4);
  std::uint32_t v = 0;
  for (char c : b) v = (v << 8) | static_cast<unsigned char>(c);
  return v;
}

ImageSet LoadIdx(const fs::path& images_path, const fs::path& labels_path, Shape3 target) {
  const std::string img = detail::ReadFileBytes(images_path);
  const std::string lab = detail::ReadFileBytes(labels_path);
  detail::ByteReader ri(img, images_path.string());
  detail::ByteReader rl(lab, labels_path.string());
  if (ReadBigEndian32(ri) != 0x00000803 || ReadBigEndian32(rl) != 0x00000801) {
    throw Error(ErrorCode::kFormat, "idx magic mismatch");
  }
  const std::uint32_t n = ReadBigEndian32(ri);
  const std::uint32_t rows = ReadBigEndian32(ri);
  const std::uint32_t cols = ReadBigEndian32(ri);
  if (ReadBigEndian32(rl) != n) throw Error(ErrorCode::kFormat, "idx image/label counts differ");
  const Shape3 native{1, static_cast<int>(rows), static_cast<int>(cols)};
  ImageSet set;
  set.shape = target;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::string_view raw = ri.Bytes(static_cast<std::size_t>(rows) * cols);
    std::vector<float> gray(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) gray[k] = static_cast<unsigned char>(raw[k]) / 255.0f;
    auto resized = ResizeBilinear(gray, native, {1, target.height, target.width});
    for (int c = 0; c < target.channels; ++c) set.pixels.insert(set.pixels.end(), resized.begin(), resized.end());
    set.labels.push_back(static_cast<unsigned char>(rl.Bytes(1)[0]));
  }
  return set;
}

}  // namespace

std::string_view FormatName(SourceFormat format) {
  switch (format) {
    case SourceFormat::kCifarBinary: return "cifar-binary";
    case SourceFormat::kIdx: return "idx";
    case SourceFormat::kImageFolder: return "image-folder";
  }
  return "?";
}

SourceFormat ParseFormat(std::string_view name) {
  for (auto f : {SourceFormat::kCifarBinary, SourceFormat::kIdx, SourceFormat::kImageFolder}) {
    if (FormatName(f) == name) return f;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown dataset format '" + std::string(name) + "'");
}

void DatasetManifest::Validate() const {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].class_id != static_cast<int>(i)) {
      throw Error(ErrorCode::kInvalidConfig, "class ids must be contiguous from 0");
    }
    if (!seen.insert(classes[i].external_id).second) {
      throw Error(ErrorCode::kInvalidConfig, "duplicate external id " + classes[i].external_id);
    }
  }
  if (!subset.empty() && subset.size() != classes.size()) {
    throw Error(ErrorCode::kInvalidConfig, "subset and class list differ in length");
  }
  if (!mean.empty() && (mean.size() != static_cast<std::size_t>(input_shape.channels) ||
                        stddev.size() != mean.size())) {
    throw Error(ErrorCode::kInvalidConfig, "normalization stats need one entry per channel");
  }
}

DatasetManifest ImageNet10Manifest() {
  DatasetManifest m;
  m.name = "imagenet10";
  m.format = SourceFormat::kImageFolder;
  m.input_shape = {3, 227, 227};
  const std::pair<const char*, const char*> table[] = {
      {"n02783161", "pen"},          {"n03085013", "keyboard"},     {"n04557648", "water bottle"},
      {"n04037443", "car"},          {"n03793489", "computer mouse"}, {"n03584254", "cell phone"},
      {"n04548362", "wallet"},       {"n07930864", "cup"},          {"n03782006", "monitor"},
      {"n04409515", "tennis ball"},
  };
  int id = 0;
  for (const auto& [wnid, name] : table) m.classes.push_back({id++, wnid, name});
  m.train_files = {"train"};
  m.test_files = {"val"};
  return m;
}

DatasetManifest Cifar10Manifest(const fs::path& dir) {
  DatasetManifest m;
  m.name = "cifar10";
  m.format = SourceFormat::kCifarBinary;
  m.root = dir;
  const char* names[] = {"airplane", "automobile", "bird", "cat", "deer",
                         "dog", "frog", "horse", "ship", "truck"};
  for (int i = 0; i < 10; ++i) m.classes.push_back({i, names[i], names[i]});
  for (int i = 1; i <= 5; ++i) m.train_files.push_back("data_batch_" + std::to_string(i) + ".bin");
  m.test_files = {"test_batch.bin"};
  return m;
}

std::string ManifestToJson(const DatasetManifest& m) {
  json classes = json::array();
  for (const auto& c : m.classes) {
    classes.push_back({{"class_id", c.class_id}, {"external_id", c.external_id}, {"name", c.display_name}});
  }
  json doc = {{"schema", kManifestSchema},
              {"name", m.name},
              {"format", FormatName(m.format)},
              {"root", m.root.string()},
              {"train", m.train_files},
              {"test", m.test_files},
              {"subset", m.subset},
              {"input_shape", {m.input_shape.channels, m.input_shape.height, m.input_shape.width}},
              {"max_train", m.max_train},
              {"max_test", m.max_test},
              {"classes", classes}};
  if (!m.mean.empty()) doc["normalization"] = {{"mean", m.mean}, {"std", m.stddev}};
  return doc.dump(2) + "\n";
}

DatasetManifest ManifestFromJson(std::string_view text, const fs::path& base_dir) {
  DatasetManifest m;
  try {
    const json doc = json::parse(text);
    if (doc.value("schema", std::string(kManifestSchema)) != kManifestSchema) {
      throw Error(ErrorCode::kInvalidConfig, "unsupported dataset manifest schema");
    }
    m.name = doc.at("name").get<std::string>();
    m.format = ParseFormat(doc.at("format").get<std::string>());
    fs::path root = doc.value("root", std::string());
    m.root = root.is_absolute() || base_dir.empty() ? root : base_dir / root;
    m.train_files = doc.value("train", std::vector<std::string>{});
    m.test_files = doc.value("test", std::vector<std::string>{});
    m.subset = doc.value("subset", std::vector<int>{});
    if (doc.contains("input_shape")) {
      const auto& s = doc["input_shape"];
      m.input_shape = {s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()};
    }
    m.max_train = doc.value("max_train", std::size_t{0});
    m.max_test = doc.value("max_test", std::size_t{0});
    for (const auto& c : doc.at("classes")) {
      m.classes.push_back({c.at("class_id").get<int>(), c.at("external_id").get<std::string>(),
                           c.value("name", c.at("external_id").get<std::string>())});
    }
    if (doc.contains("normalization")) {
      m.mean = doc["normalization"].at("mean").get<std::vector<double>>();
      m.stddev = doc["normalization"].at("std").get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("dataset manifest: ") + e.what());
  }
  m.Validate();
  return m;
}

DatasetManifest ReadManifest(const fs::path& path) {
  return ManifestFromJson(detail::ReadFileBytes(path), path.parent_path());
}

void WriteManifest(const fs::path& path, const DatasetManifest& manifest) {
  detail::WriteFileBytes(path, ManifestToJson(manifest));
}

// ---------------------------------------------------------------------------

ImageSet DecodeCifarBinary(std::string_view bytes, std::span<const int> subset) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw Error(ErrorCode::kTruncatedFile,
                "CIFAR data is " + std::to_string(bytes.size()) + " bytes, not a multiple of 3073");
  }
  std::vector<int> remap(kCifarClasses, -1);
  if (subset.empty()) {
    for (std::size_t i = 0; i < kCifarClasses; ++i) remap[i] = static_cast<int>(i);
  } else {
    for (std::size_t i = 0; i < subset.size(); ++i) {
      if (subset[i] < 0 || subset[i] >= static_cast<int>(kCifarClasses) || remap[subset[i]] >= 0) {
        throw Error(ErrorCode::kInvalidConfig, "subset classes must be distinct ids in 0..9");
      }
      remap[subset[i]] = static_cast<int>(i);
    }
  }
  ImageSet set;
  set.shape = {3, 32, 32};
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  for (std::size_t r = 0; r < records; ++r) {
    const auto* rec = reinterpret_cast<const unsigned char*>(bytes.data()) + r * kCifarRecordBytes;
    if (rec[0] >= kCifarClasses) {
      throw Error(ErrorCode::kInvalidLabelByte,
                  "record " + std::to_string(r) + " has label byte " + std::to_string(rec[0]));
    }
    const int label = remap[rec[0]];
    if (label < 0) continue;
    set.labels.push_back(label);
    for (std::size_t k = 1; k < kCifarRecordBytes; ++k) set.pixels.push_back(rec[k] / 255.0f);
  }
  return set;
}

ImageSet LoadCifarBinary(std::span<const fs::path> paths, std::span<const int> subset,
                         std::size_t limit) {
  ImageSet all;
  all.shape = {3, 32, 32};
  for (const auto& p : paths) {
    if (limit != 0 && all.size() >= limit) break;
    ImageSet part = DecodeCifarBinary(detail::ReadFileBytes(p), subset);
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
    all.pixels.insert(all.pixels.end(), part.pixels.begin(), part.pixels.end());
  }
  Truncate(all, limit);
  if (all.size() == 0 && !subset.empty()) {
    throw Error(ErrorCode::kEmptySubset, "no records belong to the requested classes");
  }
  return all;
}

std::string EncodeCifarBinary(const ImageSet& set) {
  if (set.shape != Shape3{3, 32, 32}) throw Error(ErrorCode::kShapeMismatch, "CIFAR images are 3x32x32");
  std::string out;
  out.reserve(set.size() * kCifarRecordBytes);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.labels[i] < 0 || set.labels[i] > 9) throw Error(ErrorCode::kInvalidLabel, "label outside 0..9");
    out.push_back(static_cast<char>(set.labels[i]));
    for (float v : set.Image(i)) {
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

ImageSet DecodePpm(std::string_view bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> long {
    skip_space();
    long v = 0;
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1'000'000) break;
    }
    if (pos == start) throw Error(ErrorCode::kUndecodableImage, "malformed PPM header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '3')) {
    throw Error(ErrorCode::kUndecodableImage, "not a P3/P6 PPM image");
  }
  const bool binary = bytes[1] == '6';
  pos = 2;
  const long width = number();
  const long height = number();
  const long maxval = number();
  if (width < 1 || height < 1 || width > 65536 || height > 65536 || maxval < 1 || maxval > 255) {
    throw Error(ErrorCode::kUndecodableImage, "unsupported PPM dimensions or maxval");
  }
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  ImageSet img;
  img.shape = {3, static_cast<int>(height), static_cast<int>(width)};
  img.pixels.resize(3 * plane);
  img.labels = {0};
  if (binary) {
    ++pos;  // single whitespace after maxval
    if (bytes.size() - std::min(pos, bytes.size()) < 3 * plane) {
      throw Error(ErrorCode::kUndecodableImage, "PPM pixel data truncated");
    }
  }
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      const long v = binary ? static_cast<unsigned char>(bytes[pos++]) : number();
      if (v > maxval) throw Error(ErrorCode::kUndecodableImage, "PPM sample above maxval");
      img.pixels[c * plane + i] = static_cast<float>(v) / static_cast<float>(maxval);
    }
  }
  return img;
}

std::vector<float> ResizeBilinear(std::span<const float> chw, Shape3 from, Shape3 to) {
  if (from.height == to.height && from.width == to.width) return {chw.begin(), chw.end()};
  std::vector<float> out(static_cast<std::size_t>(from.channels) * to.height * to.width);
  const double sy = static_cast<double>(from.height) / to.height;
  const double sx = static_cast<double>(from.width) / to.width;
  for (int c = 0; c < from.channels; ++c) {
    const float* src = chw.data() + static_cast<std::size_t>(c) * from.height * from.width;
    for (int y = 0; y < to.height; ++y) {
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, from.height - 1.0);
      const int y0 = static_cast<int>(fy);
      const int y1 = std::min(y0 + 1, from.height - 1);
      const double wy = fy - y0;
      for (int x = 0; x < to.width; ++x) {
        const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, from.width - 1.0);
        const int x0 = static_cast<int>(fx);
        const int x1 = std::min(x0 + 1, from.width - 1);
        const double wx = fx - x0;
        const double top = src[y0 * from.width + x0] * (1 - wx) + src[y0 * from.width + x1] * wx;
        const double bot = src[y1 * from.width + x0] * (1 - wx) + src[y1 * from.width + x1] * wx;
        out[(static_cast<std::size_t>(c) * to.height + y) * to.width + x] =
            static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

ImageSet LoadImageFolder(const DatasetManifest& manifest, const fs::path& split_dir) {
  ImageSet set;
  set.shape = manifest.input_shape;
  for (const auto& cls : manifest.classes) {
    const fs::path dir = split_dir / cls.external_id;
    if (!fs::is_directory(dir)) {
      throw Error(ErrorCode::kMissingClassFolder, "missing class folder " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      ImageSet img = DecodePpm(detail::ReadFileBytes(f));
      if (img.shape.channels != manifest.input_shape.channels) {
        throw Error(ErrorCode::kUndecodableImage, f.string() + " has the wrong channel count");
      }
      auto resized = ResizeBilinear(img.pixels, img.shape, manifest.input_shape);
      set.pixels.insert(set.pixels.end(), resized.begin(), resized.end());
      set.labels.push_back(cls.class_id);
    }
  }
  return set;
}

// ---------------------------------------------------------------------------

void ComputeNormalization(const ImageSet& train, DatasetManifest& manifest) {
  if (train.size() == 0) throw Error(ErrorCode::kEmptySplit, "cannot compute stats of an empty split");
  const int channels = train.shape.channels;
  const std::size_t plane = static_cast<std::size_t>(train.shape.height) * train.shape.width;
  manifest.mean.assign(channels, 0.0);
  manifest.stddev.assign(channels, 0.0);
  for (int c = 0; c < channels; ++c) {
    double sum = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const float* p = train.pixels.data() + i * train.shape.Volume() + c * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        sum += p[k];
        sq += static_cast<double>(p[k]) * p[k];
      }
    }
    const double n = static_cast<double>(train.size() * plane);
    const double mean = sum / n;
    manifest.mean[c] = mean;
    manifest.stddev[c] = std::sqrt(std::max(sq / n - mean * mean, 1e-12));
  }
}

void Normalize(const DatasetManifest& manifest, ImageSet& set) {
  const int channels = set.shape.channels;
  if (manifest.mean.size() != static_cast<std::size_t>(channels)) {
    throw Error(ErrorCode::kInvalidConfig, "normalization stats missing");
  }
  const std::size_t plane = static_cast<std::size_t>(set.shape.height) * set.shape.width;
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (int c = 0; c < channels; ++c) {
      float* p = set.pixels.data() + i * set.shape.Volume() + c * plane;
      const double m = manifest.mean[c];
      const double s = manifest.stddev[c];
      for (std::size_t k = 0; k < plane; ++k) p[k] = static_cast<float>((p[k] - m) / s);
    }
  }
}

DataStore LoadDataset(const DatasetManifest& manifest) {
  manifest.Validate();
  DataStore store;
  store.manifest = manifest;
  switch (manifest.format) {
    case SourceFormat::kCifarBinary: {
      const auto train = ResolveAll(manifest, manifest.train_files);
      const auto test = ResolveAll(manifest, manifest.test_files);
      for (const auto& p : train) {
        if (!fs::exists(p)) throw Error(ErrorCode::kIo, "missing dataset file " + p.string());
      }
      store.train = LoadCifarBinary(train, manifest.subset, manifest.max_train);
      store.test = LoadCifarBinary(test, manifest.subset, manifest.max_test);
      if (store.manifest.classes.empty()) {
        const std::size_t k = manifest.subset.empty() ? kCifarClasses : manifest.subset.size();
        for (std::size_t i = 0; i < k; ++i) {
          const int src = manifest.subset.empty() ? static_cast<int>(i) : manifest.subset[i];
          store.manifest.classes.push_back({static_cast<int>(i), std::to_string(src), std::to_string(src)});
        }
      }
      break;
    }
    case SourceFormat::kIdx: {
      if (manifest.train_files.size() != 2 || manifest.test_files.size() != 2) {
        throw Error(ErrorCode::kInvalidConfig, "idx splits need [images, labels] file pairs");
      }
      store.train = LoadIdx(Resolve(manifest, manifest.train_files[0]),
                            Resolve(manifest, manifest.train_files[1]), manifest.input_shape);
      store.test = LoadIdx(Resolve(manifest, manifest.test_files[0]),
                           Resolve(manifest, manifest.test_files[1]), manifest.input_shape);
      Truncate(store.train, manifest.max_train);
      Truncate(store.test, manifest.max_test);
      break;
    }
    case SourceFormat::kImageFolder: {
      if (manifest.train_files.size() != 1 || manifest.test_files.size() != 1) {
        throw Error(ErrorCode::kInvalidConfig, "image-folder splits name one directory each");
      }
      store.train = LoadImageFolder(manifest, Resolve(manifest, manifest.train_files[0]));
      store.test = LoadImageFolder(manifest, Resolve(manifest, manifest.test_files[0]));
      Truncate(store.train, manifest.max_train);
      Truncate(store.test, manifest.max_test);
      break;
    }
  }
  const int k = static_cast<int>(store.manifest.classes.size());
  for (const ImageSet* set : {&store.train, &store.test}) {
    for (int label : set->labels) {
      if (k > 0 && label >= k) throw Error(ErrorCode::kInvalidLabel, "label outside the class list");
    }
  }
  if (store.train.size() == 0) throw Error(ErrorCode::kEmptySplit, "train split is empty");
  if (store.manifest.mean.empty()) ComputeNormalization(store.train, store.manifest);
  Normalize(store.manifest, store.train);
  Normalize(store.manifest, store.test);
  return store;
}

// ---------------------------------------------------------------------------

ImageSet MakeSyntheticCifar(std::size_t count, std::uint64_t seed) {
  // Colour tints repeat every five classes; orientation separates each pair
  // by 90 degrees and neighbouring classes by 18.
  constexpr double kTint[5][3] = {
      {1.0, 0.35, 0.35}, {0.35, 1.0, 0.35}, {0.35, 0.35, 1.0}, {1.0, 1.0, 0.3}, {0.3, 1.0, 1.0}};
  // A weak tint on the mean colour keeps the first gradient steps informative.
  constexpr double kMeanTint = 0.8;
  ImageSet set;
  set.shape = {3, 32, 32};
  set.pixels.reserve(count * set.shape.Volume());
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(rng.Below(10));
    const double theta = (label * 18.0 + rng.Uniform(-9.0, 9.0)) * std::numbers::pi / 180.0;
    const double freq = rng.Uniform(2.0, 4.5) / 32.0;
    const double phase = rng.Uniform(0.0, 2.0 * std::numbers::pi);
    const double contrast = rng.Uniform(30.0, 75.0);
    const double base = rng.Uniform(80.0, 170.0);
    const double blob_x = rng.Uniform(0.0, 32.0);
    const double blob_y = rng.Uniform(0.0, 32.0);
    const double blob_r = rng.Uniform(3.0, 8.0);
    double blob_rgb[3];
    for (double& v : blob_rgb) v = rng.Uniform(-90.0, 90.0);
    const double tint_jitter = rng.Uniform(-0.3, 0.3);
    const auto& tint = kTint[label % 5];
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    std::vector<double> img(3 * 1024);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const double wave = std::sin(2.0 * std::numbers::pi * freq * (x * cs + y * sn) + phase);
        const double dx = x - blob_x;
        const double dy = y - blob_y;
        const bool in_blob = dx * dx + dy * dy < blob_r * blob_r;
        for (int c = 0; c < 3; ++c) {
          const double t = std::clamp(tint[c] + tint_jitter, 0.0, 1.2);
          double v = base + kMeanTint * contrast * (t - 0.6) + contrast * wave * t;
          if (in_blob) v += blob_rgb[c];
          v += rng.Uniform(-55.0, 55.0);
          img[c * 1024 + y * 32 + x] = std::clamp(v, 0.0, 255.0);
        }
      }
    }
    for (double v : img) set.pixels.push_back(static_cast<float>(std::round(v) / 255.0));
    set.labels.push_back(label);
  }
  return set;
}

// ---------------------------------------------------------------------------

void FlipHorizontal(Shape3 shape, std::span<float> chw) {
  for (int c = 0; c < shape.channels; ++c) {
    for (int y = 0; y < shape.height; ++y) {
      float* row = chw.data() + (static_cast<std::size_t>(c) * shape.height + y) * shape.width;
      std::reverse(row, row + shape.width);
    }
  }
}

LabeledBatchStream::LabeledBatchStream(const ImageSet& set, const TrainConfig& cfg, Split split,
                                       int epoch)
    : set_(&set),
      batch_size_(cfg.batch_size),
      hflip_(split == Split::kTrain && cfg.hflip),
      pad_crop_(split == Split::kTrain && cfg.pad_crop),
      aug_seed_(DeriveSeed(cfg.rng_seed ^ kAugmentStream, static_cast<std::uint64_t>(epoch))) {
  if (set.size() == 0) throw Error(ErrorCode::kEmptySplit, "split has no samples");
  if (batch_size_ < 1) throw Error(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
  order_.resize(set.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (split == Split::kTrain) {
    Rng rng(DeriveSeed(cfg.rng_seed, static_cast<std::uint64_t>(epoch)));
    rng.Shuffle(order_.begin(), order_.end());
  }
}

std::size_t LabeledBatchStream::batch_count() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

bool LabeledBatchStream::Next(Batch& batch) {
  if (cursor_ >= order_.size()) return false;
  const std::size_t n = std::min<std::size_t>(batch_size_, order_.size() - cursor_);
  const Shape3 s = set_->shape;
  batch.images = Tensor(static_cast<int>(n), s.channels, s.height, s.width);
  batch.labels.resize(n);
  Rng rng(DeriveSeed(aug_seed_, cursor_));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = order_[cursor_ + i];
    batch.labels[i] = set_->labels[src];
    auto image = set_->Image(src);
    float* dst = batch.images.Sample(static_cast<int>(i));
    if (pad_crop_) {
      constexpr int kPad = 4;
      const int oy = static_cast<int>(rng.Below(2 * kPad + 1)) - kPad;
      const int ox = static_cast<int>(rng.Below(2 * kPad + 1)) - kPad;
      for (int c = 0; c < s.channels; ++c) {
        for (int y = 0; y < s.height; ++y) {
          for (int x = 0; x < s.width; ++x) {
            const int sy = y + oy;
            const int sx = x + ox;
            const bool inside = sy >= 0 && sy < s.height && sx >= 0 && sx < s.width;
            dst[(static_cast<std::size_t>(c) * s.height + y) * s.width + x] =
                inside ? image[(static_cast<std::size_t>(c) * s.height + sy) * s.width + sx] : 0.0f;
          }
        }
      }
    } else {
      std::copy(image.begin(), image.end(), dst);
    }
    if (hflip_ && rng.Bernoulli(0.5)) FlipHorizontal(s, {dst, s.Volume()});
  }
  cursor_ += n;
  return true;
}

LabeledBatchStream MakeStream(const ImageSet& set, const TrainConfig& cfg, Split split, int epoch) {
  return LabeledBatchStream(set, cfg, split, epoch);
}

}  // namespace evosquish
