#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mat/binio.hpp"
#include "mat/model.hpp"

namespace mat {

enum class Split { train, test };

/// Labeled image dataset with pixels in [0,1].
struct RawDataset {
  ImageBatch images;
  std::vector<int> labels;
  int num_classes = 0;
  Split split = Split::train;
  MetaDoc meta;

  int count() const { return images.count; }
  void validate() const;

  /// FNV-1a digest of the canonical core payload (dims, float32 pixels,
  /// labels). Identical for in-memory and round-tripped datasets.
  uint64_t digest() const;
};

struct BlobSplits {
  RawDataset train;
  RawDataset test;
};

/// Deterministic synthetic classification data: each class has a fixed
/// smooth template (a Gaussian bump at a class-specific position) plus
/// i.i.d. Gaussian pixel noise of scale sigma, clipped to [0,1]. Templates
/// are linearly separable when sigma is small. Single channel. The test
/// split has per_class samples drawn from an independent noise stream.
BlobSplits gen_blobs(int num_classes, int per_class, int height, int width, double sigma,
                     uint64_t seed);

/// MATX container round trip (bit-exact).
void save_raw(const RawDataset& dataset, const std::string& path);
RawDataset load_raw(const std::string& path, bool verify_digest = false);

/// Serialized MATX bytes without touching the filesystem (used by save_raw
/// and the digest helpers).
std::string encode_raw(const RawDataset& dataset);
RawDataset decode_raw(const std::string& bytes, const std::string& label,
                      bool verify_digest = false);

}  // namespace mat
