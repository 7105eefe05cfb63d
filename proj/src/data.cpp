#include "mat/data.hpp"

#include <cmath>

#include "mat/errors.hpp"
#include "mat/rng.hpp"

namespace mat {

void RawDataset::validate() const {
  if (images.count <= 0) fail(ErrorCategory::mismatch, "dataset: empty image set");
  if (int(labels.size()) != images.count)
    fail(ErrorCategory::mismatch, "dataset: label count does not match image count");
  if (num_classes < 2) fail(ErrorCategory::mismatch, "dataset: needs at least two classes");
  for (int y : labels)
    if (y < 0 || y >= num_classes)
      fail(ErrorCategory::mismatch, "dataset: label " + std::to_string(y) + " out of range");
  for (double p : images.pixels)
    if (!(p >= 0.0 && p <= 1.0))
      fail(ErrorCategory::mismatch, "dataset: pixel outside [0,1]");
}

namespace {

// Core payload layout shared by the digest and the MATX container:
// u32 count, u32 h, u32 w, u32 c, u32 num_classes, u8 split,
// f32 pixels, i32 labels.
void encode_core(const RawDataset& d, ByteWriter& w) {
  w.u32(uint32_t(d.images.count));
  w.u32(uint32_t(d.images.shape.h));
  w.u32(uint32_t(d.images.shape.w));
  w.u32(uint32_t(d.images.shape.c));
  w.u32(uint32_t(d.num_classes));
  w.u8(d.split == Split::train ? 0 : 1);
  for (double p : d.images.pixels) w.f32(float(p));
  for (int y : d.labels) w.i32(y);
}

}  // namespace

uint64_t RawDataset::digest() const {
  ByteWriter w;
  encode_core(*this, w);
  return fnv1a64(w.bytes().data(), w.bytes().size());
}

BlobSplits gen_blobs(int num_classes, int per_class, int height, int width, double sigma,
                     uint64_t seed) {
  if (num_classes < 2)
    fail(ErrorCategory::config, "gen_blobs: need at least 2 classes");
  if (per_class < 1) fail(ErrorCategory::config, "gen_blobs: per_class must be positive");
  if (height < 2 || width < 2)
    fail(ErrorCategory::config, "gen_blobs: degenerate image dims " + std::to_string(height) +
                                    "x" + std::to_string(width));
  if (sigma < 0.0) fail(ErrorCategory::config, "gen_blobs: sigma must be nonnegative");

  // Class templates: one Gaussian bump per class, centers spread on a ring.
  // The contrast is deliberately low so that the paper-scale attack radii
  // (a few /255) land inside the class-margin regime: the L-infinity shift
  // eps * ||d||_1 / ||d||_2 of an optimal attack is a large fraction of the
  // template half-distance ||d||_2 / 2, as it is for natural images.
  const double amp = 0.15;
  const double base = 0.10;
  const double ring = 0.30 * double(std::min(height, width));
  const double bump_sd = 0.14 * double(std::min(height, width));
  const double cy0 = (double(height) - 1.0) / 2.0;
  const double cx0 = (double(width) - 1.0) / 2.0;
  std::vector<double> templates(size_t(num_classes) * height * width);
  for (int c = 0; c < num_classes; ++c) {
    const double angle = 6.283185307179586 * double(c) / double(num_classes) + 0.5;
    const double cy = cy0 + ring * std::sin(angle);
    const double cx = cx0 + ring * std::cos(angle);
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) {
        const double d2 = (i - cy) * (i - cy) + (j - cx) * (j - cx);
        templates[(size_t(c) * height + i) * width + j] =
            base + amp * std::exp(-d2 / (2.0 * bump_sd * bump_sd));
      }
  }

  auto make_split = [&](Split split, uint64_t noise_seed) {
    RawDataset d;
    d.split = split;
    d.num_classes = num_classes;
    d.images.count = num_classes * per_class;
    d.images.shape = {height, width, 1};
    d.images.pixels.resize(size_t(d.images.count) * d.images.sample_size());
    d.labels.resize(size_t(d.images.count));
    Rng rng(noise_seed);
    size_t at = 0;
    for (int c = 0; c < num_classes; ++c)
      for (int s = 0; s < per_class; ++s) {
        d.labels[at / d.images.sample_size()] = c;
        for (int p = 0; p < height * width; ++p, ++at) {
          double v = templates[size_t(c) * height * width + p] + sigma * rng.normal();
          v = std::min(std::max(v, 0.0), 1.0);
          d.images.pixels[at] = quantize_f32(v);
        }
      }
    d.meta.set("generator", "blobs-v1");
    d.meta.set_u64("classes", uint64_t(num_classes));
    d.meta.set_u64("per_class", uint64_t(per_class));
    d.meta.set_f64("sigma", sigma);
    d.meta.set_u64("seed", seed);
    return d;
  };

  BlobSplits out;
  out.train = make_split(Split::train, derive_seed(seed, "blobs-train"));
  out.test = make_split(Split::test, derive_seed(seed, "blobs-test"));
  return out;
}

std::string encode_raw(const RawDataset& dataset) {
  ByteWriter payload;
  payload.magic("MATX");
  payload.u32(1);  // version
  encode_core(dataset, payload);

  MetaDoc meta = dataset.meta;
  meta.set("payload_digest", hex16(fnv1a64(payload.bytes().data(), payload.bytes().size())));

  ByteWriter file;
  file.raw(payload.bytes().data(), payload.bytes().size());
  file.str_u32(meta.serialize());
  return file.bytes();
}

RawDataset decode_raw(const std::string& bytes, const std::string& label,
                      bool verify_digest) {
  ByteReader r(bytes, label);
  r.expect_magic("MATX", "MATX dataset");
  const uint32_t version = r.u32();
  if (version != 1)
    fail(ErrorCategory::bad_version,
         label + ": unsupported MATX version " + std::to_string(version));
  RawDataset d;
  d.images.count = int(r.u32());
  d.images.shape.h = int(r.u32());
  d.images.shape.w = int(r.u32());
  d.images.shape.c = int(r.u32());
  d.num_classes = int(r.u32());
  d.split = r.u8() == 0 ? Split::train : Split::test;
  if (d.images.count <= 0 || d.images.shape.h <= 0 || d.images.shape.w <= 0 ||
      d.images.shape.c <= 0)
    fail(ErrorCategory::mismatch, label + ": bad MATX dimensions");
  d.images.pixels.resize(size_t(d.images.count) * d.images.sample_size());
  for (double& p : d.images.pixels) p = double(r.f32());
  d.labels.resize(size_t(d.images.count));
  for (int& y : d.labels) y = r.i32();
  const size_t payload_end = r.pos();
  d.meta = MetaDoc::parse(r.str_u32());
  if (verify_digest) check_payload_digest(r, payload_end, d.meta);
  return d;
}

void save_raw(const RawDataset& dataset, const std::string& path) {
  dataset.validate();
  write_file_atomic(path, encode_raw(dataset));
}

RawDataset load_raw(const std::string& path, bool verify_digest) {
  RawDataset d = decode_raw(read_file(path), path, verify_digest);
  d.validate();
  return d;
}

}  // namespace mat
