#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mat {

/// Little-endian byte sink for the MATB/MATS/MATX containers.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(char(v)); }
  void u16(uint16_t v) { append_le(v, 2); }
  void u32(uint32_t v) { append_le(v, 4); }
  void u64(uint64_t v) { append_le(v, 8); }
  void f32(float v);
  void i32(int32_t v) { append_le(uint32_t(v), 4); }
  void raw(const void* data, size_t len);
  void magic(std::string_view m) { raw(m.data(), m.size()); }
  void str_u16(std::string_view s);
  void str_u32(std::string_view s);

  const std::string& bytes() const { return buf_; }
  size_t size() const { return buf_.size(); }

 private:
  void append_le(uint64_t v, int n);
  std::string buf_;
};

/// Little-endian reader; throws Error(truncated) on overrun.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string label)
      : data_(data), label_(std::move(label)) {}

  uint8_t u8();
  uint16_t u16() { return uint16_t(read_le(2)); }
  uint32_t u32() { return uint32_t(read_le(4)); }
  uint64_t u64() { return read_le(8); }
  int32_t i32() { return int32_t(uint32_t(read_le(4))); }
  float f32();
  void raw(void* dst, size_t len);
  std::string str_u16();
  std::string str_u32();
  void expect_magic(std::string_view m, std::string_view container_name);

  size_t remaining() const { return data_.size() - pos_; }
  size_t pos() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }
  const std::string& label() const { return label_; }
  std::string_view prefix(size_t n) const { return data_.substr(0, n); }

 private:
  uint64_t read_le(int n);
  void need(size_t n);
  std::string_view data_;
  std::string label_;
  size_t pos_ = 0;
};

std::string read_file(const std::string& path);
/// Write via temp file + rename so partially written artifacts never appear.
void write_file_atomic(const std::string& path, std::string_view contents);

/// Ordered key=value metadata document. Values are locale-independent;
/// doubles use shortest round-trip formatting so parse(serialize(x)) == x.
class MetaDoc {
 public:
  void set(std::string key, std::string value);
  void set_f64(const std::string& key, double v);
  void set_u64(const std::string& key, uint64_t v);
  void set_i64(const std::string& key, int64_t v);
  void set_bool(const std::string& key, bool v) { set(key, v ? "true" : "false"); }

  bool contains(std::string_view key) const { return find(key) != nullptr; }
  const std::string* find(std::string_view key) const;
  std::string get(std::string_view key) const;  // throws mismatch when absent
  double get_f64(std::string_view key) const;
  uint64_t get_u64(std::string_view key) const;
  int64_t get_i64(std::string_view key) const;
  bool get_bool(std::string_view key) const;

  std::string serialize() const;
  static MetaDoc parse(std::string_view text);

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_f64(double v);
double parse_f64(std::string_view s);
std::string hex16(uint64_t v);

/// Re-derive the digest of the payload section (all bytes before the
/// trailing metadata block) and compare it with the recorded
/// `payload_digest`; throws Error(provenance) on mismatch.
void check_payload_digest(const ByteReader& reader, size_t payload_end, const MetaDoc& meta);

}  // namespace mat
