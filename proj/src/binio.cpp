#include "mat/binio.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "mat/errors.hpp"
#include "mat/rng.hpp"

namespace mat {

void check_payload_digest(const ByteReader& reader, size_t payload_end, const MetaDoc& meta) {
  const std::string* recorded = meta.find("payload_digest");
  if (!recorded)
    fail(ErrorCategory::provenance, reader.label() + ": no payload digest recorded");
  const std::string_view payload = reader.prefix(payload_end);
  const std::string derived = hex16(fnv1a64(payload.data(), payload.size()));
  if (derived != *recorded)
    fail(ErrorCategory::provenance, reader.label() + ": payload digest mismatch (recorded " +
                                        *recorded + ", derived " + derived + ")");
}

void ByteWriter::append_le(uint64_t v, int n) {
  for (int i = 0; i < n; ++i) buf_.push_back(char(uint8_t(v >> (8 * i))));
}

void ByteWriter::f32(float v) { append_le(std::bit_cast<uint32_t>(v), 4); }

void ByteWriter::raw(const void* data, size_t len) {
  buf_.append(static_cast<const char*>(data), len);
}

void ByteWriter::str_u16(std::string_view s) {
  if (s.size() > 0xffff) fail(ErrorCategory::io, "string too long for u16 length prefix");
  u16(uint16_t(s.size()));
  raw(s.data(), s.size());
}

void ByteWriter::str_u32(std::string_view s) {
  u32(uint32_t(s.size()));
  raw(s.data(), s.size());
}

void ByteReader::need(size_t n) {
  if (pos_ + n > data_.size())
    fail(ErrorCategory::truncated,
         label_ + ": truncated payload (need " + std::to_string(n) + " bytes at offset " +
             std::to_string(pos_) + ", have " + std::to_string(data_.size() - pos_) + ")");
}

uint64_t ByteReader::read_le(int n) {
  need(size_t(n));
  uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= uint64_t(uint8_t(data_[pos_ + i])) << (8 * i);
  pos_ += size_t(n);
  return v;
}

uint8_t ByteReader::u8() {
  need(1);
  return uint8_t(data_[pos_++]);
}

float ByteReader::f32() { return std::bit_cast<float>(uint32_t(read_le(4))); }

void ByteReader::raw(void* dst, size_t len) {
  need(len);
  std::memcpy(dst, data_.data() + pos_, len);
  pos_ += len;
}

std::string ByteReader::str_u16() {
  const size_t n = u16();
  need(n);
  std::string s(data_.substr(pos_, n));
  pos_ += n;
  return s;
}

std::string ByteReader::str_u32() {
  const size_t n = u32();
  need(n);
  std::string s(data_.substr(pos_, n));
  pos_ += n;
  return s;
}

void ByteReader::expect_magic(std::string_view m, std::string_view container_name) {
  if (data_.size() < m.size() || data_.substr(0, m.size()) != m)
    fail(ErrorCategory::bad_magic,
         label_ + ": not a " + std::string(container_name) + " file (bad magic)");
  pos_ = m.size();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open '" + path + "' for reading");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCategory::io, "read failure on '" + path + "'");
  return data;
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCategory::io, "cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), std::streamsize(contents.size()));
    out.flush();
    if (!out) fail(ErrorCategory::io, "write failure on '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) fail(ErrorCategory::io, "cannot rename '" + tmp.string() + "' to '" + path + "'");
}

std::string format_f64(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) fail(ErrorCategory::io, "double formatting failed");
  return std::string(buf, p);
}

double parse_f64(std::string_view s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail(ErrorCategory::mismatch, "bad floating point value '" + std::string(s) + "'");
  return v;
}

std::string hex16(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf, 16);
}

void MetaDoc::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = std::move(value);
      return;
    }
  entries_.emplace_back(std::move(key), std::move(value));
}

void MetaDoc::set_f64(const std::string& key, double v) { set(key, format_f64(v)); }
void MetaDoc::set_u64(const std::string& key, uint64_t v) { set(key, std::to_string(v)); }
void MetaDoc::set_i64(const std::string& key, int64_t v) { set(key, std::to_string(v)); }

const std::string* MetaDoc::find(std::string_view key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return &v;
  return nullptr;
}

std::string MetaDoc::get(std::string_view key) const {
  const std::string* v = find(key);
  if (!v) fail(ErrorCategory::mismatch, "metadata missing key '" + std::string(key) + "'");
  return *v;
}

double MetaDoc::get_f64(std::string_view key) const { return parse_f64(get(key)); }

uint64_t MetaDoc::get_u64(std::string_view key) const {
  const std::string s = get(key);
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail(ErrorCategory::mismatch, "bad unsigned value for '" + std::string(key) + "'");
  return v;
}

int64_t MetaDoc::get_i64(std::string_view key) const {
  const std::string s = get(key);
  int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    fail(ErrorCategory::mismatch, "bad integer value for '" + std::string(key) + "'");
  return v;
}

bool MetaDoc::get_bool(std::string_view key) const {
  const std::string s = get(key);
  if (s == "true") return true;
  if (s == "false") return false;
  fail(ErrorCategory::mismatch, "bad boolean value for '" + std::string(key) + "'");
}

std::string MetaDoc::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

MetaDoc MetaDoc::parse(std::string_view text) {
  MetaDoc doc;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorCategory::mismatch, "metadata line without '=': '" + std::string(line) + "'");
    doc.entries_.emplace_back(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  return doc;
}

}  // namespace mat
