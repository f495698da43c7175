#pragma once

#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "spikegrasp/error.hpp"

namespace spikegrasp {

// ---------------------------------------------------------------------------
// Little-endian binary primitives (files are LE regardless of host order).
// ---------------------------------------------------------------------------

void write_u8(std::ostream& os, std::uint8_t v);
void write_u16(std::ostream& os, std::uint16_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f32(std::ostream& os, float v);
void write_f64(std::ostream& os, double v);

std::uint8_t read_u8(std::istream& is);
std::uint16_t read_u16(std::istream& is);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
float read_f32(std::istream& is);
double read_f64(std::istream& is);

// ---------------------------------------------------------------------------
// FNV-1a 64-bit: stable content hashing for configs, manifests, file headers.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 1469598103934665603ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t h = 1469598103934665603ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::uint64_t fnv1a64(const char* s,
                             std::uint64_t h = 1469598103934665603ULL) {
  return fnv1a64(std::string(s), h);
}

std::uint64_t hash_file(const std::string& path);

// ---------------------------------------------------------------------------
// Key/value structured text. One `key = value` per line, `#` comments.
// Values keep their raw token string; typed getters parse on demand.
// ---------------------------------------------------------------------------

class KvFile {
 public:
  void set(const std::string& key, const std::string& value);
  void set_f64(const std::string& key, double v);
  void set_i64(const std::string& key, std::int64_t v);
  void set_u64_hex(const std::string& key, std::uint64_t v);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& dflt) const;
  double get_f64(const std::string& key) const;
  std::int64_t get_i64(const std::string& key) const;
  std::uint64_t get_u64_hex(const std::string& key) const;
  std::vector<double> get_f64_list(const std::string& key) const;

  // Keys are emitted in insertion order; parsing preserves file order.
  std::string serialize() const;
  static KvFile parse(const std::string& text);
  static KvFile load(const std::string& path);
  void save(const std::string& path) const;

  // Canonical form: keys sorted lexicographically. Makes the content hash
  // independent of key order in the file.
  std::uint64_t content_hash() const;

  const std::vector<std::string>& keys() const { return order_; }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

std::string format_f64(double v);  // shortest round-trip decimal

// ---------------------------------------------------------------------------
// Portable graymap (P5) output for luminance images, masks, probability maps.
// ---------------------------------------------------------------------------

void write_pgm(const std::string& path, const std::vector<double>& values,
               int height, int width, double scale_max);
void write_pgm_ids(const std::string& path, const std::vector<int>& ids,
                   int height, int width);

// Binary f32 grid (magic SGRD): probability/graspness maps for harnesses.
void write_f32_grid(const std::string& path, const std::vector<double>& values,
                    int height, int width, std::uint64_t config_hash);
std::vector<double> read_f32_grid(const std::string& path, int& height,
                                  int& width, std::uint64_t& config_hash);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace spikegrasp
