#include "spikegrasp/io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstring>
#include <fstream>
#include <sstream>

namespace spikegrasp {

// -------------------------------------------------------------------------
// binary primitives
// -------------------------------------------------------------------------

void write_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

void write_u16(std::ostream& os, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

static void read_bytes(std::istream& is, char* dst, std::size_t n) {
  is.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    fail(errc::io, "unexpected end of file");
}

std::uint8_t read_u8(std::istream& is) {
  char b;
  read_bytes(is, &b, 1);
  return static_cast<std::uint8_t>(b);
}

std::uint16_t read_u16(std::istream& is) {
  char b[2];
  read_bytes(is, b, 2);
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[0]) |
                                    (static_cast<unsigned char>(b[1]) << 8));
}

std::uint32_t read_u32(std::istream& is) {
  char b[4];
  read_bytes(is, b, 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i)
    v = (v << 8) | static_cast<unsigned char>(b[i]);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  char b[8];
  read_bytes(is, b, 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i)
    v = (v << 8) | static_cast<unsigned char>(b[i]);
  return v;
}

float read_f32(std::istream& is) {
  std::uint32_t bits = read_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double read_f64(std::istream& is) {
  std::uint64_t bits = read_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::uint64_t hash_file(const std::string& path) {
  std::string text = read_text_file(path);
  return fnv1a64(text);
}

// -------------------------------------------------------------------------
// key/value text
// -------------------------------------------------------------------------

void KvFile::set(const std::string& key, const std::string& value) {
  if (values_.find(key) == values_.end()) order_.push_back(key);
  values_[key] = value;
}

void KvFile::set_f64(const std::string& key, double v) {
  set(key, format_f64(v));
}

void KvFile::set_i64(const std::string& key, std::int64_t v) {
  set(key, std::to_string(v));
}

void KvFile::set_u64_hex(const std::string& key, std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "0x%016" PRIx64, v);
  set(key, buf);
}

bool KvFile::has(const std::string& key) const {
  return values_.find(key) != values_.end();
}

const std::string& KvFile::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(errc::config, "missing key: " + key);
  return it->second;
}

std::string KvFile::get_or(const std::string& key,
                           const std::string& dflt) const {
  auto it = values_.find(key);
  return it == values_.end() ? dflt : it->second;
}

double KvFile::get_f64(const std::string& key) const {
  const std::string& s = get(key);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) fail(errc::config, "bad number for key " + key);
  return v;
}

std::int64_t KvFile::get_i64(const std::string& key) const {
  const std::string& s = get(key);
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str()) fail(errc::config, "bad integer for key " + key);
  return v;
}

std::uint64_t KvFile::get_u64_hex(const std::string& key) const {
  const std::string& s = get(key);
  return std::strtoull(s.c_str(), nullptr, 0);
}

std::vector<double> KvFile::get_f64_list(const std::string& key) const {
  std::istringstream ss(get(key));
  std::vector<double> out;
  double v;
  while (ss >> v) out.push_back(v);
  return out;
}

std::string KvFile::serialize() const {
  std::string out;
  for (const auto& k : order_) {
    out += k;
    out += " = ";
    out += values_.at(k);
    out += "\n";
  }
  return out;
}

static std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

KvFile KvFile::parse(const std::string& text) {
  KvFile kv;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(errc::config, "bad line: " + line);
    kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

KvFile KvFile::load(const std::string& path) {
  return parse(read_text_file(path));
}

void KvFile::save(const std::string& path) const {
  write_text_file(path, serialize());
}

std::uint64_t KvFile::content_hash() const {
  std::vector<std::string> keys = order_;
  std::sort(keys.begin(), keys.end());
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& k : keys) {
    h = fnv1a64(k, h);
    h = fnv1a64("=", h);
    h = fnv1a64(values_.at(k), h);
    h = fnv1a64("\n", h);
  }
  return h;
}

std::string format_f64(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // prefer the shorter form when it round-trips
  for (int prec = 1; prec < 17; ++prec) {
    char s[40];
    std::snprintf(s, sizeof(s), "%.*g", prec, v);
    if (std::strtod(s, nullptr) == v) return s;
  }
  return buf;
}

// -------------------------------------------------------------------------
// images & grids
// -------------------------------------------------------------------------

void write_pgm(const std::string& path, const std::vector<double>& values,
               int height, int width, double scale_max) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(errc::io, "cannot open " + path);
  os << "P5\n" << width << " " << height << "\n255\n";
  for (double v : values) {
    double s = scale_max > 0.0 ? v / scale_max : v;
    if (s < 0.0) s = 0.0;
    if (s > 1.0) s = 1.0;
    os.put(static_cast<char>(static_cast<int>(s * 255.0 + 0.5)));
  }
}

void write_pgm_ids(const std::string& path, const std::vector<int>& ids,
                   int height, int width) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(errc::io, "cannot open " + path);
  os << "P5\n" << width << " " << height << "\n255\n";
  for (int v : ids) os.put(static_cast<char>(v < 0 ? 0 : (v > 255 ? 255 : v)));
}

void write_f32_grid(const std::string& path, const std::vector<double>& values,
                    int height, int width, std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(errc::io, "cannot open " + path);
  os.write("SGRD", 4);
  write_u16(os, 1);
  write_u32(os, static_cast<std::uint32_t>(height));
  write_u32(os, static_cast<std::uint32_t>(width));
  write_u64(os, config_hash);
  for (double v : values) write_f32(os, static_cast<float>(v));
}

std::vector<double> read_f32_grid(const std::string& path, int& height,
                                  int& width, std::uint64_t& config_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(errc::io, "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, "SGRD", 4) != 0)
    fail(errc::io, "not a grid file: " + path);
  std::uint16_t version = read_u16(is);
  if (version != 1) fail(errc::io, "unsupported grid version");
  height = static_cast<int>(read_u32(is));
  width = static_cast<int>(read_u32(is));
  config_hash = read_u64(is);
  std::vector<double> out(static_cast<std::size_t>(height) * width);
  for (auto& v : out) v = read_f32(is);
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(errc::io, "cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(errc::io, "cannot open " + path);
  os << text;
}

}  // namespace spikegrasp
