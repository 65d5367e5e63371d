#include "gwcl/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gwcl {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void SidecarHeader::set_int(const std::string& key, std::int64_t value) {
  fields_[key] = std::to_string(value);
}

const std::string& SidecarHeader::get(const std::string& key) const {
  auto it = fields_.find(key);
  if (it == fields_.end()) {
    throw std::runtime_error("header field missing: " + key);
  }
  return it->second;
}

std::int64_t SidecarHeader::get_int(const std::string& key) const {
  const std::string& v = get(key);
  std::size_t pos = 0;
  const std::int64_t out = std::stoll(v, &pos);
  if (pos != v.size()) throw std::runtime_error("header field not an integer: " + key + "=" + v);
  return out;
}

std::string SidecarHeader::get_or(const std::string& key, const std::string& fallback) const {
  auto it = fields_.find(key);
  return it == fields_.end() ? fallback : it->second;
}

void SidecarHeader::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open header for writing: " + path);
  for (const auto& [k, v] : fields_) out << k << ": " << v << "\n";
}

SidecarHeader SidecarHeader::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open header: " + path);
  SidecarHeader h;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t colon = t.find(':');
    if (colon == std::string::npos) throw std::runtime_error("malformed header line: " + line);
    h.set(trim(t.substr(0, colon)), trim(t.substr(colon + 1)));
  }
  return h;
}

std::size_t dtype_size(Dtype t) {
  switch (t) {
    case Dtype::f32: return 4;
    case Dtype::f64: return 8;
    case Dtype::u16: return 2;
    case Dtype::i32: return 4;
    case Dtype::i64: return 8;
    case Dtype::u64: return 8;
  }
  throw std::logic_error("unknown dtype");
}

const char* dtype_name(Dtype t) {
  switch (t) {
    case Dtype::f32: return "f32";
    case Dtype::f64: return "f64";
    case Dtype::u16: return "u16";
    case Dtype::i32: return "i32";
    case Dtype::i64: return "i64";
    case Dtype::u64: return "u64";
  }
  throw std::logic_error("unknown dtype");
}

Dtype dtype_from_name(const std::string& name) {
  if (name == "f32") return Dtype::f32;
  if (name == "f64") return Dtype::f64;
  if (name == "u16") return Dtype::u16;
  if (name == "i32") return Dtype::i32;
  if (name == "i64") return Dtype::i64;
  if (name == "u64") return Dtype::u64;
  throw std::runtime_error("unsupported dtype: " + name);
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw std::runtime_error("short read: " + path);
  }
  return bytes;
}

void write_file_bytes(const std::string& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw std::runtime_error("short write: " + path);
}

void le_store_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
std::uint64_t le_load_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}
void le_store_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
std::uint32_t le_load_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
void le_store_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}
std::uint16_t le_load_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::vector<double> read_raw_as_double(const std::string& path, Dtype dtype,
                                       std::int64_t count) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  const std::size_t expected = static_cast<std::size_t>(count) * dtype_size(dtype);
  if (bytes.size() != expected) {
    throw std::runtime_error("payload size mismatch for " + path + ": header implies " +
                             std::to_string(expected) + " bytes, file has " +
                             std::to_string(bytes.size()));
  }
  std::vector<double> out(static_cast<std::size_t>(count));
  const std::uint8_t* p = bytes.data();
  switch (dtype) {
    case Dtype::f32:
      for (std::int64_t i = 0; i < count; ++i) {
        out[i] = std::bit_cast<float>(le_load_u32(p + 4 * i));
      }
      break;
    case Dtype::f64:
      for (std::int64_t i = 0; i < count; ++i) {
        out[i] = std::bit_cast<double>(le_load_u64(p + 8 * i));
      }
      break;
    case Dtype::u16:
      for (std::int64_t i = 0; i < count; ++i) {
        out[i] = static_cast<double>(le_load_u16(p + 2 * i));
      }
      break;
    default:
      throw std::runtime_error("raster payloads must be f32, f64 or u16");
  }
  return out;
}

std::int64_t NamedArray::element_count() const {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  return n;
}

NamedArray NamedArray::from_f64(const std::string& name, const std::vector<double>& v,
                                std::vector<std::int64_t> shape) {
  NamedArray a{name, Dtype::f64, std::move(shape), {}};
  a.bytes.resize(v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    le_store_u64(a.bytes.data() + 8 * i, std::bit_cast<std::uint64_t>(v[i]));
  }
  if (a.element_count() != static_cast<std::int64_t>(v.size())) {
    throw std::invalid_argument("array shape does not match data size: " + name);
  }
  return a;
}

NamedArray NamedArray::from_i32(const std::string& name, const std::vector<std::int32_t>& v,
                                std::vector<std::int64_t> shape) {
  NamedArray a{name, Dtype::i32, std::move(shape), {}};
  a.bytes.resize(v.size() * 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    le_store_u32(a.bytes.data() + 4 * i, static_cast<std::uint32_t>(v[i]));
  }
  if (a.element_count() != static_cast<std::int64_t>(v.size())) {
    throw std::invalid_argument("array shape does not match data size: " + name);
  }
  return a;
}

NamedArray NamedArray::from_i64(const std::string& name, const std::vector<std::int64_t>& v,
                                std::vector<std::int64_t> shape) {
  NamedArray a{name, Dtype::i64, std::move(shape), {}};
  a.bytes.resize(v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    le_store_u64(a.bytes.data() + 8 * i, static_cast<std::uint64_t>(v[i]));
  }
  if (a.element_count() != static_cast<std::int64_t>(v.size())) {
    throw std::invalid_argument("array shape does not match data size: " + name);
  }
  return a;
}

NamedArray NamedArray::from_u64(const std::string& name, const std::vector<std::uint64_t>& v,
                                std::vector<std::int64_t> shape) {
  NamedArray a{name, Dtype::u64, std::move(shape), {}};
  a.bytes.resize(v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i) le_store_u64(a.bytes.data() + 8 * i, v[i]);
  if (a.element_count() != static_cast<std::int64_t>(v.size())) {
    throw std::invalid_argument("array shape does not match data size: " + name);
  }
  return a;
}

std::vector<double> NamedArray::as_f64() const {
  if (dtype != Dtype::f64) throw std::runtime_error("array " + name + " is not f64");
  std::vector<double> v(bytes.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = std::bit_cast<double>(le_load_u64(bytes.data() + 8 * i));
  }
  return v;
}

std::vector<std::int32_t> NamedArray::as_i32() const {
  if (dtype != Dtype::i32) throw std::runtime_error("array " + name + " is not i32");
  std::vector<std::int32_t> v(bytes.size() / 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = static_cast<std::int32_t>(le_load_u32(bytes.data() + 4 * i));
  }
  return v;
}

std::vector<std::int64_t> NamedArray::as_i64() const {
  if (dtype != Dtype::i64) throw std::runtime_error("array " + name + " is not i64");
  std::vector<std::int64_t> v(bytes.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = static_cast<std::int64_t>(le_load_u64(bytes.data() + 8 * i));
  }
  return v;
}

std::vector<std::uint64_t> NamedArray::as_u64() const {
  if (dtype != Dtype::u64) throw std::runtime_error("array " + name + " is not u64");
  std::vector<std::uint64_t> v(bytes.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = le_load_u64(bytes.data() + 8 * i);
  return v;
}

void ArrayBundle::add(NamedArray array) {
  if (has(array.name)) throw std::invalid_argument("duplicate array name: " + array.name);
  arrays_.push_back(std::move(array));
}

bool ArrayBundle::has(const std::string& name) const {
  for (const auto& a : arrays_) {
    if (a.name == name) return true;
  }
  return false;
}

const NamedArray& ArrayBundle::get(const std::string& name) const {
  for (const auto& a : arrays_) {
    if (a.name == name) return a;
  }
  throw std::runtime_error("bundle has no array named " + name);
}

void ArrayBundle::set_meta(const std::string& key, const std::string& value) {
  meta_[key] = value;
}

std::string ArrayBundle::meta(const std::string& key) const {
  auto it = meta_.find(key);
  if (it == meta_.end()) throw std::runtime_error("bundle meta missing: " + key);
  return it->second;
}

bool ArrayBundle::has_meta(const std::string& key) const { return meta_.count(key) != 0; }

void ArrayBundle::save(const std::string& stem) const {
  SidecarHeader h;
  h.set_int("arrays", static_cast<std::int64_t>(arrays_.size()));
  std::size_t total = 0;
  for (std::size_t i = 0; i < arrays_.size(); ++i) {
    const NamedArray& a = arrays_[i];
    std::ostringstream desc;
    desc << a.name << " " << dtype_name(a.dtype);
    for (std::int64_t d : a.shape) desc << " " << d;
    h.set("array" + std::to_string(i), desc.str());
    total += a.bytes.size();
  }
  for (const auto& [k, v] : meta_) h.set("meta." + k, v);
  h.save(stem + ".hdr.txt");

  std::vector<std::uint8_t> payload;
  payload.reserve(total);
  for (const auto& a : arrays_) payload.insert(payload.end(), a.bytes.begin(), a.bytes.end());
  write_file_bytes(stem + ".bin", payload.data(), payload.size());
}

ArrayBundle ArrayBundle::load(const std::string& stem) {
  const SidecarHeader h = SidecarHeader::load(stem + ".hdr.txt");
  const std::vector<std::uint8_t> payload = read_file_bytes(stem + ".bin");
  ArrayBundle b;
  const std::int64_t n = h.get_int("arrays");
  std::size_t offset = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    std::istringstream desc(h.get("array" + std::to_string(i)));
    NamedArray a;
    std::string dtype;
    desc >> a.name >> dtype;
    a.dtype = dtype_from_name(dtype);
    std::int64_t d = 0;
    while (desc >> d) a.shape.push_back(d);
    const std::size_t nbytes =
        static_cast<std::size_t>(a.element_count()) * dtype_size(a.dtype);
    if (offset + nbytes > payload.size()) {
      throw std::runtime_error("bundle payload truncated: " + stem);
    }
    a.bytes.assign(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                   payload.begin() + static_cast<std::ptrdiff_t>(offset + nbytes));
    offset += nbytes;
    b.add(std::move(a));
  }
  if (offset != payload.size()) {
    throw std::runtime_error("bundle payload has trailing bytes: " + stem);
  }
  for (const auto& [k, v] : h.fields()) {
    if (k.rfind("meta.", 0) == 0) b.meta_[k.substr(5)] = v;
  }
  return b;
}

}  // namespace gwcl
