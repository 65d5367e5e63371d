#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gwcl {

/// Plain-text sidecar header: one `key: value` per line, `#` comments.
/// Shared by every on-disk artifact (cubes, labels, graphs, models,
/// checkpoints), keeping all binary payloads self-describing.
class SidecarHeader {
 public:
  void set(const std::string& key, const std::string& value) { fields_[key] = value; }
  void set_int(const std::string& key, std::int64_t value);
  bool has(const std::string& key) const { return fields_.count(key) != 0; }
  const std::string& get(const std::string& key) const;  // throws if missing
  std::int64_t get_int(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;

  void save(const std::string& path) const;
  static SidecarHeader load(const std::string& path);

  const std::map<std::string, std::string>& fields() const { return fields_; }

 private:
  std::map<std::string, std::string> fields_;
};

/// Scalar element types accepted in raw payloads.
enum class Dtype { f32, f64, u16, i32, i64, u64 };

std::size_t dtype_size(Dtype t);
const char* dtype_name(Dtype t);
Dtype dtype_from_name(const std::string& name);

/// Reads a little-endian raw payload of `count` elements of type `dtype`
/// and widens it to double. Throws if the file size does not match.
std::vector<double> read_raw_as_double(const std::string& path, Dtype dtype,
                                       std::int64_t count);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const void* data, std::size_t size);

/// A named, typed, shaped array inside an ArrayBundle.
struct NamedArray {
  std::string name;
  Dtype dtype = Dtype::f64;
  std::vector<std::int64_t> shape;
  std::vector<std::uint8_t> bytes;  // little-endian payload

  std::int64_t element_count() const;

  static NamedArray from_f64(const std::string& name, const std::vector<double>& v,
                             std::vector<std::int64_t> shape);
  static NamedArray from_i32(const std::string& name, const std::vector<std::int32_t>& v,
                             std::vector<std::int64_t> shape);
  static NamedArray from_i64(const std::string& name, const std::vector<std::int64_t>& v,
                             std::vector<std::int64_t> shape);
  static NamedArray from_u64(const std::string& name, const std::vector<std::uint64_t>& v,
                             std::vector<std::int64_t> shape);

  std::vector<double> as_f64() const;
  std::vector<std::int32_t> as_i32() const;
  std::vector<std::int64_t> as_i64() const;
  std::vector<std::uint64_t> as_u64() const;
};

/// Ordered collection of named raw arrays persisted as `<stem>.bin` plus
/// `<stem>.hdr.txt`. Round-trips bit-exactly.
class ArrayBundle {
 public:
  void add(NamedArray array);
  bool has(const std::string& name) const;
  const NamedArray& get(const std::string& name) const;  // throws if missing
  const std::vector<NamedArray>& arrays() const { return arrays_; }

  /// Extra metadata carried in the sidecar under `meta.<key>`.
  void set_meta(const std::string& key, const std::string& value);
  std::string meta(const std::string& key) const;  // throws if missing
  bool has_meta(const std::string& key) const;

  void save(const std::string& stem) const;  // writes stem.bin + stem.hdr.txt
  static ArrayBundle load(const std::string& stem);

 private:
  std::vector<NamedArray> arrays_;
  std::map<std::string, std::string> meta_;
};

/// Little-endian scalar encode/decode helpers.
void le_store_u64(std::uint8_t* p, std::uint64_t v);
std::uint64_t le_load_u64(const std::uint8_t* p);
void le_store_u32(std::uint8_t* p, std::uint32_t v);
std::uint32_t le_load_u32(const std::uint8_t* p);
void le_store_u16(std::uint8_t* p, std::uint16_t v);
std::uint16_t le_load_u16(const std::uint8_t* p);

}  // namespace gwcl
