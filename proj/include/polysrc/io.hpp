#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "polysrc/direct.hpp"

namespace polysrc::io {

std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file(const std::string& path);

/// Little-endian binary buffer. write_with_digest() appends the SHA-256 of
/// the payload so readers can detect corruption.
class BinaryWriter {
 public:
  void bytes(const void* p, size_t n);
  void u32(uint32_t v) { bytes(&v, 4); }
  void u64(uint64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void doubles(const double* p, size_t n) { bytes(p, 8 * n); }
  /// Exactly `width` bytes, zero padded; throws if s is longer.
  void fixed_string(const std::string& s, size_t width);
  void write_with_digest(const std::string& path) const;
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class BinaryReader {
 public:
  /// Reads the file and checks its trailing digest (FormatError on mismatch).
  static BinaryReader open_with_digest(const std::string& path);

  void bytes(void* p, size_t n);
  uint32_t u32();
  uint64_t u64();
  double f64();
  void doubles(double* p, size_t n) { bytes(p, 8 * n); }
  std::string fixed_string(size_t width);
  void expect_end() const;

 private:
  std::string path_;
  std::vector<char> buf_;
  size_t pos_ = 0;
};

/// Flat binary field: magic "PSFIELD1", u32 dtype (1 = float64, 2 =
/// complex128), u32 rank, u64 dims[rank], payload in row-major order.
void write_field(const std::string& path, const std::vector<double>& values,
                 const std::vector<uint64_t>& dims);
void write_field(const std::string& path, const std::vector<cplx>& values,
                 const std::vector<uint64_t>& dims);
struct FieldFile {
  uint32_t dtype = 1;
  std::vector<uint64_t> dims;
  std::vector<double> data;  // interleaved re/im for complex
};
FieldFile read_field(const std::string& path);

/// Trace archive: magic "PSTRACE1", config hash (64 bytes), u32 n, u64
/// nodes, u64 count; then per realization a u64 realization index followed
/// by nodes * n records (u32 node, u32 j, complex D, complex N); trailing
/// SHA-256 of everything before it.
class TraceArchiveWriter {
 public:
  TraceArchiveWriter(const std::string& path, const std::string& config_hash, int n, size_t nodes,
                     uint64_t count);
  ~TraceArchiveWriter();
  void write(const direct::BoundaryTrace& trace);
  /// Writes the digest; the archive is invalid until this is called.
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class TraceArchiveReader {
 public:
  /// Verifies the digest before returning.
  explicit TraceArchiveReader(const std::string& path);
  ~TraceArchiveReader();

  const std::string& config_hash() const { return hash_; }
  int n() const { return n_; }
  size_t nodes() const { return nodes_; }
  uint64_t count() const { return count_; }
  /// Next trace, false at the end.
  bool next(direct::BoundaryTrace& trace);

 private:
  std::ifstream in_;
  std::string hash_;
  int n_ = 0;
  size_t nodes_ = 0;
  uint64_t count_ = 0;
  uint64_t read_ = 0;
};

}  // namespace polysrc::io
