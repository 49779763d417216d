#include "polysrc/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstring>
#include <iterator>

#include "polysrc/errors.hpp"

namespace polysrc::io {

namespace {

constexpr size_t kDigestLen = 32;

struct Sha256 {
  Sha256() : ctx(EVP_MD_CTX_new()) {
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("SHA-256 initialisation failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  void update(const void* p, size_t n) { EVP_DigestUpdate(ctx, p, n); }
  std::array<unsigned char, kDigestLen> finish() {
    std::array<unsigned char, kDigestLen> out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, out.data(), &len);
    return out;
  }
  EVP_MD_CTX* ctx;
};

std::string to_hex(const unsigned char* d, size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string s(2 * n, '0');
  for (size_t i = 0; i < n; ++i) {
    s[2 * i] = digits[d[i] >> 4];
    s[2 * i + 1] = digits[d[i] & 15];
  }
  return s;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

constexpr char kFieldMagic[8] = {'P', 'S', 'F', 'I', 'E', 'L', 'D', '1'};
constexpr char kTraceMagic[8] = {'P', 'S', 'T', 'R', 'A', 'C', 'E', '1'};

}  // namespace

std::string sha256_hex(const void* data, size_t len) {
  Sha256 h;
  h.update(data, len);
  const auto d = h.finish();
  return to_hex(d.data(), d.size());
}

std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  Sha256 h;
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<size_t>(in.gcount()));
  }
  const auto d = h.finish();
  return to_hex(d.data(), d.size());
}

void BinaryWriter::bytes(const void* p, size_t n) {
  const char* c = static_cast<const char*>(p);
  buf_.insert(buf_.end(), c, c + n);
}

void BinaryWriter::fixed_string(const std::string& s, size_t width) {
  if (s.size() > width) throw FormatError("string too long for fixed-width field");
  bytes(s.data(), s.size());
  buf_.insert(buf_.end(), width - s.size(), '\0');
}

void BinaryWriter::write_with_digest(const std::string& path) const {
  Sha256 h;
  h.update(buf_.data(), buf_.size());
  const auto d = h.finish();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  out.write(reinterpret_cast<const char*>(d.data()), kDigestLen);
  if (!out) throw FormatError("write failed for " + path);
}

BinaryReader BinaryReader::open_with_digest(const std::string& path) {
  BinaryReader r;
  r.path_ = path;
  r.buf_ = slurp(path);
  if (r.buf_.size() < kDigestLen) throw FormatError(path + ": file too short");
  const size_t body = r.buf_.size() - kDigestLen;
  Sha256 h;
  h.update(r.buf_.data(), body);
  const auto d = h.finish();
  if (std::memcmp(d.data(), r.buf_.data() + body, kDigestLen) != 0) {
    throw FormatError(path + ": checksum mismatch (file corrupted)");
  }
  r.buf_.resize(body);
  return r;
}

void BinaryReader::bytes(void* p, size_t n) {
  if (pos_ + n > buf_.size()) throw FormatError(path_ + ": unexpected end of data");
  std::memcpy(p, buf_.data() + pos_, n);
  pos_ += n;
}

uint32_t BinaryReader::u32() {
  uint32_t v;
  bytes(&v, 4);
  return v;
}

uint64_t BinaryReader::u64() {
  uint64_t v;
  bytes(&v, 8);
  return v;
}

double BinaryReader::f64() {
  double v;
  bytes(&v, 8);
  return v;
}

std::string BinaryReader::fixed_string(size_t width) {
  std::string s(width, '\0');
  bytes(s.data(), width);
  s.resize(std::strlen(s.c_str()));
  return s;
}

void BinaryReader::expect_end() const {
  if (pos_ != buf_.size()) throw FormatError(path_ + ": trailing bytes");
}

namespace {

void write_field_raw(const std::string& path, uint32_t dtype, const double* data, size_t count,
                     const std::vector<uint64_t>& dims) {
  uint64_t total = 1;
  for (uint64_t d : dims) total *= d;
  const size_t per = dtype == 2 ? 2 : 1;
  if (total * per != count) throw ShapeMismatchError("field dims do not match the data length");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out.write(kFieldMagic, 8);
  const uint32_t rank = static_cast<uint32_t>(dims.size());
  out.write(reinterpret_cast<const char*>(&dtype), 4);
  out.write(reinterpret_cast<const char*>(&rank), 4);
  out.write(reinterpret_cast<const char*>(dims.data()), static_cast<std::streamsize>(8 * rank));
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(8 * count));
  if (!out) throw FormatError("write failed for " + path);
}

}  // namespace

void write_field(const std::string& path, const std::vector<double>& values,
                 const std::vector<uint64_t>& dims) {
  write_field_raw(path, 1, values.data(), values.size(), dims);
}

void write_field(const std::string& path, const std::vector<cplx>& values,
                 const std::vector<uint64_t>& dims) {
  write_field_raw(path, 2, reinterpret_cast<const double*>(values.data()), 2 * values.size(), dims);
}

FieldFile read_field(const std::string& path) {
  const std::vector<char> buf = slurp(path);
  size_t pos = 0;
  auto take = [&](void* p, size_t n) {
    if (pos + n > buf.size()) throw FormatError(path + ": truncated field file");
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  };
  char magic[8];
  take(magic, 8);
  if (std::memcmp(magic, kFieldMagic, 8) != 0) throw FormatError(path + ": bad field magic");
  FieldFile f;
  uint32_t rank = 0;
  take(&f.dtype, 4);
  take(&rank, 4);
  if ((f.dtype != 1 && f.dtype != 2) || rank > 8) throw FormatError(path + ": bad field header");
  f.dims.resize(rank);
  take(f.dims.data(), 8 * rank);
  uint64_t total = f.dtype == 2 ? 2 : 1;
  for (uint64_t d : f.dims) total *= d;
  f.data.resize(total);
  take(f.data.data(), 8 * total);
  if (pos != buf.size()) throw FormatError(path + ": trailing bytes in field file");
  return f;
}

// ------------------------------------------------------------ trace archive

struct TraceArchiveWriter::Impl {
  std::ofstream out;
  Sha256 hash;
  std::string path;
  int n = 0;
  size_t nodes = 0;
  uint64_t expected = 0;
  uint64_t written = 0;
  bool closed = false;

  void put(const void* p, size_t len) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(len));
    hash.update(p, len);
  }
};

TraceArchiveWriter::TraceArchiveWriter(const std::string& path, const std::string& config_hash,
                                       int n, size_t nodes, uint64_t count)
    : impl_(std::make_unique<Impl>()) {
  impl_->path = path;
  impl_->out.open(path, std::ios::binary | std::ios::trunc);
  if (!impl_->out) throw FormatError("cannot write " + path);
  impl_->n = n;
  impl_->nodes = nodes;
  impl_->expected = count;
  impl_->put(kTraceMagic, 8);
  char hash[64] = {};
  std::memcpy(hash, config_hash.data(), std::min<size_t>(64, config_hash.size()));
  impl_->put(hash, 64);
  const uint32_t n32 = static_cast<uint32_t>(n);
  const uint64_t nodes64 = nodes;
  impl_->put(&n32, 4);
  impl_->put(&nodes64, 8);
  impl_->put(&count, 8);
}

TraceArchiveWriter::~TraceArchiveWriter() = default;

void TraceArchiveWriter::write(const direct::BoundaryTrace& trace) {
  if (trace.n != impl_->n || trace.nodes != impl_->nodes) {
    throw ShapeMismatchError("trace shape does not match the archive");
  }
  if (impl_->written == impl_->expected) throw FormatError("archive already holds every trace");
  impl_->put(&trace.realization, 8);
  for (size_t p = 0; p < trace.nodes; ++p) {
    for (int j = 0; j < trace.n; ++j) {
      const uint32_t node = static_cast<uint32_t>(p), jj = static_cast<uint32_t>(j);
      const cplx d = trace.dirichlet(j, p), nn = trace.neumann(j, p);
      const double rec[4] = {d.real(), d.imag(), nn.real(), nn.imag()};
      impl_->put(&node, 4);
      impl_->put(&jj, 4);
      impl_->put(rec, sizeof(rec));
    }
  }
  ++impl_->written;
}

void TraceArchiveWriter::close() {
  if (impl_->closed) return;
  if (impl_->written != impl_->expected) {
    throw FormatError("archive closed with " + std::to_string(impl_->written) + " of " +
                      std::to_string(impl_->expected) + " traces");
  }
  const auto d = impl_->hash.finish();
  impl_->out.write(reinterpret_cast<const char*>(d.data()), kDigestLen);
  impl_->out.close();
  if (!impl_->out) throw FormatError("write failed for " + impl_->path);
  impl_->closed = true;
}

TraceArchiveReader::TraceArchiveReader(const std::string& path) {
  {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError("missing trace archive " + path);
    const auto size = static_cast<size_t>(in.tellg());
    if (size < 8 + 64 + 20 + kDigestLen) throw FormatError(path + ": archive too short");
    in.seekg(0);
    Sha256 h;
    std::vector<char> buf(1 << 20);
    size_t left = size - kDigestLen;
    while (left > 0) {
      const size_t chunk = std::min(left, buf.size());
      in.read(buf.data(), static_cast<std::streamsize>(chunk));
      h.update(buf.data(), chunk);
      left -= chunk;
    }
    unsigned char stored[kDigestLen];
    in.read(reinterpret_cast<char*>(stored), kDigestLen);
    const auto d = h.finish();
    if (!in || std::memcmp(stored, d.data(), kDigestLen) != 0) {
      throw FormatError(path + ": checksum mismatch (archive corrupted)");
    }
  }
  in_.open(path, std::ios::binary);
  char magic[8];
  in_.read(magic, 8);
  if (std::memcmp(magic, kTraceMagic, 8) != 0) throw FormatError(path + ": not a trace archive");
  char hash[65] = {};
  in_.read(hash, 64);
  hash_ = hash;
  uint32_t n32 = 0;
  uint64_t nodes = 0;
  in_.read(reinterpret_cast<char*>(&n32), 4);
  in_.read(reinterpret_cast<char*>(&nodes), 8);
  in_.read(reinterpret_cast<char*>(&count_), 8);
  n_ = static_cast<int>(n32);
  nodes_ = nodes;
}

TraceArchiveReader::~TraceArchiveReader() = default;

bool TraceArchiveReader::next(direct::BoundaryTrace& trace) {
  if (read_ == count_) return false;
  trace.n = n_;
  trace.nodes = nodes_;
  trace.data.resize(static_cast<Eigen::Index>(2 * n_ * nodes_));
  in_.read(reinterpret_cast<char*>(&trace.realization), 8);
  for (size_t p = 0; p < nodes_; ++p) {
    for (int j = 0; j < n_; ++j) {
      uint32_t node = 0, jj = 0;
      double rec[4];
      in_.read(reinterpret_cast<char*>(&node), 4);
      in_.read(reinterpret_cast<char*>(&jj), 4);
      in_.read(reinterpret_cast<char*>(rec), sizeof(rec));
      if (!in_ || node >= nodes_ || jj >= static_cast<uint32_t>(n_)) {
        throw FormatError("malformed trace record");
      }
      trace.data[static_cast<Eigen::Index>(jj * nodes_ + node)] = cplx(rec[0], rec[1]);
      trace.data[static_cast<Eigen::Index>((n_ + jj) * nodes_ + node)] = cplx(rec[2], rec[3]);
    }
  }
  ++read_;
  return true;
}

}  // namespace polysrc::io
