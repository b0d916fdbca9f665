#include <bit>
#include <cstring>
#include <fstream>

#include "lmtx/encoder.hpp"
#include "lmtx/error.hpp"
#include "lmtx/hashing.hpp"

namespace lmtx {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

constexpr char kMagic[4] = {'L', 'M', 'T', 'X'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::streamoff kChecksumOffset = 4 + sizeof(std::uint32_t) + 2 * sizeof(std::uint64_t);

class PayloadWriter {
 public:
  explicit PayloadWriter(std::ofstream& out) : out_(out) {}

  void bytes(const void* data, std::size_t size) {
    digest_.update(data, size);
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  }

  template <typename T>
  void value(T v) {
    bytes(&v, sizeof(T));
  }

  std::uint64_t checksum() const { return digest_.digest(); }

 private:
  std::ofstream& out_;
  Fnv1a64 digest_;
};

class PayloadReader {
 public:
  explicit PayloadReader(std::ifstream& in) : in_(in) {}

  void bytes(void* data, std::size_t size) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (in_.gcount() != static_cast<std::streamsize>(size)) {
      fail(ErrorCode::CorruptCheckpoint, "truncated checkpoint payload");
    }
    digest_.update(data, size);
  }

  template <typename T>
  T value() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }

  std::uint64_t checksum() const { return digest_.digest(); }

 private:
  std::ifstream& in_;
  Fnv1a64 digest_;
};

// Memory is column major; the file stores row-major D x H matrices.
template <typename Sink>
void write_row_major(Sink& sink, const std::vector<double>& column_major,
                     std::uint64_t hash_dim, std::uint64_t embed_dim) {
  std::vector<double> row(hash_dim);
  for (std::uint64_t d = 0; d < embed_dim; ++d) {
    for (std::uint64_t c = 0; c < hash_dim; ++c) row[c] = column_major[c * embed_dim + d];
    sink.bytes(row.data(), row.size() * sizeof(double));
  }
}

void read_row_major(PayloadReader& reader, std::vector<double>& column_major,
                    std::uint64_t hash_dim, std::uint64_t embed_dim) {
  column_major.resize(hash_dim * embed_dim);
  std::vector<double> row(hash_dim);
  for (std::uint64_t d = 0; d < embed_dim; ++d) {
    reader.bytes(row.data(), row.size() * sizeof(double));
    for (std::uint64_t c = 0; c < hash_dim; ++c) column_major[c * embed_dim + d] = row[c];
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const EncoderParams& params,
                     const AdamWState& opt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);

  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kFormatVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&params.hash_dim), sizeof(params.hash_dim));
  out.write(reinterpret_cast<const char*>(&params.embed_dim), sizeof(params.embed_dim));
  std::uint64_t checksum = 0;
  out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));

  PayloadWriter payload(out);
  write_row_major(payload, params.projection, params.hash_dim, params.embed_dim);
  write_row_major(payload, opt.m, params.hash_dim, params.embed_dim);
  write_row_major(payload, opt.v, params.hash_dim, params.embed_dim);
  payload.value(params.version);
  payload.value(params.init_seed);
  payload.value(opt.step);
  payload.value(opt.config.lr);
  payload.value(opt.config.weight_decay);
  payload.value(opt.config.beta1);
  payload.value(opt.config.beta2);
  payload.value(opt.config.eps);

  checksum = payload.checksum();
  out.seekp(kChecksumOffset);
  out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  if (!out) fail(ErrorCode::IoError, "write failed on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);

  char magic[4];
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorCode::CorruptCheckpoint, "bad magic in " + path);
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (in.gcount() != sizeof(version)) {
    fail(ErrorCode::CorruptCheckpoint, "truncated header in " + path);
  }
  if (version != kFormatVersion) {
    fail(ErrorCode::VersionMismatch,
         "checkpoint format " + std::to_string(version) + ", supported " +
             std::to_string(kFormatVersion));
  }

  Checkpoint ckpt;
  std::uint64_t stored_checksum = 0;
  in.read(reinterpret_cast<char*>(&ckpt.params.hash_dim), sizeof(std::uint64_t));
  in.read(reinterpret_cast<char*>(&ckpt.params.embed_dim), sizeof(std::uint64_t));
  in.read(reinterpret_cast<char*>(&stored_checksum), sizeof(stored_checksum));
  if (!in) fail(ErrorCode::CorruptCheckpoint, "truncated header in " + path);

  PayloadReader payload(in);
  read_row_major(payload, ckpt.params.projection, ckpt.params.hash_dim,
                 ckpt.params.embed_dim);
  read_row_major(payload, ckpt.opt.m, ckpt.params.hash_dim, ckpt.params.embed_dim);
  read_row_major(payload, ckpt.opt.v, ckpt.params.hash_dim, ckpt.params.embed_dim);
  ckpt.params.version = payload.value<std::uint32_t>();
  ckpt.params.init_seed = payload.value<std::uint64_t>();
  ckpt.opt.step = payload.value<std::uint64_t>();
  ckpt.opt.config.lr = payload.value<double>();
  ckpt.opt.config.weight_decay = payload.value<double>();
  ckpt.opt.config.beta1 = payload.value<double>();
  ckpt.opt.config.beta2 = payload.value<double>();
  ckpt.opt.config.eps = payload.value<double>();

  if (payload.checksum() != stored_checksum) {
    fail(ErrorCode::CorruptCheckpoint, "checksum mismatch in " + path);
  }
  char extra;
  if (in.read(&extra, 1).gcount() != 0) {
    fail(ErrorCode::CorruptCheckpoint, "trailing bytes in " + path);
  }
  return ckpt;
}

}  // namespace lmtx
