#include "binary_io.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>

namespace srvfgan::detail {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint32_t checksum(const unsigned char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void put_le(std::vector<unsigned char>& buf, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

BinaryWriter::BinaryWriter(std::string_view magic) {
  buf_.insert(buf_.end(), magic.begin(), magic.end());
  buf_.push_back(0);
}

void BinaryWriter::u64(std::uint64_t v) { put_le(buf_, v, 8); }

void BinaryWriter::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v), 8); }

void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void BinaryWriter::f64s(const double* data, std::size_t n) {
  buf_.reserve(buf_.size() + 8 * n);
  for (std::size_t i = 0; i < n; ++i) f64(data[i]);
}

void BinaryWriter::save(const std::filesystem::path& path) {
  std::vector<unsigned char> out = buf_;
  put_le(out, checksum(buf_.data(), buf_.size()), 4);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::IoError, "cannot open '" + tmp.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error(Errc::IoError, "failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::IoError, "cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

BinaryReader::BinaryReader(const std::filesystem::path& path, std::string_view magic, std::string_view family)
    : where_(path.string()) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open '" + where_ + "'");
  buf_.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());

  const std::size_t header = magic.size() + 1;
  const bool family_match = buf_.size() >= family.size() &&
                            std::memcmp(buf_.data(), family.data(), family.size()) == 0;
  const bool exact = buf_.size() >= header && std::memcmp(buf_.data(), magic.data(), magic.size()) == 0 &&
                     buf_[magic.size()] == 0;
  if (!exact) {
    if (family_match) throw Error(Errc::VersionMismatch, "'" + where_ + "' is not a " + std::string(magic) + " file");
    throw Error(Errc::CorruptFile, "'" + where_ + "' does not start with " + std::string(magic));
  }
  if (buf_.size() < header + 4) throw Error(Errc::CorruptFile, "'" + where_ + "' is truncated");
  end_ = buf_.size() - 4;
  const auto stored = static_cast<std::uint32_t>(get_le(buf_.data() + end_, 4));
  if (stored != checksum(buf_.data(), end_)) throw Error(Errc::CorruptFile, "'" + where_ + "' fails its checksum");
  pos_ = header;
}

void BinaryReader::need(std::size_t n) {
  if (n > end_ - pos_) throw Error(Errc::CorruptFile, "'" + where_ + "' ends early");
}

std::uint64_t BinaryReader::u64() {
  need(8);
  const auto v = get_le(buf_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
  const auto n = count(1);
  std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
  pos_ += n;
  return s;
}

void BinaryReader::f64s(double* data, std::size_t n) {
  need(8 * n);
  for (std::size_t i = 0; i < n; ++i) data[i] = f64();
}

Matrix BinaryReader::matrix(std::size_t rows, std::size_t cols) {
  if (cols != 0 && rows > (end_ - pos_) / 8 / cols) throw Error(Errc::CorruptFile, "'" + where_ + "' ends early");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  f64s(m.data(), rows * cols);
  return m;
}

std::uint64_t BinaryReader::count(std::size_t min_bytes_each) {
  const auto n = u64();
  if (min_bytes_each > 0 && n > (end_ - pos_) / min_bytes_each) {
    throw Error(Errc::CorruptFile, "'" + where_ + "' has an implausible length field");
  }
  return n;
}

}  // namespace srvfgan::detail
