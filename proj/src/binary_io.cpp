#include "fguap/binary_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <system_error>

#include <zlib.h>

#include "fguap/errors.hpp"

namespace fguap::io {

using Kind = FormatError::Kind;

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(Kind::kIo, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(Kind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw FormatError(Kind::kIo, "write failed for " + path.string());
}

void Writer::u16(std::uint16_t v) {
  buf_.push_back(static_cast<std::uint8_t>(v));
  buf_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void Writer::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::f64(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

void Writer::raw(std::string_view bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

void Writer::raw(const std::uint8_t* data, std::size_t size) {
  buf_.insert(buf_.end(), data, data + size);
}

void Writer::crc_from(std::size_t skip) {
  u32(crc32(buf_.data() + skip, buf_.size() - skip));
}

void Reader::need(std::size_t n) const {
  if (remaining() < n) {
    throw FormatError(Kind::kTruncated,
                      "truncated payload: needed " + std::to_string(n) +
                          " bytes at offset " + std::to_string(pos_) + ", " +
                          std::to_string(remaining()) + " left");
  }
}

std::uint16_t Reader::u16() {
  need(2);
  const auto v = static_cast<std::uint16_t>(buf_[pos_] | (buf_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

std::uint32_t Reader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

double Reader::f64() {
  need(8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return std::bit_cast<double>(bits);
}

std::string Reader::raw(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
  pos_ += n;
  return s;
}

void Reader::expect_crc_from(std::size_t skip) {
  const std::size_t end = pos_;
  const std::uint32_t stored = u32();
  const std::uint32_t actual = crc32(buf_.data() + skip, end - skip);
  if (stored != actual) {
    throw FormatError(Kind::kChecksum, "checksum mismatch: stored " +
                                           std::to_string(stored) + ", computed " +
                                           std::to_string(actual));
  }
}

void Reader::expect_end() const {
  if (remaining() != 0) {
    throw FormatError(Kind::kMalformedHeader,
                      std::to_string(remaining()) + " trailing bytes after checksum");
  }
}

std::string format_metadata(const Metadata& meta) {
  std::string out;
  for (const auto& [key, value] : meta) {
    if (key.empty() || key.find_first_of(":\n") != std::string::npos ||
        value.find('\n') != std::string::npos) {
      throw ArgumentError("metadata entry not representable: '" + key + "'");
    }
    out += key;
    out += ": ";
    out += value;
    out += '\n';
  }
  return out;
}

Metadata parse_metadata(std::string_view text) {
  Metadata meta;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    const std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) {
      throw FormatError(Kind::kMalformedHeader,
                        "metadata line without key: '" + std::string(line) + "'");
    }
    std::string_view value = line.substr(colon + 1);
    if (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    meta.emplace(std::string(line.substr(0, colon)), std::string(value));
  }
  return meta;
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ArgumentError("not a real number: '" + std::string(text) + "'");
  }
  return v;
}

Bytes encode_container(std::string_view magic, const Container& c) {
  Writer w;
  w.raw(magic);
  w.u32(kContainerVersion);
  const std::string meta = format_metadata(c.metadata);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.raw(meta);
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, tensor] : c.tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name);
    w.u32(static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.dims()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : tensor.data()) w.f64(v);
  }
  w.crc_from(magic.size());
  return std::move(w.bytes());
}

Container decode_container(std::string_view magic, const Bytes& bytes,
                           std::string_view what) {
  const std::string kind(what);
  if (bytes.size() < magic.size() ||
      std::memcmp(bytes.data(), magic.data(), magic.size()) != 0) {
    throw FormatError(Kind::kBadMagic, "not a " + kind + " file (bad magic)");
  }
  Reader r(bytes);
  r.raw(magic.size());
  const std::uint32_t version = r.u32();
  if (version != kContainerVersion) {
    throw FormatError(Kind::kVersion, kind + " version " + std::to_string(version) +
                                          " unsupported (expected " +
                                          std::to_string(kContainerVersion) + ")");
  }
  Container c;
  const std::uint32_t meta_len = r.u32();
  c.metadata = parse_metadata(r.raw(meta_len));
  const std::uint32_t count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    NamedTensor nt;
    nt.name = r.raw(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank > 4) {
      throw FormatError(Kind::kTensorShape,
                        kind + " tensor '" + nt.name + "' has rank " + std::to_string(rank));
    }
    Shape dims(rank);
    for (auto& d : dims) {
      d = r.u32();
      if (d == 0) {
        throw FormatError(Kind::kTensorShape,
                          kind + " tensor '" + nt.name + "' has a zero-length axis");
      }
    }
    const std::size_t n = shape_numel(dims);
    if (n > r.remaining() / 8) {
      throw FormatError(Kind::kTruncated, "truncated payload: " + kind + " tensor '" +
                                              nt.name + "' declares " +
                                              std::to_string(n) + " values");
    }
    std::vector<double> data(n);
    for (auto& v : data) v = r.f64();
    nt.tensor = Tensor(std::move(dims), std::move(data));
    c.tensors.push_back(std::move(nt));
  }
  r.expect_crc_from(magic.size());
  r.expect_end();
  return c;
}

}  // namespace fguap::io
