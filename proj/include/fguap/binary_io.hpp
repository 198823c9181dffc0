#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fguap/tensor.hpp"

namespace fguap::io {

using Bytes = std::vector<std::uint8_t>;

std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

Bytes read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: truncate then write, then check
/// the stream. Throws FormatError(kIo) on failure.
void write_file(const std::filesystem::path& path, const Bytes& bytes);

/// Little-endian encoder.
class Writer {
 public:
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void f64(double v);
  void raw(std::string_view bytes);
  void raw(const std::uint8_t* data, std::size_t size);
  /// Appends the CRC32 of everything written after the first `skip` bytes.
  void crc_from(std::size_t skip);

  Bytes& bytes() noexcept { return buf_; }
  std::size_t size() const noexcept { return buf_.size(); }

 private:
  Bytes buf_;
};

/// Little-endian decoder over a byte buffer. Reading past the end throws
/// FormatError(kTruncated).
class Reader {
 public:
  explicit Reader(const Bytes& bytes) : buf_(bytes) {}

  std::uint16_t u16();
  std::uint32_t u32();
  double f64();
  std::string raw(std::size_t n);
  /// Reads the trailing CRC32 and compares it against the bytes in
  /// [skip, position before the CRC). Throws FormatError(kChecksum).
  void expect_crc_from(std::size_t skip);
  void expect_end() const;

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }

 private:
  void need(std::size_t n) const;

  const Bytes& buf_;
  std::size_t pos_ = 0;
};

/// key:value lines, one per entry, UTF-8.
using Metadata = std::map<std::string, std::string>;

std::string format_metadata(const Metadata& meta);
Metadata parse_metadata(std::string_view text);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_real(double v);
double parse_real(std::string_view text);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Layout shared by checkpoints and perturbation files:
///   magic[8] | u32 version | u32 meta_len | meta | u32 count |
///   count x (u32 name_len | name | u32 rank | rank x u32 dim | f64 data...) |
///   u32 crc32 of everything after the magic.
struct Container {
  Metadata metadata;
  std::vector<NamedTensor> tensors;
};

inline constexpr std::uint32_t kContainerVersion = 1;

Bytes encode_container(std::string_view magic, const Container& c);
/// `what` names the file kind in error messages ("checkpoint", ...).
Container decode_container(std::string_view magic, const Bytes& bytes,
                           std::string_view what);

}  // namespace fguap::io
