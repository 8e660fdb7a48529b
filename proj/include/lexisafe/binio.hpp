#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lexisafe/errors.hpp"

namespace lexisafe::binio {

static_assert(std::endian::native == std::endian::little, "on-disk containers are little-endian");

std::vector<unsigned char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes);

class ByteWriter {
 public:
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void put_u32(std::uint32_t x) { put_bytes(&x, sizeof x); }
  void put_u64(std::uint64_t x) { put_bytes(&x, sizeof x); }
  template <typename T>
  void put_array(std::span<const T> xs) {
    put_bytes(xs.data(), xs.size_bytes());
  }
  std::vector<unsigned char>& bytes() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::uint32_t get_u32() {
    std::uint32_t x;
    get_raw(&x, sizeof x);
    return x;
  }
  template <typename T>
  std::vector<T> get_array(std::size_t n) {
    std::vector<T> xs(n);
    get_raw(xs.data(), n * sizeof(T));
    return xs;
  }
  std::string get_string(std::size_t n) {
    std::string s(n, '\0');
    get_raw(s.data(), n);
    return s;
  }

 private:
  void get_raw(void* out, std::size_t n) {
    if (n > remaining()) throw DataError(DataErrorKind::truncated_columns, "unexpected end of payload");
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

/// Layout shared by every on-disk container:
///   magic[4] | version u32 | header_len u32 | header JSON | payload | FNV-1a64 u64
/// The payload length is derived from the header by the caller.
struct Container {
  std::string header_json;
  std::vector<unsigned char> payload;
};

std::vector<unsigned char> encode_container(std::string_view magic, std::uint32_t version,
                                            const std::string& header_json, std::span<const unsigned char> payload);

std::uint64_t checksum(std::span<const unsigned char> bytes);

// Implementation detail of decode_container.
Container decode_prefix(std::span<const unsigned char> bytes, std::string_view magic, std::uint32_t version,
                        std::size_t& header_end);
void check_payload(std::span<const unsigned char> bytes, std::size_t header_end, std::size_t expected_payload,
                   Container& out);

/// Parses the fixed prefix and header. payload_size(header_json) must return
/// the number of payload bytes the header promises; the file is checked
/// against it before the checksum.
template <typename PayloadSize>
Container decode_container(std::span<const unsigned char> bytes, std::string_view magic, std::uint32_t version,
                           PayloadSize payload_size) {
  std::size_t header_end = 0;
  Container c = decode_prefix(bytes, magic, version, header_end);
  check_payload(bytes, header_end, payload_size(c.header_json), c);
  return c;
}

}  // namespace lexisafe::binio
