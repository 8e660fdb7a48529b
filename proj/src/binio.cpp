#include "lexisafe/binio.hpp"

#include <fstream>
#include <iterator>

#include "lexisafe/rng.hpp"

namespace lexisafe {

const char* to_string(DataErrorKind kind) {
  switch (kind) {
    case DataErrorKind::io:
      return "io error";
    case DataErrorKind::bad_magic:
      return "bad magic";
    case DataErrorKind::version_mismatch:
      return "version mismatch";
    case DataErrorKind::truncated_columns:
      return "truncated columns";
    case DataErrorKind::length_disagreement:
      return "header/column length disagreement";
    case DataErrorKind::checksum_mismatch:
      return "checksum mismatch";
    case DataErrorKind::bad_header:
      return "bad header";
    case DataErrorKind::dims_mismatch:
      return "dims mismatch";
  }
  return "data error";
}

namespace binio {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorKind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrorKind::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(DataErrorKind::io, "short write to " + path.string());
}

std::uint64_t checksum(std::span<const unsigned char> bytes) { return fnv1a64(bytes); }

std::vector<unsigned char> encode_container(std::string_view magic, std::uint32_t version,
                                            const std::string& header_json, std::span<const unsigned char> payload) {
  ByteWriter w;
  w.put_bytes(magic.data(), 4);
  w.put_u32(version);
  w.put_u32(static_cast<std::uint32_t>(header_json.size()));
  w.put_bytes(header_json.data(), header_json.size());
  w.put_bytes(payload.data(), payload.size());
  w.put_u64(checksum(w.bytes()));
  return std::move(w.bytes());
}

Container decode_prefix(std::span<const unsigned char> bytes, std::string_view magic, std::uint32_t version,
                        std::size_t& header_end) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), magic.data(), 4) != 0) {
    throw DataError(DataErrorKind::bad_magic, "expected \"" + std::string(magic) + "\"");
  }
  if (bytes.size() < 12) throw DataError(DataErrorKind::truncated_columns, "file ends inside the fixed prefix");
  ByteReader r(bytes.subspan(4));
  const std::uint32_t found_version = r.get_u32();
  if (found_version != version) {
    throw DataError(DataErrorKind::version_mismatch,
                    "file version " + std::to_string(found_version) + ", reader supports " + std::to_string(version));
  }
  const std::uint32_t header_len = r.get_u32();
  if (12 + static_cast<std::size_t>(header_len) > bytes.size()) {
    throw DataError(DataErrorKind::truncated_columns, "file ends inside the header");
  }
  Container c;
  c.header_json = r.get_string(header_len);
  header_end = 12 + header_len;
  return c;
}

void check_payload(std::span<const unsigned char> bytes, std::size_t header_end, std::size_t expected_payload,
                   Container& out) {
  const std::size_t expected_total = header_end + expected_payload + 8;
  if (bytes.size() < expected_total) {
    throw DataError(DataErrorKind::truncated_columns, "expected " + std::to_string(expected_total) +
                                                          " bytes from header, file has " +
                                                          std::to_string(bytes.size()));
  }
  if (bytes.size() > expected_total) {
    throw DataError(DataErrorKind::length_disagreement, "file has " + std::to_string(bytes.size() - expected_total) +
                                                            " bytes beyond the columns the header describes");
  }
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  if (stored != checksum(bytes.first(bytes.size() - 8))) {
    throw DataError(DataErrorKind::checksum_mismatch, "FNV-1a checksum does not match contents");
  }
  out.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header_end),
                     bytes.begin() + static_cast<std::ptrdiff_t>(header_end + expected_payload));
}

}  // namespace binio
}  // namespace lexisafe
