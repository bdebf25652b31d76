#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "scentvec/errors.hpp"

namespace scentvec {

namespace detail {

inline std::uint32_t zip_le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t zip_le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::string zip_inflate_raw(const std::vector<unsigned char>& compressed,
                                   std::size_t expected_size, const std::string& member) {
  std::string out(expected_size, '\0');
  z_stream stream{};
  if (inflateInit2(&stream, -15) != Z_OK) throw IoError("zip: inflateInit failed");
  stream.next_in = const_cast<unsigned char*>(compressed.data());
  stream.avail_in = static_cast<uInt>(compressed.size());
  stream.next_out = reinterpret_cast<unsigned char*>(out.data());
  stream.avail_out = static_cast<uInt>(out.size());
  const int ret = inflate(&stream, Z_FINISH);
  inflateEnd(&stream);
  if (ret != Z_STREAM_END || stream.total_out != expected_size) {
    throw IoError("zip: corrupt deflate stream for member \"" + member + "\"");
  }
  return out;
}

}  // namespace detail

/// Extracts one member from a zip archive. Handles stored and deflated
/// entries, which covers embedding-distribution archives; no zip64, no
/// encryption.
inline std::string read_zip_member(const std::string& path, const std::string& member) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open archive: " + path);
  file.seekg(0, std::ios::end);
  const std::int64_t file_size = file.tellg();
  if (file_size < 22) throw IoError("not a zip archive: " + path);

  // End-of-central-directory record: signature PK\5\6 within the last
  // 64KiB + 22 bytes (a comment may pad it away from the end).
  const std::int64_t tail_len = std::min<std::int64_t>(file_size, 65557);
  std::vector<unsigned char> tail(static_cast<std::size_t>(tail_len));
  file.seekg(file_size - tail_len);
  file.read(reinterpret_cast<char*>(tail.data()), tail_len);
  std::int64_t eocd = -1;
  for (std::int64_t i = tail_len - 22; i >= 0; --i) {
    if (tail[i] == 0x50 && tail[i + 1] == 0x4b && tail[i + 2] == 0x05 && tail[i + 3] == 0x06) {
      eocd = i;
      break;
    }
  }
  if (eocd < 0) throw IoError("not a zip archive (no end-of-central-directory): " + path);
  const unsigned char* e = tail.data() + eocd;
  const std::uint16_t entry_count = detail::zip_le16(e + 10);
  const std::uint32_t cd_size = detail::zip_le32(e + 12);
  const std::uint32_t cd_offset = detail::zip_le32(e + 16);
  if (entry_count == 0xFFFF || cd_offset == 0xFFFFFFFFu) {
    throw IoError("zip64 archives are not supported: " + path);
  }

  std::vector<unsigned char> cd(cd_size);
  file.seekg(cd_offset);
  file.read(reinterpret_cast<char*>(cd.data()), cd_size);
  if (!file) throw IoError("truncated central directory: " + path);

  std::size_t pos = 0;
  for (std::uint16_t entry = 0; entry < entry_count; ++entry) {
    if (pos + 46 > cd.size() || detail::zip_le32(cd.data() + pos) != 0x02014b50u) {
      throw IoError("corrupt central directory: " + path);
    }
    const unsigned char* h = cd.data() + pos;
    const std::uint16_t method = detail::zip_le16(h + 10);
    const std::uint32_t crc = detail::zip_le32(h + 16);
    const std::uint32_t comp_size = detail::zip_le32(h + 20);
    const std::uint32_t uncomp_size = detail::zip_le32(h + 24);
    const std::uint16_t name_len = detail::zip_le16(h + 28);
    const std::uint16_t extra_len = detail::zip_le16(h + 30);
    const std::uint16_t comment_len = detail::zip_le16(h + 32);
    const std::uint32_t local_offset = detail::zip_le32(h + 42);
    if (pos + 46 + name_len > cd.size()) throw IoError("corrupt central directory: " + path);
    const std::string name(reinterpret_cast<const char*>(h + 46), name_len);
    pos += 46u + name_len + extra_len + comment_len;
    if (name != member) continue;

    unsigned char local[30];
    file.seekg(local_offset);
    file.read(reinterpret_cast<char*>(local), 30);
    if (!file || detail::zip_le32(local) != 0x04034b50u) {
      throw IoError("corrupt local header for member \"" + member + "\": " + path);
    }
    const std::uint16_t lname = detail::zip_le16(local + 26);
    const std::uint16_t lextra = detail::zip_le16(local + 28);
    file.seekg(static_cast<std::int64_t>(local_offset) + 30 + lname + lextra);
    std::vector<unsigned char> data(comp_size);
    file.read(reinterpret_cast<char*>(data.data()), comp_size);
    if (!file) throw IoError("truncated member \"" + member + "\": " + path);

    std::string bytes;
    if (method == 0) {
      if (comp_size != uncomp_size) {
        throw IoError("zip: stored member \"" + member + "\" has inconsistent sizes");
      }
      bytes.assign(data.begin(), data.end());
    } else if (method == 8) {
      bytes = detail::zip_inflate_raw(data, uncomp_size, member);
    } else {
      throw IoError("zip: unsupported compression method " + std::to_string(method) +
                    " for member \"" + member + "\"");
    }
    const auto actual_crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const unsigned char*>(bytes.data()),
              static_cast<uInt>(bytes.size())));
    if (actual_crc != crc) throw IoError("zip: CRC mismatch for member \"" + member + "\"");
    return bytes;
  }
  throw IoError("member \"" + member + "\" not found in " + path);
}

}  // namespace scentvec
