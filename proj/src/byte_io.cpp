#include "sumgraph/byte_io.hpp"

#include <fstream>
#include <iterator>

#include "sumgraph/errors.hpp"

namespace sumgraph {

void ByteReader::require(std::size_t n, std::string_view field) const {
  if (remaining() < n) {
    fail("truncated at byte offset " + std::to_string(pos_) + " reading " + std::string(field) +
         " (need " + std::to_string(n) + " bytes, " + std::to_string(remaining()) + " left)");
  }
}

void ByteReader::fail(std::string_view reason) const {
  throw DataError(what_ + ": " + std::string(reason));
}

std::string ByteReader::bytes(std::size_t n) {
  require(n, "bytes");
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::uint64_t ByteReader::get(std::size_t n, std::string_view field) {
  require(n, field);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += n;
  return v;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace sumgraph
