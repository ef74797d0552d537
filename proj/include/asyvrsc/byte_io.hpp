#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace asyvrsc {

/// Malformed binary input; offset() is the byte position of the problem.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::size_t offset, const std::string& what)
      : std::runtime_error("decode error at offset " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Little-endian writer, independent of host byte order.
class ByteWriter {
 public:
  void bytes(std::span<const std::uint8_t> data) { buffer_.insert(buffer_.end(), data.begin(), data.end()); }
  void u8(std::uint8_t v) { buffer_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  template <typename Range>
  void f64s(const Range& values) {
    for (const double v : values) f64(v);
  }

  const std::vector<std::uint8_t>& buffer() const { return buffer_; }
  std::vector<std::uint8_t> take() { return std::move(buffer_); }

 private:
  void put(std::uint64_t v, int width) {
    for (int b = 0; b < width; ++b) buffer_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  std::vector<std::uint8_t> buffer_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return data_.size() - offset_; }

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::span<const std::uint8_t> bytes(std::size_t count) {
    require(count);
    auto out = data_.subspan(offset_, count);
    offset_ += count;
    return out;
  }
  void require(std::size_t count) const {
    if (remaining() < count) {
      throw DecodeError(offset_, "truncated input: need " + std::to_string(count) + " bytes, have " +
                                     std::to_string(remaining()));
    }
  }

 private:
  std::uint64_t get(std::size_t width) {
    require(width);
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < width; ++b) v |= std::uint64_t{data_[offset_ + b]} << (8 * b);
    offset_ += width;
    return v;
  }
  std::span<const std::uint8_t> data_;
  std::size_t offset_ = 0;
};

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace asyvrsc
