#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "asyvrsc/byte_io.hpp"
#include "asyvrsc/types.hpp"

namespace asyvrsc {

/// Frame layout (little endian):
///   "AVMS" | version u16 | tag u8 | epoch u32 | iteration u32 | length u64 | payload
/// The payload is `length` bytes of f64 values. Worker ids and matrix shapes
/// travel as f64 and must be exact non-negative integers.
///
///   BroadcastXTilde    x~
///   PartialInner       worker, sum
///   PartialJacobian    worker, rows, cols, row-major sum
///   BroadcastInner     G(x~)
///   PartialOuterGrad   worker, sum
///   BroadcastSnapshot  rows, cols, row-major grad G(x~), grad f(x~) [cols], x_0 [cols]
///   Gradient           worker, gradient (iteration = iteration of the x it was computed at)
///   Param              x
///   Shutdown           (empty)
inline constexpr std::uint16_t kWireVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 23;

enum class MessageTag : std::uint8_t {
  kBroadcastXTilde = 1,
  kPartialInner = 2,
  kPartialJacobian = 3,
  kBroadcastInner = 4,
  kPartialOuterGrad = 5,
  kBroadcastSnapshot = 6,
  kGradient = 7,
  kParam = 8,
  kShutdown = 9,
};

const char* tag_name(MessageTag tag);

namespace msg {
struct BroadcastXTilde {
  Vector x_tilde;
};
struct PartialInner {
  std::size_t worker = 0;
  Vector sum;
};
struct PartialJacobian {
  std::size_t worker = 0;
  RowMatrix sum;
};
struct BroadcastInner {
  Vector inner;
};
struct PartialOuterGrad {
  std::size_t worker = 0;
  Vector sum;
};
struct BroadcastSnapshot {
  RowMatrix jacobian;
  Vector full_grad;
  Vector x0;
};
struct Gradient {
  std::size_t worker = 0;
  Vector grad;
};
struct Param {
  Vector x;
};
struct Shutdown {};
}  // namespace msg

struct Message {
  using Body = std::variant<msg::BroadcastXTilde, msg::PartialInner, msg::PartialJacobian, msg::BroadcastInner,
                            msg::PartialOuterGrad, msg::BroadcastSnapshot, msg::Gradient, msg::Param,
                            msg::Shutdown>;

  std::uint32_t epoch = 0;
  std::uint32_t iteration = 0;
  Body body;

  MessageTag tag() const { return static_cast<MessageTag>(body.index() + 1); }
  template <typename T>
  const T& as() const {
    return std::get<T>(body);
  }

  /// Bitwise comparison of every field.
  friend bool operator==(const Message& a, const Message& b);
};

std::vector<std::uint8_t> encode_message(const Message& message);
/// Decodes exactly one frame; trailing bytes are an error.
Message decode_message(std::span<const std::uint8_t> frame);

struct FrameHeader {
  MessageTag tag;
  std::uint32_t epoch = 0;
  std::uint32_t iteration = 0;
  std::uint64_t payload_bytes = 0;
};
/// Validates the fixed-size header (magic, version, tag, length).
FrameHeader decode_frame_header(std::span<const std::uint8_t> header);

}  // namespace asyvrsc
