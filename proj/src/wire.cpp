#include "asyvrsc/wire.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace asyvrsc {

namespace {

constexpr std::uint8_t kMagic[4] = {'A', 'V', 'M', 'S'};
// Largest payload accepted from the wire (1 GiB).
constexpr std::uint64_t kMaxPayload = std::uint64_t{1} << 30;

class PayloadReader {
 public:
  PayloadReader(ByteReader& reader, std::size_t values) : reader_(reader), left_(values) {}

  double value() {
    if (left_ == 0) throw DecodeError(reader_.offset(), "payload too short for message");
    --left_;
    return reader_.f64();
  }

  std::size_t count(const char* what) {
    const std::size_t at = reader_.offset();
    const double v = value();
    if (!(v >= 0) || v > 4294967295.0 || std::floor(v) != v) {
      throw DecodeError(at, std::string("invalid ") + what);
    }
    return static_cast<std::size_t>(v);
  }

  Vector vector(std::size_t n) {
    if (n > left_) throw DecodeError(reader_.offset(), "payload too short for message");
    Vector out(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) out[static_cast<Eigen::Index>(k)] = value();
    return out;
  }

  Vector rest() { return vector(left_); }

  RowMatrix matrix(std::size_t rows, std::size_t cols) {
    const std::size_t at = reader_.offset();
    if (cols != 0 && rows > left_ / cols) throw DecodeError(at, "matrix shape exceeds payload");
    RowMatrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index k = 0; k < out.size(); ++k) out.data()[k] = value();
    return out;
  }

  void finish() {
    if (left_ != 0) throw DecodeError(reader_.offset(), "payload longer than message");
  }

 private:
  ByteReader& reader_;
  std::size_t left_;
};

template <typename M>
void put_matrix(ByteWriter& w, const M& m) {
  w.f64(static_cast<double>(m.rows()));
  w.f64(static_cast<double>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
  }
}

void put_vector(ByteWriter& w, const Vector& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) w.f64(v[k]);
}

std::vector<std::uint8_t> payload_of(const Message& m) {
  ByteWriter w;
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, msg::BroadcastXTilde>) {
          put_vector(w, body.x_tilde);
        } else if constexpr (std::is_same_v<T, msg::PartialInner> || std::is_same_v<T, msg::PartialOuterGrad>) {
          w.f64(static_cast<double>(body.worker));
          put_vector(w, body.sum);
        } else if constexpr (std::is_same_v<T, msg::PartialJacobian>) {
          w.f64(static_cast<double>(body.worker));
          put_matrix(w, body.sum);
        } else if constexpr (std::is_same_v<T, msg::BroadcastInner>) {
          put_vector(w, body.inner);
        } else if constexpr (std::is_same_v<T, msg::BroadcastSnapshot>) {
          if (body.full_grad.size() != body.jacobian.cols() || body.x0.size() != body.jacobian.cols()) {
            throw std::invalid_argument("BroadcastSnapshot vectors must have one entry per Jacobian column");
          }
          put_matrix(w, body.jacobian);
          put_vector(w, body.full_grad);
          put_vector(w, body.x0);
        } else if constexpr (std::is_same_v<T, msg::Gradient>) {
          w.f64(static_cast<double>(body.worker));
          put_vector(w, body.grad);
        } else if constexpr (std::is_same_v<T, msg::Param>) {
          put_vector(w, body.x);
        }
      },
      m.body);
  return w.take();
}

template <typename V>
bool same(const V& a, const V& b) {
  return bitwise_equal(a, b);
}

}  // namespace

const char* tag_name(MessageTag tag) {
  switch (tag) {
    case MessageTag::kBroadcastXTilde: return "BroadcastXTilde";
    case MessageTag::kPartialInner: return "PartialInner";
    case MessageTag::kPartialJacobian: return "PartialJacobian";
    case MessageTag::kBroadcastInner: return "BroadcastInner";
    case MessageTag::kPartialOuterGrad: return "PartialOuterGrad";
    case MessageTag::kBroadcastSnapshot: return "BroadcastSnapshot";
    case MessageTag::kGradient: return "Gradient";
    case MessageTag::kParam: return "Param";
    case MessageTag::kShutdown: return "Shutdown";
  }
  return "unknown";
}

bool operator==(const Message& a, const Message& b) {
  if (a.epoch != b.epoch || a.iteration != b.iteration || a.body.index() != b.body.index()) return false;
  return std::visit(
      [&](const auto& lhs) {
        using T = std::decay_t<decltype(lhs)>;
        const auto& rhs = std::get<T>(b.body);
        if constexpr (std::is_same_v<T, msg::BroadcastXTilde>) {
          return same(lhs.x_tilde, rhs.x_tilde);
        } else if constexpr (std::is_same_v<T, msg::PartialInner> || std::is_same_v<T, msg::PartialOuterGrad> ||
                             std::is_same_v<T, msg::PartialJacobian>) {
          return lhs.worker == rhs.worker && same(lhs.sum, rhs.sum);
        } else if constexpr (std::is_same_v<T, msg::BroadcastInner>) {
          return same(lhs.inner, rhs.inner);
        } else if constexpr (std::is_same_v<T, msg::BroadcastSnapshot>) {
          return same(lhs.jacobian, rhs.jacobian) && same(lhs.full_grad, rhs.full_grad) && same(lhs.x0, rhs.x0);
        } else if constexpr (std::is_same_v<T, msg::Gradient>) {
          return lhs.worker == rhs.worker && same(lhs.grad, rhs.grad);
        } else if constexpr (std::is_same_v<T, msg::Param>) {
          return same(lhs.x, rhs.x);
        } else {
          return true;
        }
      },
      a.body);
}

std::vector<std::uint8_t> encode_message(const Message& message) {
  const auto payload = payload_of(message);
  ByteWriter w;
  w.bytes(kMagic);
  w.u16(kWireVersion);
  w.u8(static_cast<std::uint8_t>(message.tag()));
  w.u32(message.epoch);
  w.u32(message.iteration);
  w.u64(payload.size());
  w.bytes(payload);
  return w.take();
}

FrameHeader decode_frame_header(std::span<const std::uint8_t> header) {
  ByteReader r(header);
  const auto magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw DecodeError(0, "bad magic, expected 'AVMS'");
  const auto version = r.u16();
  if (version != kWireVersion) throw DecodeError(4, "unsupported wire version " + std::to_string(version));
  const auto tag = r.u8();
  if (tag < 1 || tag > 9) throw DecodeError(6, "unknown message tag " + std::to_string(tag));
  FrameHeader h;
  h.tag = static_cast<MessageTag>(tag);
  h.epoch = r.u32();
  h.iteration = r.u32();
  h.payload_bytes = r.u64();
  if (h.payload_bytes % 8 != 0) throw DecodeError(15, "payload length is not a multiple of 8");
  if (h.payload_bytes > kMaxPayload) throw DecodeError(15, "payload length exceeds limit");
  return h;
}

Message decode_message(std::span<const std::uint8_t> frame) {
  ByteReader r(frame);
  r.require(kFrameHeaderBytes);
  const FrameHeader h = decode_frame_header(r.bytes(kFrameHeaderBytes));
  r.require(h.payload_bytes);
  if (r.remaining() != h.payload_bytes) {
    throw DecodeError(kFrameHeaderBytes + h.payload_bytes, "trailing bytes after frame");
  }
  PayloadReader p(r, h.payload_bytes / 8);
  Message m;
  m.epoch = h.epoch;
  m.iteration = h.iteration;
  switch (h.tag) {
    case MessageTag::kBroadcastXTilde:
      m.body = msg::BroadcastXTilde{p.rest()};
      break;
    case MessageTag::kPartialInner: {
      const auto worker = p.count("worker id");
      m.body = msg::PartialInner{worker, p.rest()};
      break;
    }
    case MessageTag::kPartialJacobian: {
      const auto worker = p.count("worker id");
      const auto rows = p.count("row count");
      const auto cols = p.count("column count");
      m.body = msg::PartialJacobian{worker, p.matrix(rows, cols)};
      break;
    }
    case MessageTag::kBroadcastInner:
      m.body = msg::BroadcastInner{p.rest()};
      break;
    case MessageTag::kPartialOuterGrad: {
      const auto worker = p.count("worker id");
      m.body = msg::PartialOuterGrad{worker, p.rest()};
      break;
    }
    case MessageTag::kBroadcastSnapshot: {
      const auto rows = p.count("row count");
      const auto cols = p.count("column count");
      msg::BroadcastSnapshot body;
      body.jacobian = p.matrix(rows, cols);
      body.full_grad = p.vector(cols);
      body.x0 = p.vector(cols);
      m.body = std::move(body);
      break;
    }
    case MessageTag::kGradient: {
      const auto worker = p.count("worker id");
      m.body = msg::Gradient{worker, p.rest()};
      break;
    }
    case MessageTag::kParam:
      m.body = msg::Param{p.rest()};
      break;
    case MessageTag::kShutdown:
      m.body = msg::Shutdown{};
      break;
  }
  p.finish();
  return m;
}

}  // namespace asyvrsc
