#include <doctest.h>

#include <limits>
#include <set>

#include "asyvrsc/byte_io.hpp"
#include "asyvrsc/wire.hpp"
#include "test_support.hpp"

using namespace asyvrsc;
using namespace asyvrsc::testing;

namespace {

const std::filesystem::path kGolden = std::filesystem::path(ASYVRSC_TEST_DATA_DIR) / "golden";

double random_value(Rng& rng) {
  switch (rng.index(12)) {
    case 0: return std::numeric_limits<double>::quiet_NaN();
    case 1: return -0.0;
    case 2: return std::numeric_limits<double>::infinity();
    case 3: return std::numeric_limits<double>::denorm_min();
    case 4: return std::bit_cast<double>(rng.next());
    default: return rng.normal() * std::pow(10.0, static_cast<double>(rng.index(20)) - 10.0);
  }
}

Vector random_payload(Rng& rng, std::size_t n) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = random_value(rng);
  return v;
}

RowMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = random_value(rng);
  return m;
}

Message random_message(Rng& rng) {
  Message m;
  m.epoch = static_cast<std::uint32_t>(rng.next());
  m.iteration = static_cast<std::uint32_t>(rng.next());
  const std::size_t n = rng.index(12);
  const std::size_t worker = rng.index(64);
  switch (rng.index(9)) {
    case 0: m.body = msg::BroadcastXTilde{random_payload(rng, n)}; break;
    case 1: m.body = msg::PartialInner{worker, random_payload(rng, n)}; break;
    case 2: m.body = msg::PartialJacobian{worker, random_matrix(rng, rng.index(5), rng.index(5))}; break;
    case 3: m.body = msg::BroadcastInner{random_payload(rng, n)}; break;
    case 4: m.body = msg::PartialOuterGrad{worker, random_payload(rng, n)}; break;
    case 5: {
      const std::size_t rows = rng.index(5), cols = rng.index(5);
      m.body = msg::BroadcastSnapshot{random_matrix(rng, rows, cols), random_payload(rng, cols), random_payload(rng, cols)};
      break;
    }
    case 6: m.body = msg::Gradient{worker, random_payload(rng, n)}; break;
    case 7: m.body = msg::Param{random_payload(rng, n)}; break;
    default: m.body = msg::Shutdown{}; break;
  }
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

RowMatrix jac23() {
  RowMatrix j(2, 3);
  j << 1, 2, 3, 4, 5, 6;
  return j;
}

Message make(std::uint32_t epoch, std::uint32_t iteration, Message::Body body) {
  Message m;
  m.epoch = epoch;
  m.iteration = iteration;
  m.body = std::move(body);
  return m;
}

std::size_t decode_error_offset(std::span<const std::uint8_t> bytes) {
  try {
    decode_message(bytes);
  } catch (const DecodeError& e) {
    return e.offset();
  }
  FAIL("expected a decode error");
  return 0;
}

}  // namespace

TEST_SUITE("wire format") {
  TEST_CASE("random messages of every tag round trip") {
    Rng rng(2024);
    std::set<int> tags;
    for (int rep = 0; rep < 1000; ++rep) {
      const Message m = random_message(rng);
      tags.insert(static_cast<int>(m.tag()));
      const auto bytes = encode_message(m);
      CHECK(bytes.size() >= kFrameHeaderBytes);
      CHECK(decode_message(bytes) == m);
      CHECK(encode_message(decode_message(bytes)) == bytes);
    }
    CHECK(tags.size() == 9);
  }

  TEST_CASE("shutdown frame is header only") {
    const auto bytes = encode_message(make(5, 0, msg::Shutdown{}));
    CHECK(bytes.size() == 23);
    CHECK(bytes.size() == 4 + 2 + 1 + 4 + 4 + 8);
    const auto h = decode_frame_header(bytes);
    CHECK(h.tag == MessageTag::kShutdown);
    CHECK(h.payload_bytes == 0);
  }

  TEST_CASE("header fields sit at their documented offsets") {
    const auto bytes = encode_message(make(0x01020304, 0x0a0b0c0d, msg::Param{vec({1.0})}));
    REQUIRE(bytes.size() == 31);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "AVMS");
    CHECK(bytes[4] == 1);
    CHECK(bytes[5] == 0);
    CHECK(bytes[6] == 8);
    CHECK(bytes[7] == 0x04);
    CHECK(bytes[10] == 0x01);
    CHECK(bytes[11] == 0x0d);
    CHECK(bytes[15] == 8);
    CHECK(ByteReader(std::span(bytes).subspan(23)).f64() == 1.0);
  }

  TEST_CASE("corrupted magic is reported at offset 0") {
    auto bytes = encode_message(make(1, 2, msg::Param{vec({1.0, 2.0})}));
    bytes[0] = 'X';
    CHECK(decode_error_offset(bytes) == 0);
  }

  TEST_CASE("unknown version and tag are reported at their offsets") {
    auto bytes = encode_message(make(1, 2, msg::Param{vec({1.0})}));
    auto bad = bytes;
    bad[4] = 2;
    CHECK(decode_error_offset(bad) == 4);
    bad = bytes;
    bad[6] = 0;
    CHECK(decode_error_offset(bad) == 6);
    bad[6] = 10;
    CHECK(decode_error_offset(bad) == 6);
  }

  TEST_CASE("truncated and padded frames are rejected") {
    const auto bytes = encode_message(make(1, 2, msg::Gradient{3, vec({1.0, 2.0})}));
    for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
      CHECK_THROWS_AS(decode_message(std::span(bytes).first(cut)), DecodeError);
    }
    auto padded = bytes;
    padded.push_back(0);
    CHECK_THROWS_AS(decode_message(padded), DecodeError);
    CHECK(decode_error_offset(std::span(bytes).first(10)) == 0);
  }

  TEST_CASE("malformed payloads are rejected") {
    // Length not a multiple of eight.
    auto bytes = encode_message(make(0, 0, msg::Param{vec({1.0})}));
    bytes[15] = 7;
    bytes.pop_back();
    CHECK(decode_error_offset(bytes) == 15);
    // Worker id that is not an integer.
    ByteWriter w;
    w.bytes(std::vector<std::uint8_t>{'A', 'V', 'M', 'S'});
    w.u16(1);
    w.u8(static_cast<std::uint8_t>(MessageTag::kGradient));
    w.u32(0);
    w.u32(0);
    w.u64(16);
    w.f64(1.5);
    w.f64(2.0);
    CHECK(decode_error_offset(w.buffer()) == 23);
    // Jacobian shape larger than the payload.
    ByteWriter j;
    j.bytes(std::vector<std::uint8_t>{'A', 'V', 'M', 'S'});
    j.u16(1);
    j.u8(static_cast<std::uint8_t>(MessageTag::kPartialJacobian));
    j.u32(0);
    j.u32(0);
    j.u64(32);
    j.f64(0.0);
    j.f64(2.0);
    j.f64(2.0);
    j.f64(1.0);
    CHECK_THROWS_AS(decode_message(j.buffer()), DecodeError);
    // Empty payload for a message that needs a worker id.
    const auto empty = encode_message(make(0, 0, msg::Shutdown{}));
    auto gradient = empty;
    gradient[6] = static_cast<std::uint8_t>(MessageTag::kGradient);
    CHECK_THROWS_AS(decode_message(gradient), DecodeError);
  }

  TEST_CASE("snapshot vectors must match the Jacobian width") {
    CHECK_THROWS_AS(encode_message(make(0, 0, msg::BroadcastSnapshot{jac23(), vec({1, 2}), vec({1, 2, 3})})),
                    std::invalid_argument);
  }

  TEST_CASE("tag names") {
    CHECK(std::string(tag_name(MessageTag::kBroadcastSnapshot)) == "BroadcastSnapshot");
    CHECK(std::string(tag_name(MessageTag::kShutdown)) == "Shutdown");
  }

  TEST_CASE("golden frames decode to the expected messages and re-encode byte for byte") {
    const Vector X = vec({1.5, -2.25, 0.125});
    const Vector Y = vec({0.5, -0.0, 3.0, 1e-300});
    const std::vector<std::pair<std::string, Message>> cases{
        {"broadcast_x_tilde", make(3, 0, msg::BroadcastXTilde{X})},
        {"partial_inner", make(3, 0, msg::PartialInner{2, Y})},
        {"partial_jacobian", make(3, 0, msg::PartialJacobian{1, jac23()})},
        {"broadcast_inner", make(3, 0, msg::BroadcastInner{Y})},
        {"partial_outer_grad", make(3, 0, msg::PartialOuterGrad{0, Y})},
        {"broadcast_snapshot", make(3, 0, msg::BroadcastSnapshot{jac23(), X, vec({-1.0, 0.25, 7.0})})},
        {"gradient", make(4, 17, msg::Gradient{1, X})},
        {"param", make(4, 18, msg::Param{X})},
        {"shutdown", make(5, 0, msg::Shutdown{})},
    };
    std::set<int> tags;
    for (const auto& [name, expected] : cases) {
      CAPTURE(name);
      const auto bytes = read_binary_file(kGolden / (name + ".bin"));
      const Message decoded = decode_message(bytes);
      CHECK(decoded.tag() == expected.tag());
      CHECK(decoded == expected);
      CHECK(encode_message(expected) == bytes);
      tags.insert(static_cast<int>(decoded.tag()));
    }
    CHECK(tags.size() == 9);
  }
}
