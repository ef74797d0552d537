#include "asyvrsc/instance_io.hpp"

#include <fstream>
#include <iterator>

#include "asyvrsc/byte_io.hpp"
#include "asyvrsc/format.hpp"

namespace asyvrsc {

namespace {

constexpr std::uint8_t kMagic[4] = {'A', 'V', 'R', 'S'};
constexpr std::uint8_t kPortfolioKind = 0;
constexpr std::uint8_t kMdpKind = 1;

void write_matrix(ByteWriter& w, const RowMatrix& m) {
  for (Eigen::Index k = 0; k < m.size(); ++k) w.f64(m.data()[k]);
}

RowMatrix read_matrix(ByteReader& r, std::uint64_t rows, std::uint64_t cols) {
  if (rows != 0 && cols > r.remaining() / 8 / rows) {
    throw DecodeError(r.offset(), "matrix payload larger than input");
  }
  RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = r.f64();
  return m;
}

std::size_t read_size(ByteReader& r, const char* what) {
  const std::size_t at = r.offset();
  const std::uint64_t v = r.u64();
  if (v == 0 || v > (std::uint64_t{1} << 32)) {
    throw DecodeError(at, std::string("implausible ") + what + " = " + std::to_string(v));
  }
  return static_cast<std::size_t>(v);
}

void write_rows(std::ofstream& out, const char* name, const RowMatrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << name << ',' << r;
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << format_double(m(r, c));
    out << '\n';
  }
}

}  // namespace

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::uint8_t> encode_instance(const Instance& instance) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u16(kInstanceFormatVersion);
  if (const auto* p = std::get_if<PortfolioInstance>(&instance)) {
    const auto& c = p->config;
    if (static_cast<std::size_t>(p->rewards.rows()) != c.n || static_cast<std::size_t>(p->rewards.cols()) != c.N) {
      throw DimensionError("portfolio instance: reward matrix does not match its config");
    }
    w.u8(kPortfolioKind);
    w.u64(c.n);
    w.u64(c.N);
    w.f64(c.lambda_max);
    w.f64(c.lambda_min);
    w.f64(c.l2_reg);
    w.f64(c.density);
    w.u64(c.seed);
    write_matrix(w, p->rewards);
  } else {
    const auto& m = std::get<MdpInstance>(instance);
    const auto& c = m.config;
    const auto S = static_cast<Eigen::Index>(c.S);
    if (m.transition.rows() != S || m.transition.cols() != S || m.rewards.rows() != S ||
        m.rewards.cols() != S || m.features.rows() != S ||
        m.features.cols() != static_cast<Eigen::Index>(c.d)) {
      throw DimensionError("mdp instance: matrices do not match its config");
    }
    w.u8(kMdpKind);
    w.u64(c.S);
    w.u64(c.d);
    w.u64(c.actions_per_state);
    w.f64(c.discount);
    w.f64(c.l2_reg);
    w.u64(c.seed);
    write_matrix(w, m.transition);
    write_matrix(w, m.features);
    write_matrix(w, m.rewards);
  }
  return w.take();
}

Instance decode_instance(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw DecodeError(0, "bad magic, expected AVRS");
  }
  const std::size_t version_at = r.offset();
  const auto version = r.u16();
  if (version != kInstanceFormatVersion) {
    throw DecodeError(version_at, "unsupported instance format version " + std::to_string(version));
  }
  const std::size_t kind_at = r.offset();
  const auto kind = r.u8();
  Instance result;
  if (kind == kPortfolioKind) {
    PortfolioInstance p;
    p.config.n = read_size(r, "n");
    p.config.N = read_size(r, "N");
    p.config.lambda_max = r.f64();
    p.config.lambda_min = r.f64();
    p.config.l2_reg = r.f64();
    p.config.density = r.f64();
    p.config.seed = r.u64();
    p.rewards = read_matrix(r, p.config.n, p.config.N);
    result = std::move(p);
  } else if (kind == kMdpKind) {
    MdpInstance m;
    m.config.S = read_size(r, "S");
    m.config.d = read_size(r, "d");
    m.config.actions_per_state = static_cast<std::size_t>(r.u64());
    m.config.discount = r.f64();
    m.config.l2_reg = r.f64();
    m.config.seed = r.u64();
    m.transition = read_matrix(r, m.config.S, m.config.S);
    m.features = read_matrix(r, m.config.S, m.config.d);
    m.rewards = read_matrix(r, m.config.S, m.config.S);
    result = std::move(m);
  } else {
    throw DecodeError(kind_at, "unknown instance kind " + std::to_string(kind));
  }
  if (r.remaining() != 0) throw DecodeError(r.offset(), "trailing bytes after instance payload");
  return result;
}

void save_instance(const Instance& instance, const std::filesystem::path& path) {
  write_binary_file(path, encode_instance(instance));
}

Instance load_instance(const std::filesystem::path& path) {
  return decode_instance(read_binary_file(path));
}

void write_instance_csv(const Instance& instance, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (const auto* p = std::get_if<PortfolioInstance>(&instance)) {
    write_rows(out, "rewards", p->rewards);
  } else {
    const auto& m = std::get<MdpInstance>(instance);
    write_rows(out, "transition", m.transition);
    write_rows(out, "features", m.features);
    write_rows(out, "rewards", m.rewards);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace asyvrsc
