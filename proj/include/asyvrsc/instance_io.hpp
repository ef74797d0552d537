#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "asyvrsc/byte_io.hpp"
#include "asyvrsc/generators.hpp"

namespace asyvrsc {

using Instance = std::variant<PortfolioInstance, MdpInstance>;

/// Binary instance file, all integers and floats little-endian:
///
///   "AVRS"  u16 version (=1)  u8 kind (0 portfolio, 1 mdp)
///   portfolio: u64 n, u64 N, f64 lambda_max, f64 lambda_min, f64 l2_reg,
///              f64 density, u64 seed, then n*N f64 rewards (row-major)
///   mdp:       u64 S, u64 d, u64 actions_per_state, f64 discount,
///              f64 l2_reg, u64 seed, then S*S transition, S*d features,
///              S*S rewards (each row-major f64)
inline constexpr std::uint16_t kInstanceFormatVersion = 1;

std::vector<std::uint8_t> encode_instance(const Instance& instance);
Instance decode_instance(std::span<const std::uint8_t> bytes);

void save_instance(const Instance& instance, const std::filesystem::path& path);
Instance load_instance(const std::filesystem::path& path);

/// One line per matrix row: `<matrix>,<row>,v0,v1,...` with matrix one of
/// rewards (portfolio) or transition, features, rewards (mdp).
void write_instance_csv(const Instance& instance, const std::filesystem::path& path);

}  // namespace asyvrsc
