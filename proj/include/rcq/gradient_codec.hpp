#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rcq/huffman.hpp"
#include "rcq/quantizer.hpp"

namespace rcq {

// Mean and stddev (32 bits each on the wire).
inline constexpr std::uint64_t kSideInfoBits = 64;
inline constexpr std::size_t kMessageHeaderBytes = 16;

/// Population statistics of one gradient vector.
struct GradientStats {
  double mean = 0.0;
  double stddev = 0.0;
};

struct NormalizedGradient {
  std::vector<double> values;
  GradientStats stats;
  // Set when the vector is constant; values are then all zero.
  bool degenerate = false;
};

NormalizedGradient normalize(std::span<const double> g);

struct CompressedGradientMessage {
  Bitstream payload;
  std::uint32_t dimension = 0;
  GradientStats stats;
  std::uint64_t total_bits = 0;
};

/// Normalizes, quantizes and entropy-codes g.  The codebook indexes symbols
/// from 0, so quantizer symbol l is coded as l - 1.
CompressedGradientMessage client_compress(std::span<const double> g, const QuantizerSpec& spec,
                                          const HuffmanCodebook& book);

/// Decodes the payload and returns σ·s_l + μ per entry, or μ everywhere when
/// σ = 0.
std::vector<double> server_reconstruct(const CompressedGradientMessage& msg, const QuantizerSpec& spec,
                                       const HuffmanCodebook& book);

// Little-endian frame: u32 d, u32 payload bits, f32 mean, f32 stddev, then
// the packed payload.  Statistics are narrowed to float on the way out.
std::vector<std::uint8_t> serialize_message(const CompressedGradientMessage& msg);
CompressedGradientMessage deserialize_message(std::span<const std::uint8_t> bytes);

void write_message(const std::filesystem::path& path, const CompressedGradientMessage& msg);
CompressedGradientMessage read_message(const std::filesystem::path& path);

}  // namespace rcq
