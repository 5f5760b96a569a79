#include "rcq/gradient_codec.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <stdexcept>

namespace rcq {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return v;
}

void check_alphabet(const QuantizerSpec& spec, const HuffmanCodebook& book) {
  if (book.size() != spec.cells())
    throw std::invalid_argument("codebook alphabet (" + std::to_string(book.size()) +
                                ") does not match quantizer cells (" + std::to_string(spec.cells()) + ")");
}

}  // namespace

NormalizedGradient normalize(std::span<const double> g) {
  if (g.empty()) throw std::invalid_argument("normalize: empty gradient");
  const double n = static_cast<double>(g.size());
  double mean = 0.0;
  for (double x : g) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : g) ss += (x - mean) * (x - mean);

  NormalizedGradient out;
  out.stats.mean = mean;
  out.stats.stddev = std::sqrt(ss / n);
  out.values.resize(g.size(), 0.0);
  if (!(out.stats.stddev > 0.0)) {
    out.stats.stddev = 0.0;
    out.degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = (g[i] - mean) / out.stats.stddev;
  return out;
}

CompressedGradientMessage client_compress(std::span<const double> g, const QuantizerSpec& spec,
                                          const HuffmanCodebook& book) {
  check_alphabet(spec, book);
  if (g.size() > std::numeric_limits<std::uint32_t>::max())
    throw std::invalid_argument("client_compress: dimension exceeds 32 bits");
  const NormalizedGradient norm = normalize(g);
  std::vector<std::uint32_t> symbols;
  symbols.reserve(norm.values.size());
  for (double z : norm.values) symbols.push_back(quantize(spec, z) - 1);

  CompressedGradientMessage msg;
  msg.payload = encode(book, symbols);
  msg.dimension = static_cast<std::uint32_t>(g.size());
  msg.stats = norm.stats;
  msg.total_bits = msg.payload.bit_count + kSideInfoBits;
  return msg;
}

std::vector<double> server_reconstruct(const CompressedGradientMessage& msg, const QuantizerSpec& spec,
                                       const HuffmanCodebook& book) {
  check_alphabet(spec, book);
  const auto symbols = decode(book, msg.payload, msg.dimension);
  std::vector<double> out(msg.dimension, msg.stats.mean);
  if (msg.stats.stddev == 0.0) return out;
  for (std::size_t i = 0; i < symbols.size(); ++i)
    out[i] = msg.stats.stddev * dequantize(spec, symbols[i] + 1) + msg.stats.mean;
  return out;
}

std::vector<std::uint8_t> serialize_message(const CompressedGradientMessage& msg) {
  if (msg.payload.bit_count > std::numeric_limits<std::uint32_t>::max())
    throw std::invalid_argument("serialize_message: payload exceeds 2^32 bits");
  std::vector<std::uint8_t> out;
  out.reserve(kMessageHeaderBytes + msg.payload.bytes.size());
  put_u32(out, msg.dimension);
  put_u32(out, static_cast<std::uint32_t>(msg.payload.bit_count));
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(msg.stats.mean)));
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(msg.stats.stddev)));
  out.insert(out.end(), msg.payload.bytes.begin(), msg.payload.bytes.end());
  return out;
}

CompressedGradientMessage deserialize_message(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMessageHeaderBytes) throw std::invalid_argument("message frame shorter than its header");
  CompressedGradientMessage msg;
  msg.dimension = get_u32(bytes, 0);
  msg.payload.bit_count = get_u32(bytes, 4);
  msg.stats.mean = std::bit_cast<float>(get_u32(bytes, 8));
  msg.stats.stddev = std::bit_cast<float>(get_u32(bytes, 12));
  const std::size_t payload_bytes = (msg.payload.bit_count + 7) / 8;
  if (bytes.size() != kMessageHeaderBytes + payload_bytes)
    throw std::invalid_argument("message frame length does not match its bit count");
  if (msg.dimension == 0) throw std::invalid_argument("message frame has zero dimension");
  msg.payload.bytes.assign(bytes.begin() + kMessageHeaderBytes, bytes.end());
  msg.total_bits = msg.payload.bit_count + kSideInfoBits;
  return msg;
}

void write_message(const std::filesystem::path& path, const CompressedGradientMessage& msg) {
  const auto bytes = serialize_message(msg);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

CompressedGradientMessage read_message(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_message(bytes);
}

}  // namespace rcq
