#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcq {

// Packed bit sequence, MSB-first within each byte; the final byte is
// zero-padded.
struct Bitstream {
  std::vector<std::uint8_t> bytes;
  std::size_t bit_count = 0;

  void push_bits(std::uint64_t code, int length);
  bool bit(std::size_t index) const { return (bytes[index >> 3] >> (7 - (index & 7))) & 1U; }
  bool operator==(const Bitstream&) const = default;
};

class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& what, std::size_t bit_position)
      : std::runtime_error(what + " at bit " + std::to_string(bit_position)),
        position_(bit_position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Canonical prefix code over symbols 0..size()-1.
///
/// Codewords are assigned in (length, symbol) order, so the lengths alone
/// determine the code.  Lengths are capped at 64 bits.
class HuffmanCodebook {
 public:
  static HuffmanCodebook from_lengths(std::vector<int> lengths);

  std::size_t size() const { return lengths_.size(); }
  const std::vector<int>& lengths() const { return lengths_; }
  int length(std::size_t symbol) const { return lengths_.at(symbol); }
  std::uint64_t codeword(std::size_t symbol) const { return codes_.at(symbol); }
  std::string codeword_string(std::size_t symbol) const;

  double average_length(std::span<const double> probs) const;
  double kraft_sum() const;

 private:
  friend std::vector<std::uint32_t> decode(const HuffmanCodebook&, const Bitstream&, std::size_t);

  std::vector<int> lengths_;
  std::vector<std::uint64_t> codes_;
  // Canonical decoding tables indexed by code length.
  std::vector<std::uint64_t> first_code_;
  std::vector<std::size_t> first_index_;
  std::vector<std::size_t> count_;
  std::vector<std::uint32_t> sorted_symbols_;
  int max_length_ = 0;
};

/// Optimal prefix code for non-negative weights.  Ties merge the lowest
/// weight first, then the subtree holding the lowest symbol index.  A
/// single-symbol alphabet gets a 1-bit code.
HuffmanCodebook build_codebook(std::span<const double> weights);

Bitstream encode(const HuffmanCodebook& book, std::span<const std::uint32_t> symbols);

/// Decodes the first n symbols.  Throws DecodeError on truncation or an
/// invalid codeword.
std::vector<std::uint32_t> decode(const HuffmanCodebook& book, const Bitstream& stream, std::size_t n);

double shannon_entropy(std::span<const double> probs);

}  // namespace rcq
