#include "rcq/huffman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <tuple>

namespace rcq {

namespace {
constexpr int kMaxCodeLength = 64;
}

void Bitstream::push_bits(std::uint64_t code, int length) {
  for (int i = length - 1; i >= 0; --i) {
    if ((bit_count & 7) == 0) bytes.push_back(0);
    if ((code >> i) & 1U) bytes.back() |= static_cast<std::uint8_t>(0x80U >> (bit_count & 7));
    ++bit_count;
  }
}

HuffmanCodebook HuffmanCodebook::from_lengths(std::vector<int> lengths) {
  if (lengths.empty()) throw std::invalid_argument("HuffmanCodebook: empty alphabet");
  for (int len : lengths)
    if (len < 1 || len > kMaxCodeLength)
      throw std::invalid_argument("HuffmanCodebook: code lengths must lie in [1, 64]");

  HuffmanCodebook book;
  book.lengths_ = std::move(lengths);
  const std::size_t n = book.lengths_.size();
  book.codes_.assign(n, 0);
  book.sorted_symbols_.resize(n);
  std::iota(book.sorted_symbols_.begin(), book.sorted_symbols_.end(), 0U);
  std::stable_sort(book.sorted_symbols_.begin(), book.sorted_symbols_.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return book.lengths_[a] < book.lengths_[b]; });

  book.first_code_.assign(kMaxCodeLength + 1, 0);
  book.first_index_.assign(kMaxCodeLength + 1, 0);
  book.count_.assign(kMaxCodeLength + 1, 0);

  // Canonical assignment; a code that overflows its length violates Kraft.
  unsigned __int128 code = 0;
  int prev_len = book.lengths_[book.sorted_symbols_.front()];
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t sym = book.sorted_symbols_[i];
    const int len = book.lengths_[sym];
    code <<= (len - prev_len);
    prev_len = len;
    if (code >> len) throw std::invalid_argument("HuffmanCodebook: lengths violate the Kraft inequality");
    if (book.count_[len] == 0) {
      book.first_code_[len] = static_cast<std::uint64_t>(code);
      book.first_index_[len] = i;
    }
    ++book.count_[len];
    book.codes_[sym] = static_cast<std::uint64_t>(code);
    ++code;
  }
  book.max_length_ = book.lengths_[book.sorted_symbols_.back()];
  return book;
}

std::string HuffmanCodebook::codeword_string(std::size_t symbol) const {
  const int len = length(symbol);
  const std::uint64_t code = codeword(symbol);
  std::string out;
  for (int i = len - 1; i >= 0; --i) out.push_back(((code >> i) & 1U) ? '1' : '0');
  return out;
}

double HuffmanCodebook::average_length(std::span<const double> probs) const {
  if (probs.size() != lengths_.size())
    throw std::invalid_argument("average_length: probability vector size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) acc += probs[i] * lengths_[i];
  return acc;
}

double HuffmanCodebook::kraft_sum() const {
  double acc = 0.0;
  for (int len : lengths_) acc += std::ldexp(1.0, -len);
  return acc;
}

HuffmanCodebook build_codebook(std::span<const double> weights) {
  if (weights.empty()) throw std::invalid_argument("build_codebook: empty weight vector");
  bool any_positive = false;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("build_codebook: weights must be finite and non-negative");
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) throw std::invalid_argument("build_codebook: all weights are zero");
  const std::size_t n = weights.size();
  if (n == 1) return HuffmanCodebook::from_lengths({1});

  // (weight, lowest symbol in subtree, node id); min-heap.
  using Entry = std::tuple<double, std::uint32_t, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  std::vector<std::size_t> parent(2 * n - 1, 0);
  for (std::size_t i = 0; i < n; ++i) heap.emplace(weights[i], static_cast<std::uint32_t>(i), i);
  std::size_t next = n;
  while (heap.size() > 1) {
    const auto [wa, sa, ia] = heap.top();
    heap.pop();
    const auto [wb, sb, ib] = heap.top();
    heap.pop();
    parent[ia] = parent[ib] = next;
    heap.emplace(wa + wb, std::min(sa, sb), next);
    ++next;
  }
  const std::size_t root = next - 1;

  // Internal nodes are created after their children, so depths resolve
  // walking ids downward from the root.
  std::vector<int> depth(2 * n - 1, 0);
  for (std::size_t id = root; id-- > 0;) depth[id] = depth[parent[id]] + 1;
  std::vector<int> lengths(depth.begin(), depth.begin() + static_cast<std::ptrdiff_t>(n));
  if (*std::max_element(lengths.begin(), lengths.end()) > kMaxCodeLength)
    throw std::length_error("build_codebook: code length exceeds 64 bits");
  return HuffmanCodebook::from_lengths(std::move(lengths));
}

Bitstream encode(const HuffmanCodebook& book, std::span<const std::uint32_t> symbols) {
  Bitstream out;
  for (std::uint32_t s : symbols) {
    if (s >= book.size())
      throw std::invalid_argument("encode: symbol " + std::to_string(s) + " outside alphabet of size " +
                                  std::to_string(book.size()));
    out.push_bits(book.codeword(s), book.length(s));
  }
  return out;
}

std::vector<std::uint32_t> decode(const HuffmanCodebook& book, const Bitstream& stream, std::size_t n) {
  if (stream.bit_count > stream.bytes.size() * 8)
    throw DecodeError("bit count exceeds packed bytes", stream.bytes.size() * 8);
  std::vector<std::uint32_t> out;
  out.reserve(n);
  std::size_t pos = 0;
  while (out.size() < n) {
    const std::size_t start = pos;
    std::uint64_t code = 0;
    bool found = false;
    for (int len = 1; len <= book.max_length_; ++len) {
      if (pos >= stream.bit_count) throw DecodeError("truncated stream inside codeword", pos);
      code = (code << 1) | (stream.bit(pos) ? 1U : 0U);
      ++pos;
      if (book.count_[len] != 0 && code - book.first_code_[len] < book.count_[len]) {
        out.push_back(book.sorted_symbols_[book.first_index_[len] + (code - book.first_code_[len])]);
        found = true;
        break;
      }
    }
    if (!found) throw DecodeError("invalid codeword", start);
  }
  return out;
}

double shannon_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

}  // namespace rcq
