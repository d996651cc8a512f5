#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "resplan/error.hpp"

namespace resplan {

/// Fixed-length binary vector. The tag keeps states and actions apart at
/// compile time; both share storage and text conversion.
template <typename Tag>
class BinaryVector {
public:
  BinaryVector() = default;
  explicit BinaryVector(std::size_t n, bool value = false) : bits_(n, value ? 1 : 0) {}
  BinaryVector(std::initializer_list<int> values) {
    bits_.reserve(values.size());
    for (int v : values) {
      bits_.push_back(v != 0 ? 1 : 0);
    }
  }

  /// Decodes bit `i` of `mask` into position `i` (node 0 = least significant).
  static BinaryVector from_mask(std::uint64_t mask, std::size_t n) {
    BinaryVector v(n);
    for (std::size_t i = 0; i < n; ++i) {
      v.bits_[i] = static_cast<std::uint8_t>((mask >> i) & 1U);
    }
    return v;
  }

  /// Parses a string of '0'/'1' characters; character k is position k.
  static BinaryVector parse(std::string_view text) {
    BinaryVector v;
    v.bits_.reserve(text.size());
    for (char c : text) {
      if (c != '0' && c != '1') {
        throw ParseError("binary vector may contain only '0' and '1', got '" + std::string(text) +
                         "'");
      }
      v.bits_.push_back(c == '1' ? 1 : 0);
    }
    return v;
  }

  [[nodiscard]] std::size_t size() const noexcept { return bits_.size(); }
  [[nodiscard]] bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
  void set(std::size_t i, bool value) noexcept { bits_[i] = value ? 1 : 0; }

  [[nodiscard]] std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::accumulate(bits_.begin(), bits_.end(), 0));
  }

  [[nodiscard]] bool all() const noexcept { return count() == size(); }
  [[nodiscard]] bool none() const noexcept { return count() == 0; }

  /// Requires size() <= 64.
  [[nodiscard]] std::uint64_t to_mask() const noexcept {
    std::uint64_t mask = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
      mask |= static_cast<std::uint64_t>(bits_[i]) << i;
    }
    return mask;
  }

  [[nodiscard]] std::string to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) {
      s[i] = bits_[i] ? '1' : '0';
    }
    return s;
  }

  friend bool operator==(const BinaryVector&, const BinaryVector&) = default;

private:
  std::vector<std::uint8_t> bits_;
};

struct StateTag {};
struct ActionTag {};

/// x in {0,1}^n; bit i = 1 when node i works normally.
using SystemState = BinaryVector<StateTag>;
/// a in {0,1}^n; bit i = 1 requests repair (faulty) or maintenance (working).
using ActionVector = BinaryVector<ActionTag>;

} // namespace resplan
