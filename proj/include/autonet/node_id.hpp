#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace autonet {

/// 128-bit flat identifier in the routing ID space. Ordering is unsigned
/// numeric order.
class NodeId {
 public:
  constexpr NodeId() = default;
  constexpr NodeId(std::uint64_t hi, std::uint64_t lo) : hi_(hi), lo_(lo) {}

  constexpr std::uint64_t hi() const { return hi_; }
  constexpr std::uint64_t lo() const { return lo_; }
  constexpr bool is_zero() const { return hi_ == 0 && lo_ == 0; }

  /// Bit `i` counted from the least significant bit (0..127).
  constexpr bool bit(int i) const {
    return i >= 64 ? ((hi_ >> (i - 64)) & 1U) != 0 : ((lo_ >> i) & 1U) != 0;
  }

  /// Index of the highest set bit, or -1 for zero.
  constexpr int highest_bit() const {
    if (hi_ != 0) return 127 - std::countl_zero(hi_);
    if (lo_ != 0) return 63 - std::countl_zero(lo_);
    return -1;
  }

  friend constexpr NodeId operator^(NodeId x, NodeId y) { return {x.hi_ ^ y.hi_, x.lo_ ^ y.lo_}; }
  friend constexpr auto operator<=>(const NodeId&, const NodeId&) = default;

  /// 32 lowercase hex digits.
  std::string hex() const;
  static std::optional<NodeId> from_hex(std::string_view text);
  /// Cosmetic IPv6-style rendering for logs (eight 16-bit groups).
  std::string ipv6() const;

 private:
  std::uint64_t hi_ = 0;
  std::uint64_t lo_ = 0;
};

/// XOR metric value; same representation as an id.
using XorDistance = NodeId;

/// First 128 bits (big-endian) of SHA-256 over the UTF-8 name.
/// Throws std::invalid_argument for an empty name.
NodeId derive_node_id(std::string_view name);

constexpr XorDistance xor_distance(NodeId a, NodeId b) { return a ^ b; }

/// Bucket of `other` in `owner`'s table: highest differing bit, -1 if equal.
constexpr int bucket_index(NodeId owner, NodeId other) { return (owner ^ other).highest_bit(); }

}  // namespace autonet
