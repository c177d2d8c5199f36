#include "autonet/node_id.hpp"

#include <openssl/sha.h>

#include <array>
#include <cstdio>
#include <stdexcept>

namespace autonet {

namespace {
std::uint64_t load_be64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}
}  // namespace

NodeId derive_node_id(std::string_view name) {
  if (name.empty()) throw std::invalid_argument("node id requires a nonempty name");
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(name.data()), name.size(), digest.data());
  return NodeId(load_be64(digest.data()), load_be64(digest.data() + 8));
}

std::string NodeId::hex() const {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi_),
                static_cast<unsigned long long>(lo_));
  return buf;
}

std::optional<NodeId> NodeId::from_hex(std::string_view text) {
  if (text.size() != 32) return std::nullopt;
  std::uint64_t parts[2] = {0, 0};
  for (std::size_t i = 0; i < 32; ++i) {
    char c = text[i];
    int digit;
    if (c >= '0' && c <= '9') {
      digit = c - '0';
    } else if (c >= 'a' && c <= 'f') {
      digit = c - 'a' + 10;
    } else {
      return std::nullopt;
    }
    parts[i / 16] = (parts[i / 16] << 4) | static_cast<std::uint64_t>(digit);
  }
  return NodeId(parts[0], parts[1]);
}

std::string NodeId::ipv6() const {
  std::string out;
  for (int group = 7; group >= 0; --group) {
    std::uint64_t word = group >= 4 ? hi_ : lo_;
    unsigned value = static_cast<unsigned>((word >> ((group % 4) * 16)) & 0xffffU);
    char buf[8];
    std::snprintf(buf, sizeof buf, "%x", value);
    out += buf;
    if (group > 0) out += ':';
  }
  return out;
}

}  // namespace autonet
