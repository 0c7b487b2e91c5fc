#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace fl {

// Fills `out` from the operating system's cryptographic RNG.
void FillRandom(void* out, size_t len);

std::string HexEncode(const uint8_t* data, size_t len);

// 128-bit opaque identifier. Ordering is byte-lexicographic, which is also the
// ordering of the lowercase hex form.
template <typename Tag>
struct Id128 {
  std::array<uint8_t, 16> bytes{};

  static Id128 Random() {
    Id128 id;
    FillRandom(id.bytes.data(), id.bytes.size());
    return id;
  }

  static std::optional<Id128> FromHex(std::string_view hex) {
    if (hex.size() != 32) return std::nullopt;
    Id128 id;
    for (size_t i = 0; i < 16; ++i) {
      int hi = HexDigit(hex[2 * i]);
      int lo = HexDigit(hex[2 * i + 1]);
      if (hi < 0 || lo < 0) return std::nullopt;
      id.bytes[i] = static_cast<uint8_t>((hi << 4) | lo);
    }
    return id;
  }

  std::string ToHex() const { return HexEncode(bytes.data(), bytes.size()); }

  friend auto operator<=>(const Id128&, const Id128&) = default;
  friend bool operator==(const Id128&, const Id128&) = default;

 private:
  static int HexDigit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  }
};

struct CorrelationTag {};
struct WorkerTag {};

using CorrelationId = Id128<CorrelationTag>;
using WorkerId = Id128<WorkerTag>;

struct Id128Hash {
  template <typename Tag>
  size_t operator()(const Id128<Tag>& id) const noexcept {
    uint64_t a;
    uint64_t b;
    std::memcpy(&a, id.bytes.data(), 8);
    std::memcpy(&b, id.bytes.data() + 8, 8);
    return std::hash<uint64_t>{}(a ^ (b * 0x9e3779b97f4a7c15ULL));
  }
};

}  // namespace fl
