#pragma once

#include <string>
#include <string_view>

#include "fl/protocol/types.h"

namespace fl {

inline constexpr size_t kMaxAnnounceBytes = 512;
inline constexpr std::string_view kAnnounceMagic = "FLSS";

// Datagram = "FLSS" | worker_id[16] | u16 BE addr_len | addr | u32 BE
// capacity_mb | u64 BE epoch. Throws Error(kInvalidArgument) when the address
// exceeds 253 bytes or capacity is zero.
std::string EncodeAnnounce(const DiscoveryAnnounce& a);

// Throws Error(kMalformedFrame) on bad magic, truncation or trailing bytes.
DiscoveryAnnounce DecodeAnnounce(std::string_view datagram);

}  // namespace fl
