#include "fl/protocol/announce.h"

#include "fl/common/error.h"
#include "fl/protocol/codec.h"

namespace fl {

std::string EncodeAnnounce(const DiscoveryAnnounce& a) {
  if (a.listen_address.size() > kMaxAddressBytes) {
    throw Error(ErrorCode::kInvalidArgument, "listen address exceeds 253 bytes");
  }
  if (a.capacity_mb == 0) throw Error(ErrorCode::kInvalidArgument, "capacity must be positive");
  ByteWriter w;
  w.Raw(kAnnounceMagic);
  w.Id(a.worker_id);
  w.U16(static_cast<uint16_t>(a.listen_address.size()));
  w.Raw(a.listen_address);
  w.U32(a.capacity_mb);
  w.U64(a.epoch);
  return w.Take();
}

DiscoveryAnnounce DecodeAnnounce(std::string_view datagram) {
  if (datagram.size() > kMaxAnnounceBytes) {
    throw Error(ErrorCode::kMalformedFrame, "announce datagram exceeds 512 bytes");
  }
  ByteReader r(datagram);
  if (r.Raw(kAnnounceMagic.size()) != kAnnounceMagic) {
    throw Error(ErrorCode::kMalformedFrame, "bad announce magic");
  }
  DiscoveryAnnounce a;
  a.worker_id = r.Id<WorkerTag>();
  uint16_t len = r.U16();
  if (len > kMaxAddressBytes) throw Error(ErrorCode::kMalformedFrame, "address too long");
  a.listen_address = std::string(r.Raw(len));
  a.capacity_mb = r.U32();
  a.epoch = r.U64();
  r.ExpectEnd();
  if (a.capacity_mb == 0) throw Error(ErrorCode::kMalformedFrame, "zero capacity");
  return a;
}

}  // namespace fl
