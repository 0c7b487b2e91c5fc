#include "fl/common/id128.h"

#include <openssl/rand.h>

#include "fl/common/error.h"

namespace fl {

void FillRandom(void* out, size_t len) {
  if (RAND_bytes(static_cast<unsigned char*>(out), static_cast<int>(len)) != 1) {
    throw Error(ErrorCode::kIo, "cryptographic RNG unavailable");
  }
}

std::string HexEncode(const uint8_t* data, size_t len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(len * 2, '0');
  for (size_t i = 0; i < len; ++i) {
    out[2 * i] = kDigits[data[i] >> 4];
    out[2 * i + 1] = kDigits[data[i] & 0xf];
  }
  return out;
}

}  // namespace fl
