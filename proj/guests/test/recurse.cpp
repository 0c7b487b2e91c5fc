#include "fl_guest.h"

// The stack buffer keeps the compiler from turning this into a loop.
__attribute__((noinline)) int64_t Deep(int64_t n) {
  volatile char pad[32];
  pad[0] = static_cast<char>(n);
  return Deep(n + 1) + pad[0];
}

void Run(const flg::Value&, flg::Result& result) { result.payload.PutInt(Deep(0)); }
