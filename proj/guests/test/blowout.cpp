// Allocates 1 MiB chunks until the host refuses to grow memory.
#include "fl_guest.h"

void Run(const flg::Value&, flg::Result& result) {
  for (;;) {
    auto* p = static_cast<volatile char*>(flg::Alloc(1 << 20));
    p[0] = 1;
  }
}
