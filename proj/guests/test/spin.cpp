#include "fl_guest.h"

void Run(const flg::Value&, flg::Result& result) {
  volatile uint32_t n = 0;
  for (;;) n = n + 1;
}
