#include "fl_guest.h"

void Run(const flg::Value&, flg::Result& result) {
  fl_sleep(3000);
  result.payload.PutString(flg::S("Slept for 3 seconds"));
}
