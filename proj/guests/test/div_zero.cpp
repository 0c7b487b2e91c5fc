#include "fl_guest.h"

void Run(const flg::Value& args, flg::Result& result) {
  int64_t d = 0;
  if (const flg::Value* v = args.Get("d")) v->AsInt(&d);
  volatile int32_t num = 42;
  volatile int32_t den = static_cast<int32_t>(d);
  result.payload.PutInt(num / den);
}
