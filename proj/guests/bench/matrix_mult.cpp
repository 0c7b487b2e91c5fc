#include "fl_guest.h"

namespace {

// Reads a square integer matrix into row-major storage; returns n or 0.
uint32_t ReadSquare(const flg::Value* m, int64_t** out) {
  if (!m || m->kind != flg::Kind::kArray || m->count == 0) return 0;
  uint32_t n = m->count;
  if (n > 4096) return 0;
  auto* cells = static_cast<int64_t*>(flg::Alloc(n * n * sizeof(int64_t)));
  uint32_t r = 0;
  for (const flg::Value* row = m->first; row; row = row->next, ++r) {
    if (row->kind != flg::Kind::kArray || row->count != n) return 0;
    uint32_t c = 0;
    for (const flg::Value* x = row->first; x; x = x->next, ++c) {
      int64_t v;
      if (!x->AsInt(&v) || v <= -(INT64_C(1) << 31) || v >= (INT64_C(1) << 31)) return 0;
      cells[r * n + c] = v;
    }
  }
  *out = cells;
  return n;
}

}  // namespace

void Run(const flg::Value& args, flg::Result& result) {
  int64_t* a = nullptr;
  int64_t* b = nullptr;
  uint32_t n = ReadSquare(args.Get("a"), &a);
  uint32_t m = ReadSquare(args.Get("b"), &b);
  if (n == 0 || m == 0) return result.Fail("a and b must be non-empty square integer matrices");
  if (n != m) return result.Fail("matrix dimensions differ");

  result.payload.Put('[');
  for (uint32_t i = 0; i < n; ++i) {
    if (i) result.payload.Put(',');
    result.payload.Put('[');
    for (uint32_t j = 0; j < n; ++j) {
      int64_t acc = 0;
      for (uint32_t k = 0; k < n; ++k) acc += a[i * n + k] * b[k * n + j];
      if (j) result.payload.Put(',');
      result.payload.PutInt(acc);
    }
    result.payload.Put(']');
  }
  result.payload.Put(']');
}
