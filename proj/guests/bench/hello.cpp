#include "fl_guest.h"

void Run(const flg::Value& args, flg::Result& result) {
  flg::Str name = flg::S("world");
  if (const flg::Value* v = args.Get("name")) {
    if (v->kind != flg::Kind::kString) return result.Fail("name must be a string");
    name = v->text;
  }
  flg::Buf greeting;
  greeting.Put("Hello ");
  greeting.Put(name);
  result.payload.PutString(greeting.str());
}
