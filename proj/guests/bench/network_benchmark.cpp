#include "fl_guest.h"

void Run(const flg::Value& args, flg::Result& result) {
  const flg::Value* url = args.Get("target_url");
  if (!url || url->kind != flg::Kind::kString) return result.Fail("target_url must be a string");
  int64_t count = 16;
  if (const flg::Value* c = args.Get("count")) {
    if (!c->AsInt(&count) || count < 0 || count > 100000) return result.Fail("count must be a non-negative integer");
  }

  result.payload.Put("{\"durations_ms\":[");
  for (int64_t i = 0; i < count; ++i) {
    uint64_t start = flg::NowNs();
    flg::Buf req;
    req.Put("{\"method\":\"GET\",\"url\":");
    req.PutString(url->text);
    req.Put(",\"headers\":{\"X-Fl-Client-Ts\":\"");
    req.PutInt(static_cast<int64_t>(start / 1000000));
    req.Put("\"},\"body\":\"\",\"timeout_ms\":10000}");
    flg::HttpResponse resp = flg::Http(req.str());
    if (!resp.ok) return result.Fail(resp.error);
    if (resp.status_code != 200) return result.Fail("server replied with an error status");
    uint64_t micros = (flg::NowNs() - start) / 1000;
    if (micros == 0) micros = 1;
    if (i) result.payload.Put(',');
    result.payload.PutMilli(micros);
  }
  result.payload.Put("]}");
}
