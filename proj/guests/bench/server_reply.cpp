#include "fl_guest.h"

void Run(const flg::Value& args, flg::Result& result) {
  const flg::Value* url = args.Get("target_url");
  const flg::Value* message = args.Get("message");
  if (!url || url->kind != flg::Kind::kString) return result.Fail("target_url must be a string");
  if (!message || message->kind != flg::Kind::kString) return result.Fail("message must be a string");

  flg::Buf req;
  req.Put("{\"method\":\"POST\",\"url\":");
  req.PutString(url->text);
  req.Put(",\"headers\":{\"Content-Type\":\"text/plain\"},\"body\":\"");
  flg::Base64Encode(req, message->text);
  req.Put("\",\"timeout_ms\":10000}");

  flg::HttpResponse resp = flg::Http(req.str());
  if (!resp.ok) return result.Fail(resp.error);
  if (resp.status_code != 200) return result.Fail("server replied with an error status");
  result.payload.Put("{\"reply\":");
  result.payload.PutString(resp.body);
  result.payload.Put('}');
}
