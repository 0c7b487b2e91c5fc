// Parses the arguments and writes them back as the payload.
#include "fl_guest.h"

void Run(const flg::Value& args, flg::Result& result) { flg::WriteJson(result.payload, &args); }
