#include "fl_guest.h"

void Run(const flg::Value&, flg::Result&) { __builtin_trap(); }
