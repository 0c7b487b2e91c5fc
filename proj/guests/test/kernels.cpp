#define FL_GUEST_CUSTOM_RUN
#include "fl_guest.h"
#include "kernels.h"

FL_EXPORT("k_int") int64_t k_int(int64_t s) { return kern::IntOps(s); }
FL_EXPORT("k_float") int64_t k_float(int64_t s) { return kern::FloatOps(s); }
FL_EXPORT("k_switch") int64_t k_switch(int64_t s) { return kern::SwitchOps(s); }
FL_EXPORT("k_indirect") int64_t k_indirect(int64_t s) { return kern::IndirectOps(s); }
FL_EXPORT("k_memory") int64_t k_memory(int64_t s) { return kern::MemoryOps(s); }

FL_EXPORT("_fl_run") int64_t _fl_run(uint32_t, uint32_t) { return 0; }
