#include "vocseg/common/threads.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace vocseg::threads {

namespace {

int resolve_max_threads() {
  int n = omp_get_max_threads();
  if (const char* env = std::getenv("VOCSEG_THREADS")) {
    try {
      int v = std::stoi(env);
      if (v >= 1 && v < n) n = v;
    } catch (...) {
      // ignore malformed values, keep the OpenMP default
    }
  }
  return n < 1 ? 1 : n;
}

thread_local bool tl_serial = false;

}  // namespace

int max_threads() {
  static const int n = resolve_max_threads();
  return n;
}

ScopedSerial::ScopedSerial() : prev_(tl_serial) { tl_serial = true; }
ScopedSerial::~ScopedSerial() { tl_serial = prev_; }

int kernel_threads() { return tl_serial ? 1 : max_threads(); }

}  // namespace vocseg::threads
