#pragma once

namespace vocseg::threads {

// Worker cap for OpenMP kernels. Resolved once from VOCSEG_THREADS
// (falls back to omp_get_max_threads()).
int max_threads();

// Per-thread override forcing kernels to run serially. Used when outer
// code already parallelizes over independent work items (ablation runs,
// dataset evaluation) so kernels do not oversubscribe cores.
class ScopedSerial {
 public:
  ScopedSerial();
  ~ScopedSerial();
  ScopedSerial(const ScopedSerial&) = delete;
  ScopedSerial& operator=(const ScopedSerial&) = delete;

 private:
  bool prev_;
};

// Threads a kernel may use right now: 1 inside ScopedSerial, max_threads()
// otherwise. Results never depend on this value, only wall time does.
int kernel_threads();

}  // namespace vocseg::threads
