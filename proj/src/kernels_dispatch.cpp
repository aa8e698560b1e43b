#include <atomic>
#include <cstdlib>
#include <stdexcept>

#include "upright/kernels.hpp"

namespace upright::kern {

#ifndef UPRIGHT_HAVE_AVX2_TU
const KernelTable* avx2_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* resolve_default() {
  // UPRIGHT_KERNELS=scalar|avx2 overrides auto-detection.
  if (const char* env = std::getenv("UPRIGHT_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return &scalar_table();
    if (v == "avx2" && isa_available(Isa::avx2)) return avx2_table();
  }
  if (isa_available(Isa::avx2)) return avx2_table();
  return &scalar_table();
}

}  // namespace

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
      return avx2_table() != nullptr && cpu_has_avx2();
  }
  return false;
}

const KernelTable& table() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (!t) {
    t = resolve_default();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void force_isa(Isa isa) {
  if (!isa_available(isa)) throw std::runtime_error("kernel ISA not available: " + isa_name(isa));
  g_active.store(isa == Isa::avx2 ? avx2_table() : &scalar_table(), std::memory_order_release);
}

Isa active_isa() { return &table() == &scalar_table() ? Isa::scalar : Isa::avx2; }

std::string isa_name(Isa isa) { return isa == Isa::scalar ? "scalar" : "avx2"; }

}  // namespace upright::kern
