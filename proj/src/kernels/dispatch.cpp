#include "sflow/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace sflow::kernels {
namespace {

std::atomic<const Ops*> g_active{nullptr};
std::atomic<Backend> g_backend{Backend::Auto};

bool cpu_has_avx2() {
#if defined(SFLOW_BUILD_AVX2)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops* resolve(Backend b) {
#if defined(SFLOW_BUILD_AVX2)
  if (b == Backend::Avx2) return &avx2_ops();
  if (b == Backend::Auto && cpu_has_avx2()) return &avx2_ops();
#endif
  return &scalar_ops();
}

Backend backend_from_env() {
  const char* e = std::getenv("SPECTRAFLOW_SIMD");
  if (!e) return Backend::Auto;
  if (std::strcmp(e, "scalar") == 0) return Backend::Scalar;
  if (std::strcmp(e, "avx2") == 0) return Backend::Avx2;
  return Backend::Auto;
}

const Ops* init_active() {
  Backend b = backend_from_env();
  g_backend.store(b);
  const Ops* o = resolve(b);
  g_active.store(o);
  return o;
}

}  // namespace

const Ops& ops() {
  const Ops* o = g_active.load(std::memory_order_acquire);
  if (!o) o = init_active();
  return *o;
}

Backend active_backend() {
  ops();
  return g_backend.load();
}

void set_backend(Backend b) {
  g_backend.store(b);
  g_active.store(resolve(b), std::memory_order_release);
}

bool avx2_available() { return cpu_has_avx2(); }

}  // namespace sflow::kernels
