// Backend dispatch. Compiled without AVX flags so the probe itself is safe on
// any x86-64 machine.
#include "csel/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace csel::kernels {

const Ops& scalar_ops();
#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops();
#endif

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops& ops(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return scalar_ops();
    case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (avx2_supported()) return avx2_ops();
#endif
      throw std::runtime_error("kernels: avx2 backend not available on this cpu");
  }
  throw std::logic_error("kernels: unknown backend");
}

namespace {

Backend resolve_backend() {
  if (const char* env = std::getenv("CSEL_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2") {
      if (!avx2_supported())
        throw std::runtime_error("CSEL_KERNELS=avx2 but cpu lacks avx2/fma");
      return Backend::avx2;
    }
    if (!v.empty() && v != "auto")
      throw std::runtime_error("CSEL_KERNELS must be scalar, avx2 or auto");
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

}  // namespace

Backend active_backend() {
  static const Backend b = resolve_backend();
  return b;
}

const Ops& active() { return ops(active_backend()); }

const char* backend_name(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace csel::kernels
