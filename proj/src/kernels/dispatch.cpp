#include <cstdlib>
#include <string_view>

#include "corrkit/kernels.hpp"

namespace corrkit::kernels {

#if defined(CORRKIT_HAVE_AVX2)
namespace detail {
const KernelTable* avx2_table_impl();
}
#endif

const KernelTable* avx2_table() {
#if defined(CORRKIT_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? detail::avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable& select() {
  const char* env = std::getenv("CORRKIT_SIMD");
  const std::string_view want = env ? env : "";
  if (want == "scalar") return scalar_table();
  if (const KernelTable* t = avx2_table()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace corrkit::kernels
