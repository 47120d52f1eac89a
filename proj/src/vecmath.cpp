// Compiled with -ffast-math so that glibc exposes its SIMD sin/cos variants
// to the vectorizer. Nothing else lives in this file.
#include "vecmath.hpp"

#include <cmath>

namespace nnde::detail {

#if defined(__x86_64__) && defined(__GLIBC__) && !defined(__clang__)
__attribute__((target_clones("avx2", "default")))
#endif
void sin_cos_array(const double* __restrict x, double* __restrict s, double* __restrict c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) s[i] = std::sin(x[i]);
  for (std::size_t i = 0; i < n; ++i) c[i] = std::cos(x[i]);
}

}  // namespace nnde::detail
