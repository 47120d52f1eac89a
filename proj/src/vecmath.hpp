#ifndef NNDE_SRC_VECMATH_HPP
#define NNDE_SRC_VECMATH_HPP

#include <cstddef>

namespace nnde::detail {

// s[i] = sin(x[i]), c[i] = cos(x[i]). The three arrays must not overlap.
// Built with vector math enabled, so results may differ from std::sin by a few ulp.
void sin_cos_array(const double* x, double* s, double* c, std::size_t n);

}  // namespace nnde::detail

#endif
