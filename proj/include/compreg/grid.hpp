#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "compreg/error.hpp"

namespace compreg {

/// lo, lo + step, ..., up to hi inclusive. Values are rounded to 12 decimals
/// so that e.g. 0.01:1:0.01 ends exactly at 1.
inline std::vector<double> arithmetic_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !std::isfinite(lo) || !std::isfinite(hi) || hi < lo)
    throw Error(Errc::InvalidArgument, "grid needs lo <= hi and step > 0");
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
  return out;
}

/// Default alpha search grid: [-1, 1] for zero-free data, (0, 1] when zeros are present.
inline std::vector<double> default_alpha_grid(bool has_zeros) {
  return has_zeros ? arithmetic_grid(0.01, 1.0, 0.01) : arithmetic_grid(-1.0, 1.0, 0.01);
}

}  // namespace compreg
