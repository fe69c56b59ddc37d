#include <bit>
#include <cstdlib>

#include "kernels_internal.hpp"

namespace cuskip::simd::detail {

std::uint64_t ssd_scalar(const std::uint8_t* a, std::ptrdiff_t stride_a, const std::uint8_t* b,
                         std::ptrdiff_t stride_b, int width, int height) {
  std::uint64_t sum = 0;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* ra = a + y * stride_a;
    const std::uint8_t* rb = b + y * stride_b;
    for (int x = 0; x < width; ++x) {
      const int d = int{ra[x]} - int{rb[x]};
      sum += static_cast<std::uint64_t>(d * d);
    }
  }
  return sum;
}

ResidualStats quantize_residual_scalar(const std::uint8_t* src, std::ptrdiff_t stride_src,
                                       const std::uint8_t* pred, std::ptrdiff_t stride_pred, int width,
                                       int height, const QuantParams& quant) {
  ResidualStats stats;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* rs = src + y * stride_src;
    const std::uint8_t* rp = pred + y * stride_pred;
    for (int x = 0; x < width; ++x) {
      const std::int32_t magnitude = std::abs(std::int32_t{rs[x]} - std::int32_t{rp[x]});
      const std::int32_t level = (magnitude * quant.scale + quant.offset) >> quant.shift;
      const std::int32_t recon = (((level * quant.inverse_scale) << quant.inverse_shift) + 32) >> 6;
      const std::int32_t error = magnitude - recon;
      stats.distortion += static_cast<std::uint64_t>(error * error);
      if (level != 0) {
        ++stats.nonzero;
        stats.magnitude_log2 += static_cast<std::uint32_t>(std::bit_width(static_cast<std::uint32_t>(level)) - 1);
      }
    }
  }
  return stats;
}

}  // namespace cuskip::simd::detail
