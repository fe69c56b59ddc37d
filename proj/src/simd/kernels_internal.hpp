#pragma once

#include "cuskip/simd/pixel_kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define CUSKIP_HAVE_AVX2 1
#else
#define CUSKIP_HAVE_AVX2 0
#endif

namespace cuskip::simd::detail {

std::uint64_t ssd_scalar(const std::uint8_t* a, std::ptrdiff_t stride_a, const std::uint8_t* b,
                         std::ptrdiff_t stride_b, int width, int height);

ResidualStats quantize_residual_scalar(const std::uint8_t* src, std::ptrdiff_t stride_src,
                                       const std::uint8_t* pred, std::ptrdiff_t stride_pred, int width,
                                       int height, const QuantParams& quant);

#if CUSKIP_HAVE_AVX2
std::uint64_t ssd_avx2(const std::uint8_t* a, std::ptrdiff_t stride_a, const std::uint8_t* b,
                       std::ptrdiff_t stride_b, int width, int height);

ResidualStats quantize_residual_avx2(const std::uint8_t* src, std::ptrdiff_t stride_src,
                                     const std::uint8_t* pred, std::ptrdiff_t stride_pred, int width,
                                     int height, const QuantParams& quant);
#endif

}  // namespace cuskip::simd::detail
