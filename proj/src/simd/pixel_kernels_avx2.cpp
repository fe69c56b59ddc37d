#include "kernels_internal.hpp"

#if CUSKIP_HAVE_AVX2

#include <immintrin.h>

#define CUSKIP_AVX2 __attribute__((target("avx2")))

namespace cuskip::simd::detail {

namespace {

CUSKIP_AVX2 inline std::uint32_t horizontal_sum_epi32(__m256i v) {
  __m128i sum = _mm_add_epi32(_mm256_castsi256_si128(v), _mm256_extracti128_si256(v, 1));
  sum = _mm_add_epi32(sum, _mm_shuffle_epi32(sum, _MM_SHUFFLE(1, 0, 3, 2)));
  sum = _mm_add_epi32(sum, _mm_shuffle_epi32(sum, _MM_SHUFFLE(2, 3, 0, 1)));
  return static_cast<std::uint32_t>(_mm_cvtsi128_si32(sum));
}

CUSKIP_AVX2 inline __m256i load8_epi32(const std::uint8_t* p) {
  return _mm256_cvtepu8_epi32(_mm_loadl_epi64(reinterpret_cast<const __m128i*>(p)));
}

}  // namespace

CUSKIP_AVX2 std::uint64_t ssd_avx2(const std::uint8_t* a, std::ptrdiff_t stride_a, const std::uint8_t* b,
                                   std::ptrdiff_t stride_b, int width, int height) {
  std::uint64_t total = 0;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* ra = a + y * stride_a;
    const std::uint8_t* rb = b + y * stride_b;
    __m256i acc = _mm256_setzero_si256();
    int x = 0;
    for (; x + 16 <= width; x += 16) {
      const __m256i va = _mm256_cvtepu8_epi16(_mm_loadu_si128(reinterpret_cast<const __m128i*>(ra + x)));
      const __m256i vb = _mm256_cvtepu8_epi16(_mm_loadu_si128(reinterpret_cast<const __m128i*>(rb + x)));
      const __m256i d = _mm256_sub_epi16(va, vb);
      acc = _mm256_add_epi32(acc, _mm256_madd_epi16(d, d));
    }
    for (; x + 8 <= width; x += 8) {
      const __m256i va = load8_epi32(ra + x);
      const __m256i vb = load8_epi32(rb + x);
      const __m256i d = _mm256_sub_epi32(va, vb);
      acc = _mm256_add_epi32(acc, _mm256_mullo_epi32(d, d));
    }
    total += horizontal_sum_epi32(acc);
    if (x < width) total += ssd_scalar(ra + x, stride_a, rb + x, stride_b, width - x, 1);
  }
  return total;
}

CUSKIP_AVX2 ResidualStats quantize_residual_avx2(const std::uint8_t* src, std::ptrdiff_t stride_src,
                                                 const std::uint8_t* pred, std::ptrdiff_t stride_pred,
                                                 int width, int height, const QuantParams& quant) {
  const __m256i scale = _mm256_set1_epi32(quant.scale);
  const __m256i offset = _mm256_set1_epi32(quant.offset);
  const __m128i shift = _mm_cvtsi32_si128(quant.shift);
  const __m256i inverse_scale = _mm256_set1_epi32(quant.inverse_scale);
  const __m128i inverse_shift = _mm_cvtsi32_si128(quant.inverse_shift);
  const __m256i rounding = _mm256_set1_epi32(32);
  const __m256i exponent_bias = _mm256_set1_epi32(127);
  const __m256i zero = _mm256_setzero_si256();

  ResidualStats stats;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* rs = src + y * stride_src;
    const std::uint8_t* rp = pred + y * stride_pred;
    __m256i dist_acc = zero;
    __m256i nz_acc = zero;
    __m256i log_acc = zero;
    int x = 0;
    for (; x + 8 <= width; x += 8) {
      const __m256i magnitude = _mm256_abs_epi32(_mm256_sub_epi32(load8_epi32(rs + x), load8_epi32(rp + x)));
      const __m256i level =
          _mm256_srl_epi32(_mm256_add_epi32(_mm256_mullo_epi32(magnitude, scale), offset), shift);
      const __m256i recon = _mm256_srai_epi32(
          _mm256_add_epi32(_mm256_sll_epi32(_mm256_mullo_epi32(level, inverse_scale), inverse_shift), rounding),
          6);
      const __m256i error = _mm256_sub_epi32(magnitude, recon);
      dist_acc = _mm256_add_epi32(dist_acc, _mm256_mullo_epi32(error, error));

      const __m256i nonzero = _mm256_cmpgt_epi32(level, zero);
      nz_acc = _mm256_sub_epi32(nz_acc, nonzero);
      // floor(log2(level)) from the float exponent; exact for level < 2^24.
      const __m256i exponent = _mm256_sub_epi32(
          _mm256_srli_epi32(_mm256_castps_si256(_mm256_cvtepi32_ps(level)), 23), exponent_bias);
      log_acc = _mm256_add_epi32(log_acc, _mm256_and_si256(exponent, nonzero));
    }
    stats.distortion += horizontal_sum_epi32(dist_acc);
    stats.nonzero += horizontal_sum_epi32(nz_acc);
    stats.magnitude_log2 += horizontal_sum_epi32(log_acc);
    if (x < width) {
      const ResidualStats tail =
          quantize_residual_scalar(rs + x, stride_src, rp + x, stride_pred, width - x, 1, quant);
      stats.distortion += tail.distortion;
      stats.nonzero += tail.nonzero;
      stats.magnitude_log2 += tail.magnitude_log2;
    }
  }
  return stats;
}

}  // namespace cuskip::simd::detail

#endif  // CUSKIP_HAVE_AVX2
