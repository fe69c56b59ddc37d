#pragma once

// Block arithmetic used by the toy encoder's inner loops: sum of squared
// differences and direct residual quantisation. Each kernel has a scalar
// reference implementation and an AVX2 variant; the active table is chosen
// once at startup from CPU capabilities and may be overridden with the
// CUSKIP_KERNELS environment variable ("scalar" or "avx2") or
// set_kernel_level(). All variants are bit-exact with the scalar reference.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace cuskip::simd {

// Integer quantiser for one effective QP. A residual magnitude |r| maps to
// level = (|r| * scale + offset) >> shift and reconstructs to
// ((level * inverse_scale) << inverse_shift + 32) >> 6.
struct QuantParams {
  std::int32_t scale = 16384;
  int shift = 14;
  std::int32_t offset = 0;
  std::int32_t inverse_scale = 64;
  int inverse_shift = 0;
};

QuantParams quant_params_for_qp(int qp);

struct ResidualStats {
  std::uint64_t distortion = 0;      // SSD between source and reconstruction
  std::uint32_t nonzero = 0;         // count of non-zero quantised levels
  std::uint32_t magnitude_log2 = 0;  // sum of floor(log2(level)) over non-zero levels

  friend bool operator==(const ResidualStats&, const ResidualStats&) = default;
};

using SsdFn = std::uint64_t (*)(const std::uint8_t* a, std::ptrdiff_t stride_a,
                                const std::uint8_t* b, std::ptrdiff_t stride_b,
                                int width, int height);

using QuantizeResidualFn = ResidualStats (*)(const std::uint8_t* src, std::ptrdiff_t stride_src,
                                             const std::uint8_t* pred, std::ptrdiff_t stride_pred,
                                             int width, int height, const QuantParams& quant);

enum class KernelLevel { Scalar, Avx2 };

struct KernelTable {
  KernelLevel level;
  std::string_view name;
  SsdFn ssd;
  QuantizeResidualFn quantize_residual;
};

const KernelTable& scalar_kernels();

// Present only when compiled for x86-64 and the running CPU reports AVX2.
const KernelTable* avx2_kernels();

const KernelTable& active_kernels();

// Returns false (and leaves the selection unchanged) if the level is not
// available on this machine.
bool set_kernel_level(KernelLevel level);

std::optional<KernelLevel> parse_kernel_level(std::string_view name);

}  // namespace cuskip::simd
