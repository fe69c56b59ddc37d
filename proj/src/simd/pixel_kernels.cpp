#include "cuskip/simd/pixel_kernels.hpp"

#include <array>
#include <atomic>
#include <cstdlib>
#include <string>

#include "cuskip/error.hpp"
#include "kernels_internal.hpp"

namespace cuskip::simd {

namespace {

constexpr std::array<std::int32_t, 6> kForwardScale = {26214, 23302, 20560, 18396, 16384, 14564};
constexpr std::array<std::int32_t, 6> kInverseScale = {40, 45, 51, 57, 64, 72};

const KernelTable kScalarTable{KernelLevel::Scalar, "scalar", &detail::ssd_scalar,
                               &detail::quantize_residual_scalar};

#if CUSKIP_HAVE_AVX2
const KernelTable kAvx2Table{KernelLevel::Avx2, "avx2", &detail::ssd_avx2,
                             &detail::quantize_residual_avx2};
#endif

bool cpu_has_avx2() {
#if CUSKIP_HAVE_AVX2
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable* table_for(KernelLevel level) {
  switch (level) {
    case KernelLevel::Scalar:
      return &kScalarTable;
    case KernelLevel::Avx2:
      return avx2_kernels();
  }
  return nullptr;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("CUSKIP_KERNELS")) {
    if (auto level = parse_kernel_level(env)) {
      if (const KernelTable* table = table_for(*level)) return table;
    }
  }
  if (const KernelTable* avx2 = avx2_kernels()) return avx2;
  return &kScalarTable;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

QuantParams quant_params_for_qp(int qp) {
  if (qp < 0 || qp > 51) throw DomainError("quantiser QP must lie in [0, 51], got " + std::to_string(qp));
  QuantParams q;
  q.scale = kForwardScale[qp % 6];
  q.shift = 14 + qp / 6;
  // Inter-style dead zone: round at one sixth of a step.
  q.offset = static_cast<std::int32_t>((std::int64_t{1} << q.shift) / 6);
  q.inverse_scale = kInverseScale[qp % 6];
  q.inverse_shift = qp / 6;
  return q;
}

const KernelTable& scalar_kernels() { return kScalarTable; }

const KernelTable* avx2_kernels() {
#if CUSKIP_HAVE_AVX2
  static const bool supported = cpu_has_avx2();
  return supported ? &kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active_kernels() { return *active_slot().load(std::memory_order_acquire); }

bool set_kernel_level(KernelLevel level) {
  const KernelTable* table = table_for(level);
  if (!table) return false;
  active_slot().store(table, std::memory_order_release);
  return true;
}

std::optional<KernelLevel> parse_kernel_level(std::string_view name) {
  if (name == "scalar") return KernelLevel::Scalar;
  if (name == "avx2") return KernelLevel::Avx2;
  return std::nullopt;
}

}  // namespace cuskip::simd
