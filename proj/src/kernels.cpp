#include "lamer/kernels.hpp"

#include <cstdlib>
#include <vector>

namespace lamer::kernels {

void score_postings_scalar(const std::uint32_t* docs, const std::uint32_t* tfs,
                           std::size_t n, const double* norms, double weight,
                           double* acc) {
  for (std::size_t i = 0; i < n; ++i) {
    const double tf = static_cast<double>(tfs[i]);
    acc[docs[i]] += weight * tf / (tf + norms[docs[i]]);
  }
}

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

std::vector<KernelInfo> build_registry() {
  std::vector<KernelInfo> kernels;
  kernels.push_back({"scalar", &score_postings_scalar});
#if defined(__x86_64__) || defined(_M_X64)
  if (cpu_has_avx2()) kernels.push_back({"avx2", &score_postings_avx2});
#endif
  return kernels;
}

const std::vector<KernelInfo>& registry() {
  static const std::vector<KernelInfo> kernels = build_registry();
  return kernels;
}

const KernelInfo* find_kernel(std::string_view name) {
  for (const auto& k : registry())
    if (name == k.name) return &k;
  return nullptr;
}

const KernelInfo* initial_kernel() {
  if (const char* env = std::getenv("LAMER_KERNEL")) {
    if (const KernelInfo* k = find_kernel(env)) return k;
  }
  return &registry().back();  // widest available
}

const KernelInfo*& active_slot() {
  static const KernelInfo* active = initial_kernel();
  return active;
}

}  // namespace

std::span<const KernelInfo> available_kernels() { return registry(); }

ScorePostingsFn active_kernel() { return active_slot()->fn; }

const char* active_kernel_name() { return active_slot()->name; }

bool select_kernel(std::string_view name) {
  if (const KernelInfo* k = find_kernel(name)) {
    active_slot() = k;
    return true;
  }
  return false;
}

}  // namespace lamer::kernels
