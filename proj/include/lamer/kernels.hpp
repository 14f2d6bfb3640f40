#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace lamer::kernels {

// Posting-scoring inner loop:
//
//   acc[docs[i]] += weight * tfs[i] / (tfs[i] + norms[docs[i]])   for i in [0, n)
//
// where norms[d] = k1 * (1 - b + b * len(d) / avgdl) and weight folds the
// query-term multiplicity, IDF, and the (k1 + 1) numerator factor.
//
// Every variant performs identical per-element double arithmetic in the same
// order, so all implementations produce bit-exact results.
using ScorePostingsFn = void (*)(const std::uint32_t* docs, const std::uint32_t* tfs,
                                 std::size_t n, const double* norms, double weight,
                                 double* acc);

void score_postings_scalar(const std::uint32_t* docs, const std::uint32_t* tfs,
                           std::size_t n, const double* norms, double weight,
                           double* acc);

#if defined(__x86_64__) || defined(_M_X64)
// Compiled with AVX2 enabled; only dispatched when the CPU supports it.
void score_postings_avx2(const std::uint32_t* docs, const std::uint32_t* tfs,
                         std::size_t n, const double* norms, double weight,
                         double* acc);
#endif

struct KernelInfo {
  const char* name;
  ScorePostingsFn fn;
};

// Kernels runnable on this machine, scalar first.
std::span<const KernelInfo> available_kernels();

// The kernel the scorer dispatches to. Picks the widest available variant at
// startup; the LAMER_KERNEL environment variable ("scalar", "avx2") or
// select_kernel() overrides.
ScorePostingsFn active_kernel();
const char* active_kernel_name();
bool select_kernel(std::string_view name);

}  // namespace lamer::kernels
