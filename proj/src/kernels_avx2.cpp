// AVX2 variant of the posting-scoring kernel. Built with -mavx2; the
// dispatcher in kernels.cpp only hands it out when the CPU reports AVX2.
//
// Four postings per iteration: gather the per-document length norms, widen
// the term frequencies to double, and vectorize the divide (the expensive
// op). AVX2 has no scatter, so the accumulator update stays scalar; each
// element sees exactly one mul, one div, one add, in index order, which keeps
// results bit-exact with the scalar kernel.

#include "lamer/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace lamer::kernels {

void score_postings_avx2(const std::uint32_t* docs, const std::uint32_t* tfs,
                         std::size_t n, const double* norms, double weight,
                         double* acc) {
  const __m256d w = _mm256_set1_pd(weight);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m128i d32 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(docs + i));
    const __m128i t32 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(tfs + i));
    const __m256d tf = _mm256_cvtepi32_pd(t32);
    const __m256d norm = _mm256_i32gather_pd(norms, d32, 8);
    const __m256d contrib =
        _mm256_div_pd(_mm256_mul_pd(w, tf), _mm256_add_pd(tf, norm));
    alignas(32) double out[4];
    _mm256_store_pd(out, contrib);
    acc[docs[i + 0]] += out[0];
    acc[docs[i + 1]] += out[1];
    acc[docs[i + 2]] += out[2];
    acc[docs[i + 3]] += out[3];
  }
  for (; i < n; ++i) {
    const double tf = static_cast<double>(tfs[i]);
    acc[docs[i]] += weight * tf / (tf + norms[docs[i]]);
  }
}

}  // namespace lamer::kernels

#endif
