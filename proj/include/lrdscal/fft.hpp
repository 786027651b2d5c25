#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace lrdscal::fft {

namespace detail {

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

/// FFTW planning is not thread-safe; execution on new arrays is. Plans are
/// created once per (size, direction) under a global lock and reused.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), in, out, sign, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(key, p);
    return p;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [k, p] : plans_) fftw_destroy_plan(p);
  }
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

}  // namespace detail

/// Aligned complex buffer suitable for the cached plans.
class Buffer {
 public:
  explicit Buffer(std::size_t n)
      : n_(n), data_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    for (std::size_t i = 0; i < n; ++i) data_.get()[i][0] = data_.get()[i][1] = 0.0;
  }
  std::size_t size() const { return n_; }
  std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(data_.get()); }
  const std::complex<double>* data() const {
    return reinterpret_cast<const std::complex<double>*>(data_.get());
  }
  std::complex<double>& operator[](std::size_t i) { return data()[i]; }
  const std::complex<double>& operator[](std::size_t i) const { return data()[i]; }
  fftw_complex* raw() { return data_.get(); }

 private:
  std::size_t n_;
  std::unique_ptr<fftw_complex, detail::FftwDeleter> data_;
};

/// Unnormalized forward transform: X_k = sum_t x_t exp(-2 pi i k t / n).
inline void forward(Buffer& in, Buffer& out) {
  fftw_execute_dft(detail::PlanCache::instance().get(in.size(), FFTW_FORWARD), in.raw(), out.raw());
}

/// Unnormalized backward transform: x_t = sum_k X_k exp(+2 pi i k t / n).
inline void backward(Buffer& in, Buffer& out) {
  fftw_execute_dft(detail::PlanCache::instance().get(in.size(), FFTW_BACKWARD), in.raw(), out.raw());
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Full linear convolution of two real sequences via zero-padded FFT.
inline std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  const std::size_t m = next_pow2(out_len);
  Buffer fa(m), fb(m), ta(m), tb(m);
  for (std::size_t i = 0; i < a.size(); ++i) fa[i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) fb[i] = b[i];
  forward(fa, ta);
  forward(fb, tb);
  for (std::size_t i = 0; i < m; ++i) ta[i] *= tb[i];
  backward(ta, fa);
  std::vector<double> out(out_len);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < out_len; ++i) out[i] = fa[i].real() * scale;
  return out;
}

}  // namespace lrdscal::fft
