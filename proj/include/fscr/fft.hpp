#pragma once

// Thin FFTW wrapper. Plans are created once per (length, direction) and
// cached; execution uses the new-array interface so cached plans can be
// shared between threads.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fscr {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

namespace detail {

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
        // FFTW_UNALIGNED lets the plan run on std::vector storage.
        auto* in = fftw_alloc_complex(n);
        auto* out = fftw_alloc_complex(n);
        fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), in, out, sign,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(in);
        fftw_free(out);
        if (p == nullptr) throw std::runtime_error("fftw: plan creation failed");
        plans_.emplace(key, p);
        return p;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

private:
    PlanCache() = default;
    ~PlanCache() {
        for (auto& [key, p] : plans_) fftw_destroy_plan(p);
    }

    std::mutex mutex_;
    std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

inline CVec run_fft(std::span<const cplx> in, int sign) {
    CVec out(in.size());
    if (in.empty()) return out;
    // fftw_execute_dft does not modify the input for out-of-place plans.
    auto* src = const_cast<fftw_complex*>(reinterpret_cast<const fftw_complex*>(in.data()));
    fftw_execute_dft(PlanCache::instance().get(in.size(), sign), src,
                     reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

}  // namespace detail

/// Unnormalized forward DFT, X[k] = sum_n x[n] exp(-j 2 pi k n / N).
inline CVec fft(std::span<const cplx> x) { return detail::run_fft(x, FFTW_FORWARD); }

/// Inverse DFT including the 1/N factor.
inline CVec ifft(std::span<const cplx> x) {
    CVec out = detail::run_fft(x, FFTW_BACKWARD);
    const double scale = out.empty() ? 1.0 : 1.0 / static_cast<double>(out.size());
    for (auto& v : out) v *= scale;
    return out;
}

/// Frequency of DFT bin k for an n-point transform at `rate_hz`, mapped to [-rate/2, rate/2).
inline double bin_frequency(std::size_t k, std::size_t n, double rate_hz) {
    const auto kk = static_cast<double>(k);
    const auto nn = static_cast<double>(n);
    return (2 * k < n ? kk : kk - nn) * rate_hz / nn;
}

}  // namespace fscr
