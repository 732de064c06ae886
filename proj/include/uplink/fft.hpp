#pragma once

// Thin wrapper around FFTW for complex<double> buffers. Plans are cached
// per (size, direction) and created with FFTW_UNALIGNED so they work on
// arbitrary std::vector storage.

#include <complex>
#include <map>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace uplink::fft {

using cvec = std::vector<std::complex<double>>;

namespace detail {

inline fftw_plan plan_for(std::size_t n, int sign) {
    static std::map<std::pair<std::size_t, int>, fftw_plan> cache;
    auto key = std::make_pair(n, sign);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<std::complex<double>> tmp(n);
    fftw_plan p = fftw_plan_dft_1d(
        static_cast<int>(n), reinterpret_cast<fftw_complex*>(tmp.data()),
        reinterpret_cast<fftw_complex*>(tmp.data()), sign,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache.emplace(key, p);
    return p;
}

inline void execute(const fftw_plan p, cvec& buf) {
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(buf.data()),
                     reinterpret_cast<fftw_complex*>(buf.data()));
}

}  // namespace detail

// In-place forward DFT, unnormalized.
inline void forward(cvec& buf) {
    if (buf.empty()) throw std::invalid_argument("fft: empty buffer");
    detail::execute(detail::plan_for(buf.size(), FFTW_FORWARD), buf);
}

// In-place inverse DFT, normalized by 1/N.
inline void inverse(cvec& buf) {
    if (buf.empty()) throw std::invalid_argument("fft: empty buffer");
    detail::execute(detail::plan_for(buf.size(), FFTW_BACKWARD), buf);
    const double s = 1.0 / static_cast<double>(buf.size());
    for (auto& v : buf) v *= s;
}

inline cvec forward_copy(const cvec& in) {
    cvec out = in;
    forward(out);
    return out;
}

inline cvec inverse_copy(const cvec& in) {
    cvec out = in;
    inverse(out);
    return out;
}

// Frequency of DFT bin i for sample rate fs (negative frequencies in the
// upper half of the grid).
inline double bin_freq(std::size_t i, std::size_t n, double fs) {
    const double k = i < (n + 1) / 2
                         ? static_cast<double>(i)
                         : static_cast<double>(i) - static_cast<double>(n);
    return k * fs / static_cast<double>(n);
}

}  // namespace uplink::fft
