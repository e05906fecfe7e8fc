#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "fraclab/grid.hpp"

namespace fraclab {

/** Complex Fourier coefficients of a Field, unnormalized (plain DFT sums). */
struct Spectrum {
    Grid grid;
    std::vector<std::complex<double>> coeffs;
};

namespace detail {

// One cached plan pair per (dim, n). Plan creation is serialized behind a
// mutex because the FFTW planner is not thread safe; execution goes through
// fftw_execute_dft on caller-owned buffers (the documented thread-safe path).
// Plans are created with FFTW_ESTIMATE | FFTW_UNALIGNED so that any
// std::complex<double> buffer qualifies regardless of alignment.
struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
};

inline PlanPair& plans_for(const Grid& g) {
    static std::mutex mtx;
    static std::map<std::pair<int, int>, PlanPair> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto key = std::make_pair(g.dim, g.n);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    std::vector<std::complex<double>> a(g.size()), b(g.size());
    auto* pa = reinterpret_cast<fftw_complex*>(a.data());
    auto* pb = reinterpret_cast<fftw_complex*>(b.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    PlanPair p;
    if (g.dim == 1) {
        p.fwd = fftw_plan_dft_1d(g.n, pa, pb, FFTW_FORWARD, flags);
        p.bwd = fftw_plan_dft_1d(g.n, pa, pb, FFTW_BACKWARD, flags);
    } else {
        p.fwd = fftw_plan_dft_2d(g.n, g.n, pa, pb, FFTW_FORWARD, flags);
        p.bwd = fftw_plan_dft_2d(g.n, g.n, pa, pb, FFTW_BACKWARD, flags);
    }
    return cache.emplace(key, p).first->second;
}

}  // namespace detail

// Signed integer frequency for axis index k in [0, n): the usual DFT layout
// where the upper half of the spectrum holds the negative frequencies.
inline int freq_index(int k, int n) { return k <= n / 2 - 1 ? k : k - n; }

// |xi|^2 at the flat spectral index, with xi = 2*pi*m/L per axis.
inline double frequency_sq(const Grid& g, std::size_t flat) {
    const double base = 2.0 * M_PI / g.extent;
    if (g.dim == 1) {
        const double x = base * freq_index(static_cast<int>(flat), g.n);
        return x * x;
    }
    const int k0 = static_cast<int>(flat / static_cast<std::size_t>(g.n));
    const int k1 = static_cast<int>(flat % static_cast<std::size_t>(g.n));
    const double x0 = base * freq_index(k0, g.n);
    const double x1 = base * freq_index(k1, g.n);
    return x0 * x0 + x1 * x1;
}

inline Spectrum forward_transform(const Field& f) {
    if (f.values.size() != f.grid.size()) throw invalid_input("forward_transform: size mismatch");
    std::vector<std::complex<double>> in(f.values.begin(), f.values.end());
    Spectrum out{f.grid, std::vector<std::complex<double>>(f.grid.size())};
    auto& plans = detail::plans_for(f.grid);
    fftw_execute_dft(plans.fwd, reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.coeffs.data()));
    return out;
}

// Inverse DFT, normalized by the node count. The imaginary residual of a
// real-symbol pipeline is roundoff; it is discarded here.
inline Field inverse_transform(const Spectrum& s) {
    if (s.coeffs.size() != s.grid.size()) throw invalid_input("inverse_transform: size mismatch");
    std::vector<std::complex<double>> in = s.coeffs;
    std::vector<std::complex<double>> tmp(s.grid.size());
    auto& plans = detail::plans_for(s.grid);
    fftw_execute_dft(plans.bwd, reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(tmp.data()));
    Field out{s.grid, std::vector<double>(s.grid.size())};
    const double scale = 1.0 / static_cast<double>(s.grid.size());
    for (std::size_t i = 0; i < tmp.size(); ++i) out.values[i] = tmp[i].real() * scale;
    return out;
}

// Applies a real Fourier multiplier sigma(|xi|^2) to a field.
template <typename SymbolFn>
Field apply_multiplier(const Field& f, SymbolFn&& symbol_of_xi2) {
    Spectrum s = forward_transform(f);
    for (std::size_t i = 0; i < s.coeffs.size(); ++i)
        s.coeffs[i] *= symbol_of_xi2(frequency_sq(f.grid, i));
    return inverse_transform(s);
}

}  // namespace fraclab
