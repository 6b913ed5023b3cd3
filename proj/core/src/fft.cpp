#include "imdd/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <numbers>

namespace imdd {

namespace {

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::vector<std::complex<double>> transform(const std::vector<std::complex<double>>& x, int sign) {
    std::vector<std::complex<double>> out(x.size());
    if (x.empty()) return out;
    std::vector<std::complex<double>> in = x;
    auto* pin = reinterpret_cast<fftw_complex*>(in.data());
    auto* pout = reinterpret_cast<fftw_complex*>(out.data());
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(x.size()), pin, pout, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

}  // namespace

std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x) {
    return transform(x, FFTW_FORWARD);
}

std::vector<std::complex<double>> ifft(const std::vector<std::complex<double>>& x) {
    auto out = transform(x, FFTW_BACKWARD);
    const double scale = out.empty() ? 1.0 : 1.0 / static_cast<double>(out.size());
    for (auto& v : out) v *= scale;
    return out;
}

double bin_angular_frequency(std::size_t k, std::size_t n, double fs) {
    const double kk = k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
    return 2.0 * std::numbers::pi * kk * fs / static_cast<double>(n);
}

}  // namespace imdd
