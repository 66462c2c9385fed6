#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace brainage::fft {

// Real-to-complex transform of length n (n/2 + 1 output bins), unnormalised.
void forward(std::span<const double> in, std::vector<std::complex<double>>& out);

// Complex-to-real inverse of length n; input has n/2 + 1 bins. Unnormalised:
// inverse(forward(x)) == n * x.
void inverse(std::span<const std::complex<double>> in, std::size_t n, std::vector<double>& out);

}  // namespace brainage::fft
