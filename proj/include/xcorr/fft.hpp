#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace xcorr::fft {

using cvec = std::vector<std::complex<double>>;

// Unnormalized in-place DFTs; forward uses exp(-2 pi i jk/n). Safe to call from
// several threads at once. Plans are built with FFTW_ESTIMATE so that results do
// not depend on run-time plan selection.
void forward(cvec& data);
void inverse(cvec& data);

std::size_t next_pow2(std::size_t n);

}  // namespace xcorr::fft
