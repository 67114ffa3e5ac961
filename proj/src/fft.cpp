#include "xcorr/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace xcorr::fft {
namespace {

class PlanCache {
public:
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan get(int n, int sign) {
        std::lock_guard lock(mutex_);
        auto it = plans_.find({n, sign});
        if (it != plans_.end()) return it->second;
        // FFTW_ESTIMATE leaves the scratch buffer untouched and picks the same plan every run
        auto* buf = fftw_alloc_complex(static_cast<std::size_t>(n));
        fftw_plan p = fftw_plan_dft_1d(n, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(buf);
        plans_.emplace(std::pair{n, sign}, p);
        return p;
    }

private:
    std::mutex mutex_;
    std::map<std::pair<int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

void run(cvec& data, int sign) {
    if (data.size() <= 1) return;
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(cache().get(static_cast<int>(data.size()), sign), p, p);
}

}  // namespace

void forward(cvec& data) { run(data, FFTW_FORWARD); }
void inverse(cvec& data) { run(data, FFTW_BACKWARD); }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace xcorr::fft
