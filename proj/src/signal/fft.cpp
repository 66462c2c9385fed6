#include "brainage/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>

#include "brainage/error.hpp"

namespace brainage::fft {

namespace {

// FFTW planning is not thread safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class Plan {
 public:
  explicit Plan(std::size_t n) : n_(n) {
    const std::size_t bins = n / 2 + 1;
    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    spec_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins));
    std::lock_guard<std::mutex> lock(planner_mutex());
    const int len = static_cast<int>(n);
    r2c_ = fftw_plan_dft_r2c_1d(len, real_, spec_, FFTW_ESTIMATE);
    c2r_ = fftw_plan_dft_c2r_1d(len, spec_, real_, FFTW_ESTIMATE);
  }
  ~Plan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(r2c_);
    fftw_destroy_plan(c2r_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;

  void forward(std::span<const double> in, std::vector<std::complex<double>>& out) {
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(r2c_);
    const std::size_t bins = n_ / 2 + 1;
    out.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) out[k] = {spec_[k][0], spec_[k][1]};
  }

  void inverse(std::span<const std::complex<double>> in, std::vector<double>& out) {
    const std::size_t bins = n_ / 2 + 1;
    for (std::size_t k = 0; k < bins; ++k) {
      spec_[k][0] = in[k].real();
      spec_[k][1] = in[k].imag();
    }
    fftw_execute(c2r_);
    out.assign(real_, real_ + n_);
  }

 private:
  std::size_t n_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan r2c_ = nullptr;
  fftw_plan c2r_ = nullptr;
};

Plan& plan_for(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<Plan>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::make_unique<Plan>(n)).first;
  return *it->second;
}

}  // namespace

void forward(std::span<const double> in, std::vector<std::complex<double>>& out) {
  require(!in.empty(), ErrorCode::kLength, "fft of empty signal");
  plan_for(in.size()).forward(in, out);
}

void inverse(std::span<const std::complex<double>> in, std::size_t n, std::vector<double>& out) {
  require(n > 0 && in.size() == n / 2 + 1, ErrorCode::kLength, "inverse fft bin count mismatch");
  plan_for(n).inverse(in, out);
}

}  // namespace brainage::fft
