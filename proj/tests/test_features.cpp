#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <fstream>
#include <numeric>
#include <set>

#include "brainage/bundle.hpp"
#include "brainage/dataset.hpp"
#include "brainage/error.hpp"
#include "brainage/features.hpp"
#include "brainage/signal.hpp"
#include "oracles.hpp"

using namespace brainage;
using namespace brainage::features;

namespace {

std::vector<double> square_wave(double freq, double rate, std::size_t n) {
  std::vector<double> x(n);
  const auto half = static_cast<std::size_t>(std::lround(rate / freq / 2.0));
  for (std::size_t i = 0; i < n; ++i) x[i] = (i / half) % 2 == 0 ? 1.0 : -1.0;
  return x;
}

std::vector<double> scaled(const std::vector<double>& x, double a) {
  std::vector<double> y(x);
  for (auto& v : y) v *= a;
  return y;
}

// Independent moment oracle on sorted input.
double oracle_quantile(std::vector<double> x, double q) {
  std::sort(x.begin(), x.end());
  const double h = (x.size() - 1) * q;
  const double lo = x[static_cast<std::size_t>(std::floor(h))];
  const double hi = x[static_cast<std::size_t>(std::ceil(h))];
  return lo + (h - std::floor(h)) * (hi - lo);
}

// Direct O(n^2) sample entropy, used to check the sorted-window version.
double oracle_sampen(const std::vector<double>& x, int m, double r) {
  const std::size_t n = x.size() - m;
  double a = 0, b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = 0;
      for (int k = 0; k < m; ++k) d = std::max(d, std::abs(x[i + k] - x[j + k]));
      if (d <= r) {
        b += 1;
        if (std::abs(x[i + m] - x[j + m]) <= r) a += 1;
      }
    }
  }
  return -std::log(a / b);
}

double oracle_apen(const std::vector<double>& x, int m, double r) {
  auto phi = [&](int d) {
    const std::size_t n = x.size() - d + 1;
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double c = 0;
      for (std::size_t j = 0; j < n; ++j) {
        double dist = 0;
        for (int k = 0; k < d; ++k) dist = std::max(dist, std::abs(x[i + k] - x[j + k]));
        if (dist <= r) c += 1;
      }
      s += std::log(c / n);
    }
    return s / n;
  };
  return phi(m) - phi(m + 1);
}

Recording single_channel(const std::vector<double>& x, double rate, State state) {
  Recording rec;
  rec.subject_id = "s";
  rec.age_years = 9.0;
  rec.state = state;
  rec.sampling_rate_hz = rate;
  rec.channel_names = {"A"};
  rec.data.resize(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) rec.data(0, static_cast<Eigen::Index>(i)) = x[i];
  return rec;
}

}  // namespace

TEST_CASE("catalogue has 19 measures and 25 columns per band") {
  CHECK(catalogue().size() == 19);
  CHECK(band_columns().size() == 25);
  std::set<std::string> names;
  for (const auto& c : band_columns()) names.insert(c.column_name());
  CHECK(names.size() == 25);
  CHECK(band_spec(Band::kAlpha).lo_hz == 7.0);
  CHECK(band_spec(Band::kOmega).hi_hz == 30.0);
}

TEST_CASE("temporal features of a 5 Hz sine") {
  auto x = oracle::sine(5.0, 250.0, 250);
  auto t = temporal_features(x);
  CHECK(t.v[4] == 10.0);
  CHECK(std::abs(t.v[0]) < 1e-12);
  CHECK(t.v[7] == doctest::Approx(1.0).epsilon(0.01));
  CHECK_FALSE(t.degenerate);
}

TEST_CASE("temporal features of a constant signal") {
  std::vector<double> x{1, 1, 1, 1};
  auto t = temporal_features(x);
  CHECK(t.v[0] == 1.0);
  CHECK(t.v[1] == 0.0);
  CHECK(t.v[2] == 0.0);
  CHECK(t.v[3] == 0.0);
  CHECK(t.v[4] == 0.0);
  CHECK(t.v[5] == 0.0);
  CHECK(t.v[6] == 0.0);
  CHECK(t.v[7] == 0.0);
  CHECK(t.degenerate);
}

TEST_CASE("moments of Gaussian noise") {
  auto x = oracle::white_noise(100000, 17);
  auto t = temporal_features(x);
  CHECK(std::abs(t.v[5]) <= 0.05);
  CHECK(std::abs(t.v[6] - 3.0) <= 0.1);
}

TEST_CASE("line length and zero crossings by hand") {
  std::vector<double> x{1, -1, 2, 0, 0, -3, 1};
  auto t = temporal_features(x);
  CHECK(t.v[3] == 2 + 3 + 2 + 0 + 3 + 4);
  // 1->-1, -1->2, enter zero, -3->1
  CHECK(t.v[4] == 4.0);
  CHECK(t.v[2] == 5.0);
}

TEST_CASE("PSD regression slopes") {
  SUBCASE("brownian noise has slope near -2") {
    auto x = oracle::brownian(250 * 60, 3);
    auto r = psd_regression(x, 250.0, 2.0, 30.0);
    CHECK(r.v[1] == doctest::Approx(-2.0).epsilon(0.15));
    CHECK(std::abs(r.v[1] + 2.0) <= 0.3);
  }
  SUBCASE("white noise is flat") {
    auto x = oracle::white_noise(250 * 60, 4);
    auto r = psd_regression(x, 250.0, 0.5, 30.0);
    CHECK(std::abs(r.v[1]) <= 0.2);
    CHECK(r.v[3] < 0.2);
  }
  SUBCASE("exact power law fits a line") {
    // Sum of sines with amplitudes following f^-1 on the regression grid.
    const std::size_t n = 250 * 40;
    std::vector<double> x(n, 0.0);
    std::mt19937 gen(1);
    std::uniform_real_distribution<double> ph(0, 6.28);
    for (int k = 2; k <= 120; ++k) {
      const double f = k * 250.0 / 1024.0 * 1.0;
      auto s = oracle::sine(f, 250.0, n, 1.0 / f, ph(gen));
      for (std::size_t i = 0; i < n; ++i) x[i] += s[i];
    }
    auto r = psd_regression(x, 250.0, 1.0, 28.0);
    CHECK(r.v[3] >= 0.99);
  }
  SUBCASE("zero signal has no logarithm") {
    std::vector<double> x(1000, 0.0);
    try {
      psd_regression(x, 250.0, 0.5, 30.0);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUndefinedLog);
    }
  }
}

TEST_CASE("band powers") {
  SUBCASE("unit 10 Hz sine concentrates in alpha") {
    auto p = band_powers(oracle::sine(10.0, 250.0, 1000), 250.0);
    CHECK(p[2] >= 50 * p[0]);
    CHECK(p[2] >= 50 * p[1]);
    CHECK(p[2] >= 50 * p[3]);
    for (int b = 0; b < 4; ++b) CHECK(p[4] >= p[b]);
    CHECK(p[2] == doctest::Approx(0.5).epsilon(0.05));
  }
  SUBCASE("white noise power follows bandwidth") {
    auto x = oracle::white_noise(250 * 120, 8);
    auto p = band_powers(x, 250.0);
    // Reference density from the oracle DFT, rescaled to the integral over 0-125 Hz.
    const double density = p[4] / 29.5;
    for (int b = 0; b < 4; ++b) {
      const double width = kBands[b].hi_hz - kBands[b].lo_hz;
      CHECK(p[b] == doctest::Approx(density * width).epsilon(0.2));
    }
  }
  SUBCASE("zero signal") {
    auto p = band_powers(std::vector<double>(1000, 0.0), 250.0);
    for (double v : p) CHECK(v == 0.0);
  }
}

TEST_CASE("wavelet energies") {
  SUBCASE("zero signal") {
    auto e = wavelet_energies(std::vector<double>(500, 0.0), 250.0);
    for (double v : e) CHECK(v == 0.0);
  }
  SUBCASE("Parseval on random lengths") {
    for (std::size_t n : {8u, 100u, 500u, 1000u, 1023u, 4096u}) {
      auto x = oracle::white_noise(n, static_cast<unsigned>(n));
      auto levels = wavelet_level_energies(x);
      double sum = 0, ref = 0;
      for (double v : levels) sum += v;
      for (double v : x) ref += v * v;
      CHECK(std::abs(sum - ref) <= 1e-6 * ref);
      CHECK(wavelet_energies(x, 250.0)[4] == doctest::Approx(ref).epsilon(1e-9));
    }
  }
  SUBCASE("10 Hz sine lands in the alpha level") {
    auto e = wavelet_energies(oracle::sine(10.0, 250.0, 1000), 250.0);
    CHECK(e[2] > e[0]);
    CHECK(e[2] > e[1]);
    CHECK(e[2] > e[3]);
  }
  SUBCASE("too short") { CHECK_THROWS_AS(wavelet_energies(std::vector<double>(5, 1.0), 250.0), Error); }
}

TEST_CASE("entropy measures") {
  SUBCASE("white noise spectral entropy is high") {
    CHECK(spectral_entropy(oracle::white_noise(5000, 12), 250.0) >= 0.95);
  }
  SUBCASE("sine spectral entropy is low") {
    CHECK(spectral_entropy(oracle::sine(10.0, 250.0, 5000), 250.0) <= 0.3);
  }
  SUBCASE("square wave is regular") {
    CHECK(sample_entropy(square_wave(5.0, 250.0, 1000)) <= 0.2);
  }
  SUBCASE("sorted-window counting matches brute force") {
    for (unsigned seed : {1u, 2u, 3u}) {
      auto x = oracle::white_noise(400, seed);
      const double r = 0.2 * std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0) / x.size() -
                                       std::pow(oracle::mean(x), 2));
      CHECK(sample_entropy(x) == doctest::Approx(oracle_sampen(x, 2, r)).epsilon(1e-12));
      CHECK(approximate_entropy(x) == doctest::Approx(oracle_apen(x, 2, r)).epsilon(1e-12));
    }
  }
  SUBCASE("constant signal is degenerate") {
    auto e = entropy_features(std::vector<double>(200, 3.0), 250.0);
    CHECK(e.degenerate);
    CHECK(e.v[0] == 0.0);
    CHECK(e.v[2] == 0.0);
  }
}

TEST_CASE("complexity measures") {
  SUBCASE("white noise") {
    auto x = oracle::white_noise(10000, 21);
    CHECK(std::abs(higuchi_fd(x) - 2.0) <= 0.1);
    CHECK(std::abs(hurst_exponent(x) - 0.5) <= 0.1);
  }
  SUBCASE("sine") {
    CHECK(std::abs(higuchi_fd(oracle::sine(5.0, 250.0, 2500)) - 1.0) <= 0.05);
    CHECK(spectral_hjorth_complexity(oracle::sine(10.0, 250.0, 2500), 250.0) < 1.2);
  }
  SUBCASE("brownian noise is persistent") {
    const double h = hurst_exponent(oracle::brownian(10000, 5));
    CHECK(h > 0.8);
    CHECK(h < 1.1);
  }
  SUBCASE("fisher information is higher for a sine than noise") {
    CHECK(svd_fisher_info(oracle::sine(5.0, 250.0, 1000)) > svd_fisher_info(oracle::white_noise(1000, 2)));
  }
  SUBCASE("constant signal is degenerate") {
    auto c = complexity_features(std::vector<double>(300, 1.0), 250.0);
    CHECK(c.degenerate);
  }
}

TEST_CASE("quantiles") {
  std::vector<double> grid(101);
  std::iota(grid.begin(), grid.end(), 0.0);
  auto q = quantiles(grid);
  CHECK(q[0] == doctest::Approx(5));
  CHECK(q[1] == doctest::Approx(25));
  CHECK(q[2] == doctest::Approx(75));
  CHECK(q[3] == doctest::Approx(95));

  auto c = quantiles(std::vector<double>(10, 2.5));
  for (double v : c) CHECK(v == 2.5);

  auto x = oracle::white_noise(100000, 31);
  auto g = quantiles(x);
  const std::array<double, 4> z{-1.6449, -0.6745, 0.6745, 1.6449};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(g[i] - z[i]) <= 0.02);
  CHECK(g[0] == doctest::Approx(oracle_quantile(x, 0.05)).epsilon(1e-12));
  CHECK(std::is_sorted(g.begin(), g.end()));
}

TEST_CASE("scale covariance of each measure") {
  auto x = oracle::white_noise(1000, 77);
  auto s = oracle::sine(9.0, 250.0, 1000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.3 * x[i] + s[i];
  for (double a : {0.01, 3.0, 250.0}) {
    auto y = scaled(x, a);
    auto tx = temporal_features(x), ty = temporal_features(y);
    CHECK(ty.v[0] == doctest::Approx(a * tx.v[0]).epsilon(1e-9));
    CHECK(ty.v[1] == doctest::Approx(a * tx.v[1]).epsilon(1e-9));
    CHECK(ty.v[2] == doctest::Approx(a * tx.v[2]).epsilon(1e-9));
    CHECK(ty.v[3] == doctest::Approx(a * tx.v[3]).epsilon(1e-9));
    CHECK(ty.v[4] == tx.v[4]);
    CHECK(ty.v[5] == doctest::Approx(tx.v[5]).epsilon(1e-9));
    CHECK(ty.v[6] == doctest::Approx(tx.v[6]).epsilon(1e-9));
    CHECK(ty.v[7] == doctest::Approx(tx.v[7]).epsilon(1e-9));
    CHECK(higuchi_fd(y) == doctest::Approx(higuchi_fd(x)).epsilon(1e-9));
    CHECK(spectral_entropy(y, 250.0) == doctest::Approx(spectral_entropy(x, 250.0)).epsilon(1e-9));
    CHECK(hurst_exponent(y) == doctest::Approx(hurst_exponent(x)).epsilon(1e-9));
    CHECK(spectral_hjorth_complexity(y, 250.0) == doctest::Approx(spectral_hjorth_complexity(x, 250.0)).epsilon(1e-9));
    CHECK(svd_fisher_info(y) == doctest::Approx(svd_fisher_info(x)).epsilon(1e-8));
    CHECK(sample_entropy(y) == doctest::Approx(sample_entropy(x)).epsilon(1e-9));
    auto rx = psd_regression(x, 250.0, 0.5, 30.0), ry = psd_regression(y, 250.0, 0.5, 30.0);
    CHECK(ry.v[3] == doctest::Approx(rx.v[3]).epsilon(1e-9));
    CHECK(ry.v[1] == doctest::Approx(rx.v[1]).epsilon(1e-9));
    CHECK(ry.v[0] == doctest::Approx(rx.v[0] + 2.0 * std::log10(a)).epsilon(1e-9));
    auto px = band_powers(x, 250.0), py = band_powers(y, 250.0);
    CHECK(py[2] == doctest::Approx(a * a * px[2]).epsilon(1e-9));
    auto qx = quantiles(x), qy = quantiles(y);
    CHECK(qy[3] == doctest::Approx(a * qx[3]).epsilon(1e-9));
  }
}

TEST_CASE("extract_recording averages epochs") {
  SUBCASE("identical epochs give the single-epoch vector") {
    // A periodic signal whose period divides the epoch: every epoch of the
    // filtered signal is nearly identical away from the edges, so compare
    // against a per-epoch computation instead.
    auto x = oracle::sine(10.0, 250.0, 250 * 40);
    auto noise = oracle::white_noise(x.size(), 4, 0.3);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += noise[i];
    auto rec = single_channel(x, 250.0, State::kEyesClosed);
    auto f = extract_recording(rec);
    CHECK(f.n_epochs == 10);
    CHECK(f.values.cols() == 125);
    CHECK(f.values.allFinite());

    auto alpha = signal::bandpass_zero_phase(x, 250.0, 7.0, 14.0);
    auto omega = signal::bandpass_zero_phase(x, 250.0, 0.5, 30.0);
    std::vector<double> mean(25, 0.0);
    for (int e = 0; e < 10; ++e) {
      std::span<const double> a(alpha.data() + e * 1000, 1000), o(omega.data() + e * 1000, 1000);
      auto v = epoch_band_features(a, o, 250.0, Band::kAlpha, {});
      for (int j = 0; j < 25; ++j) mean[j] += v[j] / 10.0;
    }
    for (int j = 0; j < 25; ++j) CHECK(f.values(0, 50 + j) == doctest::Approx(mean[j]).epsilon(1e-12));
  }
  SUBCASE("EO uses 2 s epochs") {
    auto rec = single_channel(oracle::white_noise(250 * 20, 6), 250.0, State::kEyesOpen);
    auto f = extract_recording(rec);
    CHECK(f.n_epochs == 10);
    CHECK(f.values.allFinite());
  }
}

TEST_CASE("mean of repeated epochs equals one epoch") {
  // Averaging is an arithmetic mean over epochs in index order, so
  // averaging ten copies of a vector reproduces it.
  auto x = oracle::white_noise(1000, 9);
  auto one = epoch_band_features(x, x, 250.0, Band::kOmega, {});
  std::vector<double> sum(one.size(), 0.0);
  for (int e = 0; e < 10; ++e)
    for (std::size_t j = 0; j < one.size(); ++j) sum[j] += one[j];
  for (std::size_t j = 0; j < one.size(); ++j) CHECK(sum[j] / 10.0 == doctest::Approx(one[j]).epsilon(1e-14));
}

namespace {

std::vector<Recording> tiny_corpus(int n_subjects, int n_channels, bool drop_last_eo) {
  std::vector<Recording> out;
  for (int s = 0; s < n_subjects; ++s) {
    for (State st : {State::kEyesOpen, State::kEyesClosed}) {
      if (drop_last_eo && s == n_subjects - 1 && st == State::kEyesOpen) continue;
      Recording rec;
      rec.subject_id = "sub" + std::to_string(s);
      rec.age_years = 6.0 + s;
      rec.state = st;
      rec.sampling_rate_hz = 250.0;
      const std::size_t n = st == State::kEyesOpen ? 250 * 8 : 250 * 16;
      rec.data.resize(n_channels, static_cast<Eigen::Index>(n));
      for (int c = 0; c < n_channels; ++c) {
        rec.channel_names.push_back("E" + std::to_string(c + 1));
        auto w = oracle::white_noise(n, 1000 * s + 10 * c + static_cast<int>(st));
        for (std::size_t i = 0; i < n; ++i) rec.data(c, static_cast<Eigen::Index>(i)) = w[i];
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("build_training_set layouts") {
  auto montage = make_cap_montage(24);
  auto regions = make_sector_regions(montage);
  auto corpus = tiny_corpus(3, 24, true);

  auto ec = build_training_set(corpus, Variant::parse("12-EC"), regions);
  CHECK(ec.n_subjects() == 3);
  CHECK(ec.n_features() == 12 * 125);
  for (const auto& d : ec.descriptors) CHECK(d.state == State::kEyesClosed);

  auto eo = build_training_set(corpus, Variant::parse("12-EO"), regions);
  auto all = build_training_set(corpus, Variant::parse("12-All"), regions);
  CHECK(all.n_subjects() == 2);  // sub2 has no EO recording
  CHECK(all.n_features() == ec.n_features() + eo.n_features());
  std::set<std::string> union_cols, all_cols;
  for (auto& c : ec.column_names()) union_cols.insert(c);
  for (auto& c : eo.column_names()) union_cols.insert(c);
  for (auto& c : all.column_names()) all_cols.insert(c);
  CHECK(union_cols == all_cols);
  CHECK(all.descriptors.front().state == State::kEyesOpen);

  // Full-montage variant scales with channel count.
  auto full = build_training_set(corpus, Variant::parse("128-EC"), regions);
  CHECK(full.n_features() * 12 == ec.n_features() * 24);

  // Values of the 12-All EC block equal those of 12-EC for shared subjects.
  const auto col = std::find(all.column_names().begin(), all.column_names().end(), ec.descriptors[7].column_name());
  (void)col;
  auto all_names = all.column_names();
  const auto j_all = static_cast<Eigen::Index>(std::find(all_names.begin(), all_names.end(), ec.descriptors[7].column_name()) - all_names.begin());
  CHECK(all.rows(0, j_all) == ec.rows(0, 7));
  all.validate();
}

TEST_CASE("feature csv round trip is byte-identical") {
  auto montage = make_cap_montage(24);
  auto regions = make_sector_regions(montage);
  auto corpus = tiny_corpus(2, 24, false);
  auto fm = build_training_set(corpus, Variant::parse("12-EC"), regions);
  auto dir = std::filesystem::temp_directory_path() / "brainage_feature_csv";
  std::filesystem::create_directories(dir);
  write_feature_csv(dir / "a.csv", fm);
  auto back = read_feature_csv(dir / "a.csv");
  CHECK(back.rows == fm.rows);
  CHECK(back.descriptors == fm.descriptors);
  write_feature_csv(dir / "b.csv", back);
  auto fm2 = build_training_set(corpus, Variant::parse("12-EC"), regions);
  write_feature_csv(dir / "c.csv", fm2);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv") == slurp(dir / "c.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("descriptor names parse back") {
  FeatureDescriptor d{State::kEyesOpen, "LPrefrontal", Band::kTheta, "spect_slope", "r2"};
  CHECK(d.column_name() == "EO_LPrefrontal_theta_spect_slope_r2");
  CHECK(FeatureDescriptor::parse(d.column_name()) == d);
  CHECK_THROWS_AS(FeatureDescriptor::parse("EO_X_gamma_mean"), Error);
  CHECK_THROWS_AS(FeatureDescriptor::parse("EO_X_alpha_nothing"), Error);
  CHECK(Variant::parse("128-EO").name() == "128-EO");
  CHECK_THROWS_AS(Variant::parse("64-EO"), Error);
}

TEST_CASE("standardizer") {
  Eigen::MatrixXd train(3, 2);
  train << 1, 5, 2, 5, 3, 5;
  auto s = Standardizer::fit(train);
  auto z = s.apply(train);
  CHECK(z(0, 0) == doctest::Approx(-1.2247449).epsilon(1e-7));
  CHECK(z(1, 0) == doctest::Approx(0.0));
  CHECK(z(2, 0) == doctest::Approx(1.2247449).epsilon(1e-7));
  CHECK(s.constant[1]);
  CHECK(z(0, 1) == 5.0);
  Eigen::MatrixXd test(1, 2);
  test << 4, 7;
  auto zt = s.apply(test);
  CHECK(zt(0, 0) == doctest::Approx(2.0 / std::sqrt(2.0 / 3.0)));
  CHECK(zt(0, 1) == 7.0);
}
