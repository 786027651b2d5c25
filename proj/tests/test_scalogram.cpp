#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lrdscal/gaussian_synth.hpp"
#include "lrdscal/hermite.hpp"
#include "lrdscal/rng.hpp"
#include "lrdscal/scalogram.hpp"
#include "lrdscal/spectral_model.hpp"
#include "lrdscal/wavelet_bank.hpp"

using namespace lrdscal;

namespace {

SpectralModel model_at(double d) { return SpectralModel(d, FstarSpec{FstarKind::constant, {1.0}}, 0); }

std::vector<double> gaussian_noise(std::size_t n, std::uint64_t seed) {
  RandomStream rs(seed, 0);
  std::vector<double> z(n);
  for (double& v : z) v = rs.normal();
  return z;
}

}  // namespace

TEST(Scalogram, ZeroAndConstantInputs) {
  const auto b = WaveletFilterBank::build_haar(5);
  const std::vector<double> zero(256, 0.0), flat(256, 3.7);
  for (const auto* z : {&zero, &flat}) {
    const auto s = scalogram(wavelet_coeffs(*z, b, {1, 3, 5}));
    for (const auto& e : s) EXPECT_NEAR(e.S[0], 0.0, 1e-24);
  }
}

TEST(Scalogram, HandExample) {
  const auto b = WaveletFilterBank::build_haar(2);
  const std::vector<double> z{1, 2, 3, 4, 5, 6, 7, 8};
  const auto c = wavelet_coeffs(z, b, {1});
  ASSERT_EQ(c.at(1).n, 4);
  for (double w : c.at(1).W[0]) EXPECT_NEAR(w, 1.0 / std::sqrt(2.0), 1e-15);
  const auto s = scalogram(c);
  EXPECT_NEAR(s[0].S[0], 0.5, 1e-15);
  EXPECT_EQ(s[0].centering, "none");
}

// Delaying the record by gamma_j samples delays the coefficients by one.
TEST(Scalogram, ShiftByGamma) {
  const auto b = WaveletFilterBank::from_name("db2", 4);
  const auto z = gaussian_noise(1024, 3);
  for (int j : {1, 2, 4}) {
    const std::size_t g = std::size_t{1} << j;
    std::vector<double> shifted(g, 0.0);
    shifted.insert(shifted.end(), z.begin(), z.end() - static_cast<std::ptrdiff_t>(g));
    const auto a = wavelet_coeffs(z, b, {j}).at(j).W[0];
    const auto c = wavelet_coeffs(shifted, b, {j}).at(j).W[0];
    for (std::size_t k = 2; k < a.size(); ++k) EXPECT_NEAR(c[k], a[k - 1], 1e-12) << j;
  }
}

TEST(Scalogram, FftMatchesDirect) {
  const auto b = WaveletFilterBank::from_name("db2", 8);
  const auto z = gaussian_noise(1 << 14, 11);
  const auto d = wavelet_coeffs(z, b, {1, 4, 8}, ConvolutionMode::direct);
  const auto f = wavelet_coeffs(z, b, {1, 4, 8}, ConvolutionMode::fft);
  for (int j : {1, 4, 8})
    for (std::size_t k = 0; k < d.at(j).W[0].size(); ++k) EXPECT_NEAR(d.at(j).W[0][k], f.at(j).W[0][k], 1e-9);
}

TEST(Scalogram, TooShortRecord) {
  const auto b = WaveletFilterBank::build_haar(8);
  const std::vector<double> z(200, 1.0);
  try {
    wavelet_coeffs(z, b, {8});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::insufficient_data);
  }
}

TEST(ExpectedEnergy, WhiteNoiseParseval) {
  const auto m = model_at(1e-12);
  const auto b = WaveletFilterBank::from_name("db2", 6);
  for (int j : {1, 3, 6}) {
    EXPECT_NEAR(expected_energy(m, parse_coeffs("1:1"), b, j)[0], 1.0, 1e-8);
    EXPECT_NEAR(expected_energy(m, parse_coeffs("2:2"), b, j)[0], 2.0, 1e-8);
    EXPECT_NEAR(expected_energy(m, parse_coeffs("1:3,3:6"), b, j)[0], 15.0, 1e-7);
  }
}

TEST(ExpectedEnergy, KMismatch) {
  const auto m = model_at(0.3);
  const auto b = WaveletFilterBank::from_name("db2", 4, 1);
  EXPECT_THROW(expected_energy(m, parse_coeffs("1:1"), b, 2), Error);
}

// gamma_j^{-2 delta(q)} E[W_j^2] settles as j grows, delta(q) = q d - (q-1)/2.
TEST(ExpectedEnergy, ScaleStabilization) {
  const double d = 0.4;
  const auto m = model_at(d);
  const auto b = WaveletFilterBank::build_haar(10);
  for (int q : {1, 2}) {
    const auto e = from_coefficients({{q, 1.0}});
    const double delta = q * d - 0.5 * (q - 1);
    const double ref = expected_energy(m, e, b, 10)[0] / std::pow(b.gamma(10), 2.0 * delta);
    for (int j = 6; j < 10; ++j) {
      const double r = expected_energy(m, e, b, j)[0] / std::pow(b.gamma(j), 2.0 * delta);
      EXPECT_NEAR(r / ref, 1.0, 0.1) << q << "," << j;
    }
  }
}

TEST(ExpectedEnergy, MatchesMonteCarloSecondChaos) {
  const auto m = model_at(0.3);
  const auto b = WaveletFilterBank::build_haar(3);
  const auto e = parse_coeffs("2:2");
  const CirculantSynthesizer syn(m, 1 << 12);
  const int reps = 200;
  double s = 0.0, s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto x = syn.draw(5150, r).samples;
    const auto y = apply_expansion(e, x);
    const double v = scalogram(wavelet_coeffs(y, b, {3}))[0].S[0];
    s += v;
    s2 += v * v;
  }
  const double mean = s / reps;
  const double se = std::sqrt((s2 / reps - mean * mean) / (reps - 1));
  EXPECT_NEAR(mean, expected_energy(m, e, b, 3)[0], 4.0 * se);
}

TEST(ExpectedEnergy, CenteredMeanNearZero) {
  const auto m = model_at(0.4);
  const auto b = WaveletFilterBank::build_haar(5);
  const auto e = parse_coeffs("2:2");
  const CirculantSynthesizer syn(m, 1 << 14);
  const int reps = 500;
  double s = 0.0, s2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto y = apply_expansion(e, syn.draw(808, r).samples);
    const auto c = centered_scalogram(wavelet_coeffs(y, b, {5}), m, e, b);
    EXPECT_EQ(c[0].centering, "analytic");
    s += c[0].Sbar[0];
    s2 += c[0].Sbar[0] * c[0].Sbar[0];
  }
  const double mean = s / reps;
  const double se = std::sqrt((s2 / reps - mean * mean) / (reps - 1));
  EXPECT_NEAR(mean, 0.0, 4.0 * se);
}

TEST(Chaos, ComponentsAreLinear) {
  const auto m = model_at(0.3);
  const auto b = WaveletFilterBank::build_haar(6);
  const auto e = parse_coeffs("1:1,2:0.5,4:2");
  const auto x = synthesize(m, 4096, 9).samples;
  const auto comp = chaos_components(x, e, b, {2, 6});
  const auto whole = wavelet_coeffs(apply_expansion(e, x), b, {2, 6});
  for (int j : {2, 6}) {
    const auto& w = whole.at(j).W[0];
    for (std::size_t k = 0; k < w.size(); ++k) {
      double s = 0.0;
      for (const auto& t : e.entries) s += t.c / factorial(t.q) * comp.at(t.q).at(j).W[0][k];
      EXPECT_NEAR(w[k], s, 1e-10);
    }
  }
}

TEST(Chaos, DistinctDegreesUncorrelated) {
  const auto m = model_at(0.3);
  const auto b = WaveletFilterBank::build_haar(4);
  const auto e = parse_coeffs("1:1,2:1,3:1");
  const CirculantSynthesizer syn(m, 1 << 12);
  const int reps = 200;
  for (auto [p, q] : {std::pair{1, 2}, std::pair{1, 3}, std::pair{2, 3}}) {
    double s = 0.0, s2 = 0.0;
    for (int r = 0; r < reps; ++r) {
      const auto comp = chaos_components(syn.draw(31, r).samples, e, b, {4});
      const double v = mean_product(comp.at(p).at(4).W[0], comp.at(q).at(4).W[0]);
      s += v;
      s2 += v * v;
    }
    const double mean = s / reps;
    const double se = std::sqrt((s2 / reps - mean * mean) / (reps - 1));
    EXPECT_NEAR(mean, 0.0, 4.0 * se) << p << "," << q;
  }
}

TEST(Chaos, GroupsReconstructCenteredScalogram) {
  const auto m = model_at(0.42);
  const auto b = WaveletFilterBank::build_haar(6);
  for (const char* spec : {"1:1,2:1,4:1", "2:1,3:1,4:1", "1:3,3:6", "2:2", "1:1,3:0.5,6:0.1"}) {
    const auto e = parse_coeffs(spec);
    const auto x = synthesize(m, 8192, 21).samples;
    const auto comp = chaos_components(x, e, b, {3, 6});
    const auto cs = centered_scalogram(wavelet_coeffs(apply_expansion(e, x), b, {3, 6}), m, e, b);
    for (const auto& c : cs) {
      const auto dec = sigma_decomposition(comp, e, m, b, c.j);
      EXPECT_NEAR(dec.total(), c.Sbar[0], 1e-10 * std::max(1.0, c.S[0])) << spec << " j=" << c.j;
    }
  }
}

TEST(Chaos, MembershipOneTwoFour) {
  const auto mem = group_membership(structure(parse_coeffs("1:1,2:1,4:1")));
  auto group = [&](int q, int q2) {
    for (const auto& m : mem)
      if (m.q == q && m.q2 == q2) return m.group;
    ADD_FAILURE() << q << "," << q2;
    return ChaosGroup::sigma0;
  };
  EXPECT_EQ(mem.size(), 6u);
  EXPECT_EQ(group(1, 1), ChaosGroup::diag11);
  EXPECT_EQ(group(1, 2), ChaosGroup::sigma3);
  EXPECT_EQ(group(1, 4), ChaosGroup::sigma2);
  EXPECT_EQ(group(2, 2), ChaosGroup::sigma0);
  EXPECT_EQ(group(2, 4), ChaosGroup::sigma1);
  EXPECT_EQ(group(4, 4), ChaosGroup::sigma0);
}

TEST(Chaos, MembershipTwoThreeFour) {
  const auto mem = group_membership(structure(parse_coeffs("2:1,3:1,4:1")));
  for (const auto& m : mem) {
    if (m.q == m.q2) EXPECT_EQ(m.group, ChaosGroup::sigma0);
    else if (m.q2 == m.q + 1) EXPECT_EQ(m.group, ChaosGroup::sigma3);
    else EXPECT_EQ(m.group, ChaosGroup::sigma1);
  }
  EXPECT_STREQ(to_string(ChaosGroup::sigma2), "Sigma2");
}

TEST(MultiFilter, IdenticalFiltersAgree) {
  const auto m = model_at(0.3);
  const auto b = WaveletFilterBank::build_haar(5, 0, 2);
  const auto e = parse_coeffs("2:2");
  const auto x = apply_expansion(e, synthesize(m, 4096, 2).samples);
  const auto s = centered_scalogram(wavelet_coeffs(x, b, {2, 5}), m, e, b);
  for (const auto& c : s) {
    ASSERT_EQ(c.S.size(), 2u);
    EXPECT_EQ(c.S[0], c.S[1]);
    EXPECT_EQ(c.E_W2[0], c.E_W2[1]);
  }
}
