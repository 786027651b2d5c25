#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "lrdscal/harness.hpp"

using namespace lrdscal;
namespace fs = std::filesystem;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return static_cast<ErrorKind>(-1);
}

ExperimentConfig small_config(const std::string& coeffs = "2:2") {
  ExperimentConfig c;
  c.model = SpectralModel(0.4, FstarSpec{}).to_json();
  c.expansion = {{"coeffs", coeffs}};
  c.bank = WaveletFilterBank::build_haar(6).to_json();
  c.scales = {2, 3, 4};
  c.sizes = {1024, 2048, 4096};
  c.replicas = 40;
  c.seed = 5;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("lrdscal_harness_" + name);
  fs::remove_all(p);
  return p;
}

void rewrite_first_line(const fs::path& file, const std::string& first) {
  std::ifstream in(file);
  std::string line, rest;
  std::getline(in, line);
  for (std::string l; std::getline(in, l);) rest += l + "\n";
  in.close();
  std::ofstream out(file);
  out << first << "\n" << rest;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  auto c = small_config();
  c.sigma = true;
  c.reference = ReferenceOptions{300, 8192};
  const auto back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.reference->internal_n, 8192u);
}

TEST(Config, Rejections) {
  auto j = small_config().to_json();
  j["version"] = 99;
  EXPECT_EQ(kind_of([&] { ExperimentConfig::from_json(j); }), ErrorKind::schema);
  j = small_config().to_json();
  j["colour"] = "blue";
  EXPECT_EQ(kind_of([&] { ExperimentConfig::from_json(j); }), ErrorKind::invalid_config);
  j = small_config().to_json();
  j.erase("sizes");
  EXPECT_EQ(kind_of([&] { ExperimentConfig::from_json(j); }), ErrorKind::invalid_config);
  j = small_config().to_json();
  j["timestamp"] = "2024-01-01T00:00:00Z";
  EXPECT_NO_THROW(ExperimentConfig::from_json(j));
  EXPECT_EQ(kind_of([] { ExperimentConfig::load("/nonexistent/config.json"); }), ErrorKind::invalid_config);
}

TEST(Config, ExpansionForms) {
  EXPECT_EQ(expansion_from_config({{"coeffs", "1:3,3:6"}}), parse_coeffs("1:3,3:6"));
  EXPECT_EQ(expansion_from_config({{"coeffs", json::array({json::array({2, 2.0})})}}), parse_coeffs("2:2"));
  EXPECT_NEAR(expansion_from_config({{"g", "power:3"}, {"qmax", 6}}).coeff(3), 6.0, 1e-10);
  EXPECT_EQ(kind_of([] { expansion_from_config({{"g", "sign"}, {"qmax", 9}}); }), ErrorKind::assumption_violated);
  EXPECT_EQ(kind_of([] { expansion_from_config(json::object()); }), ErrorKind::invalid_config);
}

TEST(Run, RejectsBadConfigs) {
  auto c = small_config();
  c.replicas = 0;
  EXPECT_EQ(kind_of([&] { run_experiment(c); }), ErrorKind::invalid_config);
  c = small_config();
  c.scales = {7};
  EXPECT_EQ(kind_of([&] { run_experiment(c); }), ErrorKind::invalid_config);
  c = small_config();
  c.sizes = {32};
  c.scales = {6};
  EXPECT_EQ(kind_of([&] { run_experiment(c); }), ErrorKind::insufficient_data);
}

TEST(Run, UnsupportedUnlessExploratory) {
  auto c = small_config("1:1,2:1");
  EXPECT_EQ(kind_of([&] { run_experiment(c); }), ErrorKind::unsupported_regime);
  c.exploratory = true;
  const auto r = run_experiment(c);
  EXPECT_EQ(r.report["exploratory"], true);
  EXPECT_FALSE(r.n_exponent);
  EXPECT_EQ(r.cells.size(), 9u);
}

TEST(Run, ShapesAndPredictions) {
  const auto r = run_experiment(small_config());
  EXPECT_EQ(r.cells.size(), 9u);
  EXPECT_DOUBLE_EQ(*r.n_exponent, 0.2);
  EXPECT_DOUBLE_EQ(*r.gamma_exponent, -0.6);
  const auto& c = r.cell(3, 2048);
  EXPECT_EQ(c.gamma, 8);
  EXPECT_EQ(c.n, coefficient_count(2048, 1, 3));
  EXPECT_EQ(c.sbar.size(), 40u);
  const double scale = std::pow(c.n, 0.2) * std::pow(8.0, -0.6);
  for (std::size_t i = 0; i < c.sbar.size(); ++i) EXPECT_DOUBLE_EQ(c.normalized[i], scale * c.sbar[i]);
  EXPECT_FALSE(c.diagnostics);
  // Three slopes along n (one per scale), three along gamma (one per size).
  ASSERT_EQ(r.slopes.size(), 6u);
  for (const auto& s : r.slopes) {
    ASSERT_TRUE(s.predicted);
    EXPECT_DOUBLE_EQ(*s.predicted, s.axis == "n" ? -0.2 : 0.8);
  }
  EXPECT_EQ(kind_of([&] { r.cell(5, 2048); }), ErrorKind::domain);
}

TEST(Run, SigmaGroupsSumToSbar) {
  auto c = small_config("1:1,2:1,4:0.5");
  c.model = SpectralModel(0.45, FstarSpec{}).to_json();
  c.exploratory = true;
  c.sigma = true;
  c.replicas = 12;
  const auto r = run_experiment(c);
  for (const auto& cell : r.cells) {
    ASSERT_EQ(cell.groups.size(), 5u);
    for (std::size_t i = 0; i < cell.sbar.size(); ++i) {
      double s = 0.0;
      for (const auto& [name, v] : cell.groups) s += v[i];
      EXPECT_NEAR(s, cell.sbar[i], 1e-9 * (1.0 + std::abs(cell.sbar[i])));
    }
  }
  EXPECT_GE(r.slopes.size(), 9u);
}

TEST(Run, DeterministicAcrossWorkers) {
  auto c = small_config();
  c.sigma = true;
  c.replicas = 24;
  c.workers = 1;
  const auto a = run_experiment(c);
  for (unsigned w : {4u, 8u}) {
    c.workers = w;
    const auto b = run_experiment(c);
    EXPECT_TRUE(a.same_results(b)) << w;
  }
  c.seed = 6;
  EXPECT_FALSE(a.same_results(run_experiment(c)));
}

TEST(Persist, RoundTrip) {
  auto c = small_config();
  c.sigma = true;
  c.replicas = 200;
  c.sizes = {1024, 2048, 4096};
  const auto r = run_experiment(c);
  ASSERT_TRUE(r.cells.front().diagnostics);
  const auto dir = scratch("roundtrip");
  persist(r, dir);
  const auto back = load(dir);
  EXPECT_TRUE(back == r);
  for (const char* f : {"config.json", "result.json", "replicas.csv", "slopes.csv"}) EXPECT_TRUE(fs::exists(dir / f));
  fs::remove_all(dir);
}

TEST(Persist, CorruptionIsSchemaError) {
  const auto r = run_experiment(small_config());
  const auto dir = scratch("corrupt");
  persist(r, dir);
  ASSERT_NO_THROW(load(dir));

  rewrite_first_line(dir / "replicas.csv", "j,N,replica,S,normalized");
  EXPECT_EQ(kind_of([&] { load(dir); }), ErrorKind::schema);
  persist(r, dir);
  rewrite_first_line(dir / "slopes.csv", "series,axis");
  EXPECT_EQ(kind_of([&] { load(dir); }), ErrorKind::schema);

  persist(r, dir);
  fs::remove(dir / "slopes.csv");
  EXPECT_EQ(kind_of([&] { load(dir); }), ErrorKind::schema);

  persist(r, dir);
  {
    auto j = detail::read_json_file(dir / "result.json");
    j["version"] = kHarnessVersion + 1;
    std::ofstream(dir / "result.json") << j.dump();
  }
  EXPECT_EQ(kind_of([&] { load(dir); }), ErrorKind::schema);

  persist(r, dir);
  {
    std::ofstream out(dir / "replicas.csv", std::ios::app);
    out << "2,1024,0,1,1\n";
  }
  EXPECT_EQ(kind_of([&] { load(dir); }), ErrorKind::schema);

  persist(r, dir);
  std::ofstream(dir / "result.json") << "{ not json";
  EXPECT_EQ(kind_of([&] { load(dir); }), ErrorKind::schema);
  fs::remove_all(dir);
}

// Two halves of one sample are consistent with each other; a skewed sample
// is not consistent with a Gaussian one.
TEST(Diagnostics, SplitHalfSelfConsistency) {
  std::mt19937_64 gen(3);
  std::gamma_distribution<double> gam(1.0, 1.0);
  std::normal_distribution<double> nrm;
  std::vector<double> skewed(1200), normal(1200);
  for (auto& v : skewed) v = gam(gen);
  for (auto& v : normal) v = nrm(gen);

  ReferenceSample ref;
  ref.family = "rosenblatt";
  ref.draws.assign(skewed.begin() + 600, skewed.end());
  const auto same = distribution_diagnostics(std::span(skewed).first(600), ref);
  EXPECT_EQ(same.reference, "rosenblatt");
  EXPECT_TRUE(same.consistent);
  EXPECT_TRUE(same.lilliefors.rejected);
  const auto other = distribution_diagnostics(std::span(normal).first(600), ref);
  EXPECT_FALSE(other.consistent);

  const auto g = distribution_diagnostics(normal, std::nullopt);
  EXPECT_EQ(g.reference, "gaussian");
  EXPECT_TRUE(g.consistent);
  EXPECT_EQ(DistributionReport::from_json(g.to_json()), g);
  EXPECT_EQ(kind_of([&] { distribution_diagnostics(std::span(normal).first(100), std::nullopt); }),
            ErrorKind::insufficient_data);
}

TEST(Scaling, RecoversSyntheticSlope) {
  ExperimentResult r;
  r.config = small_config();
  r.config.scales = {1};
  r.config.sizes = {1000, 4000, 16000, 64000};
  r.config.seed = 11;
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nrm;
  for (long long N : r.config.sizes) {
    CellResult c;
    c.j = 1;
    c.N = N;
    c.n = N;
    c.gamma = 2;
    const double sd = std::pow(static_cast<double>(N), -0.3);
    for (int i = 0; i < 400; ++i) c.sbar.push_back(sd * nrm(gen));
    r.cells.push_back(std::move(c));
  }
  const auto s = scaling_regression(r, "n");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(s[0].fit.slope, -0.3, 0.03);
  EXPECT_LT(s[0].fit.ci_low, -0.3);
  EXPECT_GT(s[0].fit.ci_high, -0.3);
  EXPECT_FALSE(s[0].predicted);
  EXPECT_EQ(kind_of([&] { scaling_regression(r, "gamma"); }), ErrorKind::insufficient_data);
  EXPECT_EQ(kind_of([&] { scaling_regression(r, "n", "Sigma1"); }), ErrorKind::domain);
  EXPECT_EQ(kind_of([&] { scaling_regression(r, "time"); }), ErrorKind::invalid_input);
}
