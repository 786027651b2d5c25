#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrdscal/error.hpp"
#include "lrdscal/gaussian_synth.hpp"
#include "lrdscal/hermite.hpp"
#include "lrdscal/limit_reference.hpp"
#include "lrdscal/parallel.hpp"
#include "lrdscal/regime.hpp"
#include "lrdscal/rng.hpp"
#include "lrdscal/scalogram.hpp"
#include "lrdscal/spectral_model.hpp"
#include "lrdscal/stats.hpp"
#include "lrdscal/wavelet_bank.hpp"

namespace lrdscal {

inline constexpr int kHarnessVersion = 1;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ReferenceOptions {
  std::size_t replicas = 2000;
  std::size_t internal_n = std::size_t{1} << 14;
};

struct ExperimentConfig {
  json model;                 // SpectralModel JSON
  json expansion;             // {"coeffs": "2:2"} or {"g": "power:2", "qmax": 12}
  json bank;                  // WaveletFilterBank JSON
  std::vector<int> scales;
  std::vector<long long> sizes;
  std::size_t replicas = 500;
  std::uint64_t seed = 1;
  std::string growth = "n~g^1";
  unsigned workers = 1;
  bool sigma = false;  // record chaos-group values per replica
  std::optional<ReferenceOptions> reference;
  bool exploratory = false;  // allow running outside the classified regimes

  json to_json() const {
    json j{{"version", kHarnessVersion}, {"model", model},  {"expansion", expansion},
           {"bank", bank},              {"scales", scales}, {"sizes", sizes},
           {"replicas", replicas},      {"seed", seed},     {"growth", growth},
           {"workers", workers},        {"exploratory", exploratory}};
    json diag{{"sigma", sigma}};
    if (reference) diag["reference"] = {{"replicas", reference->replicas}, {"internal_n", reference->internal_n}};
    else diag["reference"] = false;
    j["diagnostics"] = diag;
    return j;
  }

  static ExperimentConfig from_json(const json& j) {
    ExperimentConfig c;
    try {
      if (j.value("version", kHarnessVersion) != kHarnessVersion)
        fail(ErrorKind::schema, "config version " + j.at("version").dump() + " is not supported");
      c.model = j.at("model");
      c.expansion = j.at("expansion");
      c.bank = j.at("bank");
      c.scales = j.at("scales").get<std::vector<int>>();
      c.sizes = j.at("sizes").get<std::vector<long long>>();
      c.replicas = j.value("replicas", std::size_t{500});
      c.seed = j.value("seed", std::uint64_t{1});
      c.growth = j.value("growth", std::string("n~g^1"));
      c.workers = j.value("workers", 1u);
      c.exploratory = j.value("exploratory", false);
      if (j.contains("diagnostics")) {
        const auto& d = j.at("diagnostics");
        c.sigma = d.value("sigma", false);
        if (d.contains("reference") && d.at("reference").is_object()) {
          ReferenceOptions r;
          r.replicas = d.at("reference").value("replicas", r.replicas);
          r.internal_n = d.at("reference").value("internal_n", r.internal_n);
          c.reference = r;
        } else if (d.value("reference", false) == true) {
          c.reference = ReferenceOptions{};
        }
      }
      for (const auto& key : j.items()) {
        static const std::vector<std::string> known{"version", "model",    "expansion", "bank",    "scales",
                                                    "sizes",   "replicas", "seed",      "growth",  "workers",
                                                    "exploratory", "diagnostics", "timestamp"};
        if (std::find(known.begin(), known.end(), key.key()) == known.end())
          fail(ErrorKind::invalid_config, "unknown config key '" + key.key() + "'");
      }
    } catch (const json::exception& e) {
      fail(ErrorKind::invalid_config, std::string("experiment config: ") + e.what());
    }
    return c;
  }

  static ExperimentConfig load(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) fail(ErrorKind::invalid_config, "cannot read config " + p.string());
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      fail(ErrorKind::invalid_config, "config " + p.string() + ": " + e.what());
    }
    return from_json(j);
  }
};

inline HermiteExpansion expansion_from_config(const json& j) {
  try {
    if (j.contains("coeffs")) {
      const auto& c = j.at("coeffs");
      if (c.is_string()) return parse_coeffs(c.get<std::string>());
      return expansion_from_json(json{{"coeffs", c}});
    }
    if (j.contains("g")) {
      const auto e = expand(j.at("g").get<std::string>(), j.value("qmax", 12), j.value("nodes", 0));
      if (!e.finite) check_truncation(e);
      return e;
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_config, std::string("expansion: ") + e.what());
  }
  fail(ErrorKind::invalid_config, "expansion needs 'coeffs' or 'g'");
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& sigma_series_names() {
  static const std::vector<std::string> names{"diag11", "Sigma0", "Sigma1", "Sigma2", "Sigma3"};
  return names;
}

struct DistributionReport {
  std::string reference;  // "gaussian" or a hermite family name
  stats::Moments moments;
  double ks_normal = 0.0;
  stats::TestResult lilliefors;
  std::optional<stats::TestResult> ks_reference;
  std::optional<stats::Moments> reference_moments;
  bool consistent = false;

  json to_json() const {
    auto mom = [](const stats::Moments& m) {
      return json{{"mean", m.mean},           {"sd", m.sd},
                  {"se_mean", m.se_mean},     {"skewness", m.skewness},
                  {"se_skewness", m.se_skewness}, {"excess_kurtosis", m.excess_kurtosis},
                  {"se_kurtosis", m.se_kurtosis}};
    };
    auto test = [](const stats::TestResult& t) {
      return json{{"statistic", t.statistic}, {"critical", t.critical}, {"p_value", t.p_value}, {"rejected", t.rejected}};
    };
    json j{{"reference", reference},
           {"moments", mom(moments)},
           {"ks_normal", ks_normal},
           {"lilliefors", test(lilliefors)},
           {"verdict", consistent ? "consistent-with-reference" : "inconsistent"}};
    j["ks_reference"] = ks_reference ? test(*ks_reference) : json(nullptr);
    j["reference_moments"] = reference_moments ? mom(*reference_moments) : json(nullptr);
    return j;
  }

  static DistributionReport from_json(const json& j) {
    auto mom = [](const json& m) {
      stats::Moments r;
      r.mean = m.at("mean");
      r.sd = m.at("sd");
      r.se_mean = m.at("se_mean");
      r.skewness = m.at("skewness");
      r.se_skewness = m.at("se_skewness");
      r.excess_kurtosis = m.at("excess_kurtosis");
      r.se_kurtosis = m.at("se_kurtosis");
      return r;
    };
    auto test = [](const json& t) {
      return stats::TestResult{t.at("statistic"), t.at("critical"), t.at("p_value"), t.at("rejected")};
    };
    DistributionReport r;
    r.reference = j.at("reference");
    r.moments = mom(j.at("moments"));
    r.ks_normal = j.at("ks_normal");
    r.lilliefors = test(j.at("lilliefors"));
    if (!j.at("ks_reference").is_null()) r.ks_reference = test(j.at("ks_reference"));
    if (!j.at("reference_moments").is_null()) r.reference_moments = mom(j.at("reference_moments"));
    r.consistent = j.at("verdict") == "consistent-with-reference";
    return r;
  }

  bool operator==(const DistributionReport&) const = default;
};

struct CellResult {
  int j = 0;
  long long N = 0;
  long long n = 0;
  long long gamma = 0;
  std::vector<double> sbar;        // centered scalogram, filter 0
  std::vector<double> normalized;  // n^a gamma^b sbar
  std::map<std::string, std::vector<double>> groups;
  std::optional<DistributionReport> diagnostics;

  bool operator==(const CellResult&) const = default;
};

struct SlopeRecord {
  std::string series;  // "Sbar" or a chaos group
  std::string axis;    // "n" or "gamma"
  long long fixed = 0;  // j for the n axis, N for the gamma axis
  stats::ScalingFit fit;
  std::optional<double> predicted;

  bool operator==(const SlopeRecord&) const = default;
};

struct ExperimentResult {
  ExperimentConfig config;
  json report;  // RegimeReport JSON, null for exploratory runs
  std::optional<double> n_exponent;
  std::optional<double> gamma_exponent;
  std::vector<CellResult> cells;
  std::vector<SlopeRecord> slopes;
  json reference_info;  // reference sample summary or null
  double runtime_seconds = 0.0;

  const CellResult& cell(int j, long long N) const {
    for (const auto& c : cells)
      if (c.j == j && c.N == N) return c;
    fail(ErrorKind::domain, "no cell for j=" + std::to_string(j) + ", N=" + std::to_string(N));
  }

  /// Equality of everything computed from the config; runtime and worker
  /// count are excluded.
  bool same_results(const ExperimentResult& o) const {
    json a = config.to_json(), b = o.config.to_json();
    a.erase("workers");
    b.erase("workers");
    return a == b && report == o.report && n_exponent == o.n_exponent && gamma_exponent == o.gamma_exponent &&
           cells == o.cells && slopes == o.slopes && reference_info == o.reference_info;
  }

  bool operator==(const ExperimentResult& o) const {
    return same_results(o) && config.workers == o.config.workers && runtime_seconds == o.runtime_seconds;
  }
};

// ---------------------------------------------------------------------------
// Analysis
// ---------------------------------------------------------------------------

/// Slopes of log sd against log n_j (one per scale) or log gamma_j (one per
/// record size) for the series "Sbar" or a chaos group.
inline std::vector<SlopeRecord> scaling_regression(const ExperimentResult& r, const std::string& axis,
                                                   const std::string& series = "Sbar") {
  if (axis != "n" && axis != "gamma") fail(ErrorKind::invalid_input, "axis must be n or gamma");
  std::vector<SlopeRecord> out;
  const auto& cfg = r.config;
  auto values = [&](const CellResult& c) -> const std::vector<double>& {
    if (series == "Sbar") return c.sbar;
    auto it = c.groups.find(series);
    if (it == c.groups.end()) fail(ErrorKind::domain, "series '" + series + "' not recorded");
    return it->second;
  };
  const std::size_t outer = axis == "n" ? cfg.scales.size() : cfg.sizes.size();
  const std::size_t inner = axis == "n" ? cfg.sizes.size() : cfg.scales.size();
  if (inner < 3)
    fail(ErrorKind::insufficient_data, "scaling regression along " + axis + " needs at least three points");
  for (std::size_t o = 0; o < outer; ++o) {
    std::vector<double> x;
    std::vector<std::vector<double>> groups;
    for (std::size_t i = 0; i < inner; ++i) {
      const auto& c = axis == "n" ? r.cell(cfg.scales[o], cfg.sizes[i]) : r.cell(cfg.scales[i], cfg.sizes[o]);
      x.push_back(static_cast<double>(axis == "n" ? c.n : c.gamma));
      groups.push_back(values(c));
    }
    SlopeRecord s;
    s.series = series;
    s.axis = axis;
    s.fixed = axis == "n" ? cfg.scales[o] : cfg.sizes[o];
    s.fit = stats::log_sd_regression(x, groups, substream(cfg.seed, 0xB007 + o));
    if (series == "Sbar" && r.n_exponent && r.gamma_exponent) {
      // sd(Sbar) ~ n^{-a} gamma^{-b}; along gamma at fixed N, n ~ N / gamma.
      s.predicted = axis == "n" ? -*r.n_exponent : *r.n_exponent - *r.gamma_exponent;
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Standardized comparison of `values` with the standard normal law (no
/// reference sample) or with a reference sample, at the 1% level.
inline DistributionReport distribution_diagnostics(std::span<const double> values,
                                                   const std::optional<ReferenceSample>& reference) {
  if (values.size() < 200) fail(ErrorKind::insufficient_data, "distribution diagnostics need >= 200 replicas");
  DistributionReport d;
  d.moments = stats::moments(values);
  d.ks_normal = stats::ks_distance_normal(values);
  d.lilliefors = stats::lilliefors_1pct(values);
  if (!reference || reference->family == "gaussian") {
    d.reference = "gaussian";
    d.consistent = !d.lilliefors.rejected;
    if (reference) {
      const auto a = stats::standardized(values), b = stats::standardized(reference->draws);
      d.ks_reference = stats::ks_two_sample(a, b);
      d.reference_moments = stats::moments(reference->draws);
    }
    return d;
  }
  d.reference = reference->family;
  const auto a = stats::standardized(values), b = stats::standardized(reference->draws);
  d.ks_reference = stats::ks_two_sample(a, b);
  d.reference_moments = stats::moments(reference->draws);
  d.consistent = !d.ks_reference->rejected;
  return d;
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.replicas == 0) fail(ErrorKind::invalid_config, "replicas must be positive");
  if (cfg.scales.empty() || cfg.sizes.empty()) fail(ErrorKind::invalid_config, "scales and sizes must be non-empty");
  const SpectralModel model = SpectralModel::from_json(cfg.model);
  const HermiteExpansion e = expansion_from_config(cfg.expansion);
  const WaveletFilterBank bank = WaveletFilterBank::from_json(cfg.bank);
  if (bank.K() != model.K()) fail(ErrorKind::invalid_config, "bank K differs from model K");
  for (int j : cfg.scales)
    if (j < 1 || j > bank.levels()) fail(ErrorKind::invalid_config, "scale " + std::to_string(j) + " outside the bank");
  for (long long N : cfg.sizes) {
    if (N < 2) fail(ErrorKind::invalid_config, "record sizes must be >= 2");
    for (int j : cfg.scales) coefficient_count(N, bank.support(), j);
  }

  ExperimentResult r;
  r.config = cfg;
  r.report = nullptr;
  r.reference_info = nullptr;
  const auto s = structure(e);
  std::optional<RegimeReport> rep;
  try {
    rep = classify(s, rational_from_double(model.d()), model.K(), GrowthSpec::parse(cfg.growth), bank.M());
    r.report = rep->to_json();
    if (rep->n_exponent && rep->gamma_exponent) {
      r.n_exponent = to_double(*rep->n_exponent);
      r.gamma_exponent = to_double(*rep->gamma_exponent);
    }
  } catch (const Error& err) {
    if (!cfg.exploratory || (err.kind() != ErrorKind::unsupported_regime && err.kind() != ErrorKind::assumption_violated))
      throw;
    r.report = json{{"exploratory", true}, {"reason", err.what()}};
  }

  // Per-scale centering constants.
  std::map<int, double> energy;
  for (int j : cfg.scales) energy[j] = expected_energy(model, e, bank, j).front();

  std::optional<ReferenceSample> refs;
  if (cfg.reference && rep && rep->family.kind != LimitKind::none && rep->family.kind != LimitKind::gaussian) {
    refs = sample_reference(rep->family.order, model.d(), cfg.reference->internal_n, cfg.reference->replicas,
                            substream(cfg.seed, 0x5EF0), cfg.workers);
    r.reference_info = {{"family", refs->family},       {"q", refs->q},          {"internal_n", refs->internal_n},
                        {"replicas", refs->draws.size()}, {"stable", refs->stable}, {"warning", refs->warning}};
  }

  const double a = r.n_exponent.value_or(0.0), b = r.gamma_exponent.value_or(0.0);
  for (std::size_t si = 0; si < cfg.sizes.size(); ++si) {
    const long long N = cfg.sizes[si];
    const CirculantSynthesizer synth(model, static_cast<std::size_t>(N));
    const std::size_t ns = cfg.scales.size();
    std::vector<std::vector<double>> sb(ns, std::vector<double>(cfg.replicas));
    std::vector<std::map<std::string, std::vector<double>>> grp(ns);
    if (cfg.sigma)
      for (auto& g : grp)
        for (const auto& name : sigma_series_names()) g[name].assign(cfg.replicas, 0.0);
    parallel_for(cfg.replicas, cfg.workers, [&](std::size_t rep_i) {
      try {
        const auto path = synth.draw(cfg.seed, substream(si, rep_i));
        const auto z = apply_expansion(e, path.samples);
        const auto c = wavelet_coeffs(z, bank, cfg.scales);
        for (std::size_t k = 0; k < ns; ++k) sb[k][rep_i] = mean_square(c.scales[k].W.front()) - energy.at(cfg.scales[k]);
        if (cfg.sigma) {
          const auto comp = chaos_components(path.samples, e, bank, cfg.scales);
          for (std::size_t k = 0; k < ns; ++k) {
            const auto dec = sigma_decomposition(comp, e, model, bank, cfg.scales[k]);
            grp[k]["diag11"][rep_i] = dec.diag11;
            grp[k]["Sigma0"][rep_i] = dec.sigma0;
            grp[k]["Sigma1"][rep_i] = dec.sigma1;
            grp[k]["Sigma2"][rep_i] = dec.sigma2;
            grp[k]["Sigma3"][rep_i] = dec.sigma3;
          }
        }
      } catch (const Error& err) {
        throw Error(err.kind(), std::string(err.what()) + " (N=" + std::to_string(N) +
                                    ", replica=" + std::to_string(rep_i) + ")");
      }
    });
    for (std::size_t k = 0; k < ns; ++k) {
      CellResult c;
      c.j = cfg.scales[k];
      c.N = N;
      c.gamma = bank.gamma_int(c.j);
      c.n = coefficient_count(N, bank.support(), c.j);
      c.sbar = std::move(sb[k]);
      const double scale = std::pow(static_cast<double>(c.n), a) * std::pow(static_cast<double>(c.gamma), b);
      c.normalized.resize(c.sbar.size());
      for (std::size_t i = 0; i < c.sbar.size(); ++i) c.normalized[i] = scale * c.sbar[i];
      c.groups = std::move(grp[k]);
      if (cfg.replicas >= 200 && (cfg.reference || rep)) c.diagnostics = distribution_diagnostics(c.normalized, refs);
      r.cells.push_back(std::move(c));
    }
  }
  std::vector<std::string> series{"Sbar"};
  if (cfg.sigma)
    for (const auto& name : sigma_series_names()) {
      // A group with no members for this expansion is identically zero.
      const bool empty = std::all_of(r.cells.begin(), r.cells.end(), [&](const CellResult& c) {
        const auto& v = c.groups.at(name);
        return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
      });
      if (!empty) series.push_back(name);
    }
  for (const auto& name : series) {
    if (cfg.sizes.size() >= 3) {
      auto v = scaling_regression(r, "n", name);
      r.slopes.insert(r.slopes.end(), v.begin(), v.end());
    }
    if (cfg.scales.size() >= 3) {
      auto v = scaling_regression(r, "gamma", name);
      r.slopes.insert(r.slopes.end(), v.begin(), v.end());
    }
  }
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) fail(ErrorKind::schema, where + ": bad number '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) fail(ErrorKind::schema, "missing file " + p.filename().string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    fail(ErrorKind::schema, p.filename().string() + ": " + e.what());
  }
}

}  // namespace detail

inline void persist(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream o(dir / "config.json");
    o << r.config.to_json().dump(2) << "\n";
  }
  {
    json cells = json::array();
    for (const auto& c : r.cells) {
      json cj{{"j", c.j}, {"N", c.N}, {"n", c.n}, {"gamma", c.gamma}};
      cj["diagnostics"] = c.diagnostics ? c.diagnostics->to_json() : json(nullptr);
      cells.push_back(cj);
    }
    json j{{"version", kHarnessVersion},
           {"report", r.report},
           {"n_exponent", r.n_exponent ? json(*r.n_exponent) : json(nullptr)},
           {"gamma_exponent", r.gamma_exponent ? json(*r.gamma_exponent) : json(nullptr)},
           {"cells", cells},
           {"replicas", r.config.replicas},
           {"groups", r.config.sigma ? json(sigma_series_names()) : json::array()},
           {"reference", r.reference_info},
           {"runtime_seconds", r.runtime_seconds}};
    std::ofstream o(dir / "result.json");
    o << j.dump(2) << "\n";
  }
  {
    std::ofstream o(dir / "replicas.csv");
    o << "j,N,replica,Sbar,normalized";
    if (r.config.sigma)
      for (const auto& g : sigma_series_names()) o << "," << g;
    o << "\n";
    for (const auto& c : r.cells) {
      for (std::size_t i = 0; i < c.sbar.size(); ++i) {
        o << c.j << "," << c.N << "," << i << "," << detail::fmt_double(c.sbar[i]) << ","
          << detail::fmt_double(c.normalized[i]);
        if (r.config.sigma)
          for (const auto& g : sigma_series_names()) o << "," << detail::fmt_double(c.groups.at(g)[i]);
        o << "\n";
      }
    }
  }
  {
    std::ofstream o(dir / "slopes.csv");
    o << "series,axis,fixed,slope,se,ci_low,ci_high,predicted\n";
    for (const auto& s : r.slopes) {
      o << s.series << "," << s.axis << "," << s.fixed << "," << detail::fmt_double(s.fit.slope) << ","
        << detail::fmt_double(s.fit.se) << "," << detail::fmt_double(s.fit.ci_low) << ","
        << detail::fmt_double(s.fit.ci_high) << "," << (s.predicted ? detail::fmt_double(*s.predicted) : "") << "\n";
    }
  }
}

inline ExperimentResult load(const std::filesystem::path& dir) {
  ExperimentResult r;
  const json cfg = detail::read_json_file(dir / "config.json");
  const json res = detail::read_json_file(dir / "result.json");
  try {
    if (cfg.value("version", -1) != kHarnessVersion || res.value("version", -1) != kHarnessVersion)
      fail(ErrorKind::schema, "result version mismatch (expected " + std::to_string(kHarnessVersion) + ")");
    r.config = ExperimentConfig::from_json(cfg);
    r.report = res.at("report");
    if (!res.at("n_exponent").is_null()) r.n_exponent = res.at("n_exponent").get<double>();
    if (!res.at("gamma_exponent").is_null()) r.gamma_exponent = res.at("gamma_exponent").get<double>();
    r.reference_info = res.at("reference");
    r.runtime_seconds = res.at("runtime_seconds");
    for (const auto& cj : res.at("cells")) {
      CellResult c;
      c.j = cj.at("j");
      c.N = cj.at("N");
      c.n = cj.at("n");
      c.gamma = cj.at("gamma");
      if (!cj.at("diagnostics").is_null()) c.diagnostics = DistributionReport::from_json(cj.at("diagnostics"));
      r.cells.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::schema, std::string("result.json: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::schema) throw;
    fail(ErrorKind::schema, std::string("config.json: ") + e.what());
  }

  std::vector<std::string> header{"j", "N", "replica", "Sbar", "normalized"};
  if (r.config.sigma)
    for (const auto& g : sigma_series_names()) header.push_back(g);
  {
    std::ifstream in(dir / "replicas.csv");
    if (!in) fail(ErrorKind::schema, "missing file replicas.csv");
    std::string line;
    if (!std::getline(in, line) || detail::split_csv(line) != header)
      fail(ErrorKind::schema, "replicas.csv: unexpected header");
    for (auto& c : r.cells) {
      c.sbar.assign(r.config.replicas, 0.0);
      c.normalized.assign(r.config.replicas, 0.0);
      if (r.config.sigma)
        for (const auto& g : sigma_series_names()) c.groups[g].assign(r.config.replicas, 0.0);
    }
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      const auto f = detail::split_csv(line);
      if (f.size() != header.size()) fail(ErrorKind::schema, "replicas.csv: wrong field count");
      const int j = static_cast<int>(detail::parse_double(f[0], "replicas.csv"));
      const long long N = static_cast<long long>(detail::parse_double(f[1], "replicas.csv"));
      const auto i = static_cast<std::size_t>(detail::parse_double(f[2], "replicas.csv"));
      CellResult* c = nullptr;
      for (auto& cc : r.cells)
        if (cc.j == j && cc.N == N) c = &cc;
      if (!c || i >= r.config.replicas) fail(ErrorKind::schema, "replicas.csv: row outside the result grid");
      c->sbar[i] = detail::parse_double(f[3], "replicas.csv");
      c->normalized[i] = detail::parse_double(f[4], "replicas.csv");
      if (r.config.sigma)
        for (std::size_t g = 0; g < sigma_series_names().size(); ++g)
          c->groups[sigma_series_names()[g]][i] = detail::parse_double(f[5 + g], "replicas.csv");
      ++rows;
    }
    if (rows != r.cells.size() * r.config.replicas) fail(ErrorKind::schema, "replicas.csv: row count mismatch");
  }
  {
    std::ifstream in(dir / "slopes.csv");
    if (!in) fail(ErrorKind::schema, "missing file slopes.csv");
    std::string line;
    const std::vector<std::string> sh{"series", "axis", "fixed", "slope", "se", "ci_low", "ci_high", "predicted"};
    if (!std::getline(in, line) || detail::split_csv(line) != sh) fail(ErrorKind::schema, "slopes.csv: unexpected header");
    while (std::getline(in, line)) {
      const auto f = detail::split_csv(line);
      if (f.size() != sh.size()) fail(ErrorKind::schema, "slopes.csv: wrong field count");
      SlopeRecord s;
      s.series = f[0];
      s.axis = f[1];
      s.fixed = static_cast<long long>(detail::parse_double(f[2], "slopes.csv"));
      s.fit.slope = detail::parse_double(f[3], "slopes.csv");
      s.fit.se = detail::parse_double(f[4], "slopes.csv");
      s.fit.ci_low = detail::parse_double(f[5], "slopes.csv");
      s.fit.ci_high = detail::parse_double(f[6], "slopes.csv");
      if (!f[7].empty()) s.predicted = detail::parse_double(f[7], "slopes.csv");
      r.slopes.push_back(std::move(s));
    }
  }
  return r;
}

}  // namespace lrdscal
