#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lrdscal/error.hpp"
#include "lrdscal/gaussian_synth.hpp"
#include "lrdscal/harness.hpp"
#include "lrdscal/hermite.hpp"
#include "lrdscal/limit_reference.hpp"
#include "lrdscal/rational.hpp"
#include "lrdscal/regime.hpp"
#include "lrdscal/scalogram.hpp"
#include "lrdscal/spectral_model.hpp"
#include "lrdscal/stats.hpp"
#include "lrdscal/wavelet_bank.hpp"

namespace lrdscal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAssumption = 3;
inline constexpr int kExitNumeric = 4;

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::assumption_violated:
    case ErrorKind::unsupported_regime: return kExitAssumption;
    case ErrorKind::numeric: return kExitNumeric;
    default: return kExitConfig;
  }
}

inline std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::filesystem::path out_dir() {
  const char* env = std::getenv("LRDSCAL_OUT_DIR");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path(".");
}

/// "const:1", "arfactor:0.5", "cospoly:1,0.3".
inline FstarSpec parse_fstar(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  FstarSpec f;
  if (kind == "const") f.kind = FstarKind::constant;
  else if (kind == "cospoly") f.kind = FstarKind::cospoly;
  else if (kind == "arfactor") f.kind = FstarKind::arfactor;
  else fail(ErrorKind::invalid_input, "unknown f* family '" + kind + "'");
  f.params.clear();
  if (colon == std::string::npos) {
    if (f.kind == FstarKind::constant) f.params = {1.0};
    return f;
  }
  std::stringstream ss(text.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0') fail(ErrorKind::invalid_input, "bad f* parameter '" + item + "'");
    f.params.push_back(v);
  }
  return f;
}

inline std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const long v = std::strtol(item.c_str(), &end, 10);
    if (item.empty() || *end != '\0') fail(ErrorKind::invalid_input, "bad integer '" + item + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

inline void write_series_csv(const std::filesystem::path& p, const std::string& column,
                             std::span<const double> values) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream o(p);
  if (!o) fail(ErrorKind::invalid_config, "cannot write " + p.string());
  o << "t," << column << "\n";
  char buf[40];
  for (std::size_t t = 0; t < values.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%.17g", values[t]);
    o << t << "," << buf << "\n";
  }
}

/// Last column of a CSV file with an optional header row.
inline std::vector<double> read_series_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) fail(ErrorKind::invalid_input, "cannot read " + p.string());
  std::vector<double> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    const std::string f = comma == std::string::npos ? line : line.substr(comma + 1);
    char* end = nullptr;
    const double v = std::strtod(f.c_str(), &end);
    if (f.empty() || *end != '\0') {
      if (first) {
        first = false;
        continue;
      }
      fail(ErrorKind::invalid_input, p.string() + ": bad value '" + f + "'");
    }
    first = false;
    out.push_back(v);
  }
  return out;
}

struct ModelFlags {
  std::string d = "0.4";
  int K = 0;
  std::string fstar = "const:1";
  std::string model_file;

  void add(CLI::App* app) {
    app->add_option("--d", d, "memory parameter in (0, 1/2)")->capture_default_str();
    app->add_option("--K", K, "differencing order")->capture_default_str();
    app->add_option("--fstar", fstar, "short-memory factor: const:C | cospoly:a0,a1,.. | arfactor:PHI")
        ->capture_default_str();
    app->add_option("--model", model_file, "spectral model JSON file (overrides --d/--K/--fstar)");
  }

  SpectralModel build() const {
    if (!model_file.empty()) {
      std::ifstream in(model_file);
      if (!in) fail(ErrorKind::invalid_input, "cannot read " + model_file);
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        fail(ErrorKind::invalid_input, model_file + ": " + e.what());
      }
      return SpectralModel::from_json(j);
    }
    return SpectralModel(to_double(parse_rational(d)), parse_fstar(fstar), K);
  }
};

struct ExpansionFlags {
  std::string coeffs;
  std::string g;
  int qmax = 12;
  int nodes = 0;

  void add(CLI::App* app) {
    app->add_option("--coeffs", coeffs, "sparse Hermite coefficients q:c,q:c");
    app->add_option("--g", g, "function of X: hermite:q | power:p | abs-centered | sign, combined with + and -");
    app->add_option("--qmax", qmax, "truncation order for --g")->capture_default_str();
    app->add_option("--nodes", nodes, "quadrature nodes for --g (0 = automatic)")->capture_default_str();
  }

  bool given() const { return !coeffs.empty() || !g.empty(); }

  HermiteExpansion build() const {
    if (!coeffs.empty() && !g.empty()) fail(ErrorKind::invalid_input, "give either --coeffs or --g, not both");
    if (!coeffs.empty()) return parse_coeffs(coeffs);
    if (!g.empty()) return expand(g, qmax, nodes);
    fail(ErrorKind::invalid_input, "one of --coeffs or --g is required");
  }

  json to_json() const {
    if (!coeffs.empty()) return json{{"coeffs", coeffs}};
    return json{{"g", g}, {"qmax", qmax}, {"nodes", nodes}};
  }
};

struct BankFlags {
  std::string family = "haar";
  int levels = 10;
  int filters = 1;

  void add(CLI::App* app) {
    app->add_option("--bank,--filter", family, "wavelet filter: haar | db2")->capture_default_str();
    app->add_option("--levels", levels, "number of scales in the bank")->capture_default_str();
    app->add_option("--filters", filters, "number of filter channels")->capture_default_str();
  }

  WaveletFilterBank build(int K) const { return WaveletFilterBank::from_name(family, levels, K, filters); }
};

inline json moments_json(const stats::Moments& m) {
  return json{{"mean", m.mean},         {"sd", m.sd},
              {"se_mean", m.se_mean},   {"skewness", m.skewness},
              {"se_skewness", m.se_skewness}, {"excess_kurtosis", m.excess_kurtosis},
              {"se_kurtosis", m.se_kurtosis}};
}

/// Runs one invocation. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Long-memory wavelet scalogram toolkit", "lrdscal"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand all help");

  json config;
  json result;
  std::string command;
  std::string table;

  // synth
  ModelFlags synth_model;
  std::size_t synth_n = 4096;
  std::uint64_t synth_seed = 1, synth_stream = 0;
  std::string synth_out;
  bool synth_spectral = false;
  auto* synth = app.add_subcommand("synth", "simulate a long-memory Gaussian series");
  synth_model.add(synth);
  synth->add_option("--n", synth_n, "series length")->capture_default_str();
  synth->add_option("--seed", synth_seed, "master seed")->capture_default_str();
  synth->add_option("--stream", synth_stream, "stream index")->capture_default_str();
  synth->add_option("--out", synth_out, "output CSV (default $LRDSCAL_OUT_DIR/synth.csv)");
  synth->add_flag("--spectral", synth_spectral, "use the spectral Riemann-sum sampler");

  // expand
  ExpansionFlags expand_flags;
  std::string expand_d;
  auto* expand_cmd = app.add_subcommand("expand", "Hermite expansion and structure sets of G");
  expand_flags.add(expand_cmd);
  expand_cmd->add_option("--d", expand_d, "memory parameter for the coefficient-decay check");

  // classify
  ExpansionFlags cls_exp;
  std::string cls_d = "0.4", cls_growth = "n~g^1";
  int cls_K = 0;
  std::optional<int> cls_M;
  bool cls_audit = false, cls_table = false;
  auto* cls = app.add_subcommand("classify", "limit regime of the centered scalogram");
  cls_exp.add(cls);
  cls->add_option("--d", cls_d, "memory parameter (exact decimal or fraction)")->capture_default_str();
  cls->add_option("--K", cls_K, "differencing order")->capture_default_str();
  cls->add_option("--growth", cls_growth, "growth of n_j against gamma_j, n~g^RHO")->capture_default_str();
  cls->add_option("--M", cls_M, "vanishing moments of the filter");
  cls->add_flag("--audit", cls_audit, "include the exponent dominance audit");
  cls->add_flag("--table", cls_table, "print a human-readable table instead of JSON");

  // scalogram
  ModelFlags sc_model;
  ExpansionFlags sc_exp;
  BankFlags sc_bank;
  std::string sc_input, sc_scales, sc_out;
  std::size_t sc_n = 1 << 14;
  std::uint64_t sc_seed = 1;
  bool sc_sigma = false;
  auto* sc = app.add_subcommand("scalogram", "wavelet scalogram of G(X) (Delta^-K summed)");
  sc_model.add(sc);
  sc_exp.add(sc);
  sc_bank.add(sc);
  sc->add_option("--input", sc_input, "CSV with the Gaussian series X (default: simulate)");
  sc->add_option("--n", sc_n, "length of the simulated series")->capture_default_str();
  sc->add_option("--seed", sc_seed, "seed of the simulated series")->capture_default_str();
  sc->add_option("--scales", sc_scales, "comma-separated scale indices (default: all that fit)");
  sc->add_flag("--sigma", sc_sigma, "add the chaos-group decomposition");
  sc->add_option("--out", sc_out, "per-scale CSV (default $LRDSCAL_OUT_DIR/scalogram.csv)");

  // constants
  ModelFlags cs_model;
  ExpansionFlags cs_exp;
  BankFlags cs_bank;
  std::string cs_q, cs_growth = "n~g^1";
  std::uint64_t cs_budget = 1 << 20, cs_seed = 1;
  bool cs_gamma = false;
  int cs_P = 64;
  auto* cs = app.add_subcommand("constants", "limit constants L_q, Gamma and the theorem constant");
  cs_model.add(cs);
  cs_exp.add(cs);
  cs_bank.add(cs);
  cs->add_option("--q", cs_q, "comma-separated q for L_q");
  cs->add_flag("--gamma", cs_gamma, "compute the Gamma matrix");
  cs->add_option("--P", cs_P, "p-range truncation for Gamma")->capture_default_str();
  cs->add_option("--budget", cs_budget, "Monte Carlo draws for L_q (0 = quadrature only)")->capture_default_str();
  cs->add_option("--seed", cs_seed, "Monte Carlo seed")->capture_default_str();
  cs->add_option("--growth", cs_growth, "growth used to select the theorem constant")->capture_default_str();

  // reference
  int ref_q = 2;
  std::string ref_d = "0.4", ref_out;
  std::size_t ref_n = 1 << 14, ref_reps = 1000;
  std::uint64_t ref_seed = 1;
  unsigned ref_workers = 1;
  auto* ref = app.add_subcommand("reference", "reference draws of the Hermite-process marginal");
  ref->add_option("--q", ref_q, "chaos order")->capture_default_str();
  ref->add_option("--d", ref_d, "memory parameter")->capture_default_str();
  ref->add_option("--internal-n", ref_n, "partial-sum length")->capture_default_str();
  ref->add_option("--replicas", ref_reps, "number of draws")->capture_default_str();
  ref->add_option("--seed", ref_seed, "seed")->capture_default_str();
  ref->add_option("--workers", ref_workers, "worker threads")->capture_default_str();
  ref->add_option("--out", ref_out, "output CSV (default $LRDSCAL_OUT_DIR/reference.csv)");

  // mc
  std::string mc_config, mc_out;
  std::optional<unsigned> mc_workers;
  auto* mc = app.add_subcommand("mc", "run a Monte Carlo experiment from a JSON config");
  mc->add_option("--config", mc_config, "experiment config JSON")->required();
  mc->add_option("--out", mc_out, "result directory (default $LRDSCAL_OUT_DIR/mc_<seed>)");
  mc->add_option("--workers", mc_workers, "override the worker count");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", "invalid_config"}, {"message", e.what()}}.dump() << "\n";
    return kExitConfig;
  }

  try {
    if (*synth) {
      command = "synth";
      const auto model = synth_model.build();
      const std::filesystem::path path = synth_out.empty() ? out_dir() / "synth.csv" : std::filesystem::path(synth_out);
      config = {{"model", model.to_json()}, {"n", synth_n}, {"seed", synth_seed}, {"stream", synth_stream},
                {"method", synth_spectral ? "spectral" : "auto"}, {"out", path.string()}};
      const CirculantSynthesizer s(model, synth_n, synth_spectral);
      const auto p = s.draw(synth_seed, synth_stream);
      write_series_csv(path, "x", p.samples);
      char digest[24];
      std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(p.model_digest));
      {
        std::ofstream meta(path.string() + ".json");
        meta << json{{"seed", synth_seed},          {"stream", synth_stream}, {"method", to_string(p.method)},
                     {"clamp_error", p.clamp_error}, {"model", model.to_json()}, {"model_digest", digest}}
                    .dump(2)
             << "\n";
      }
      result = {{"file", path.string()},       {"metadata", path.string() + ".json"}, {"n", p.samples.size()},
                {"method", to_string(p.method)}, {"embedding_size", s.embedding_size()},
                {"clamp_error", p.clamp_error},  {"model_digest", digest},
                {"fstar0", model.fstar0()},      {"normalization", model.normalization()}};
    } else if (*expand_cmd) {
      command = "expand";
      const auto e = expand_flags.build();
      config = expand_flags.to_json();
      result = {{"expansion", e.to_json()},
                {"tail_energy", e.tail_energy},
                {"finite", e.finite},
                {"variance", e.variance()},
                {"structure", structure(e).to_json()}};
      if (!expand_d.empty()) {
        config["d"] = expand_d;
        const auto dc = decay_check(e, to_double(parse_rational(expand_d)));
        result["decay"] = {{"lambda", dc.lambda}, {"satisfied", dc.satisfied}};
      }
    } else if (*cls) {
      command = "classify";
      const auto e = cls_exp.build();
      config = cls_exp.to_json();
      config["d"] = cls_d;
      config["K"] = cls_K;
      config["growth"] = cls_growth;
      config["M"] = cls_M ? json(*cls_M) : json(nullptr);
      if (!e.finite) check_truncation(e);
      const auto s = structure(e);
      const auto rep = classify(s, parse_rational(cls_d), cls_K, GrowthSpec::parse(cls_growth), cls_M);
      result = rep.to_json();
      result["structure"] = s.to_json();
      if (cls_audit) result["audit"] = dominance_audit(e, parse_rational(cls_d), cls_K, GrowthSpec::parse(cls_growth)).to_json();
      if (cls_table) table = rep.table();
    } else if (*sc) {
      command = "scalogram";
      const auto model = sc_model.build();
      const auto e = sc_exp.given() ? sc_exp.build() : from_coefficients({{1, 1.0}});
      const auto bank = sc_bank.build(model.K());
      std::vector<double> x;
      config = {{"model", model.to_json()}, {"expansion", sc_exp.given() ? sc_exp.to_json() : json{{"coeffs", "1:1"}}},
                {"bank", bank.to_json()}, {"sigma", sc_sigma}};
      if (!sc_input.empty()) {
        x = read_series_csv(sc_input);
        config["input"] = sc_input;
      } else {
        x = synthesize(model, sc_n, sc_seed).samples;
        config["n"] = sc_n;
        config["seed"] = sc_seed;
      }
      std::vector<int> scales;
      if (!sc_scales.empty()) {
        scales = parse_int_list(sc_scales);
      } else {
        for (int j = 1; j <= bank.levels(); ++j) {
          const long long N = static_cast<long long>(x.size());
          if ((N - bank.support() + 1) / bank.gamma_int(j) - bank.support() + 1 >= 2) scales.push_back(j);
        }
      }
      config["scales"] = scales;
      const auto z = apply_expansion(e, x);
      const auto c = wavelet_coeffs(z, bank, scales);
      const auto entries = centered_scalogram(c, model, e, bank);
      json arr = json::array();
      std::optional<ChaosComponents> comp;
      if (sc_sigma) comp = chaos_components(x, e, bank, scales);
      for (const auto& en : entries) {
        json row{{"j", en.j}, {"gamma", en.gamma}, {"n", en.n}, {"S", en.S}, {"E_W2", en.E_W2}, {"Sbar", en.Sbar}};
        if (comp) {
          const auto dec = sigma_decomposition(*comp, e, model, bank, en.j);
          row["sigma"] = {{"diag11", dec.diag11}, {"Sigma0", dec.sigma0}, {"Sigma1", dec.sigma1},
                          {"Sigma2", dec.sigma2}, {"Sigma3", dec.sigma3}, {"total", dec.total()}};
        }
        arr.push_back(row);
      }
      const auto path = sc_out.empty() ? out_dir() / "scalogram.csv" : std::filesystem::path(sc_out);
      config["out"] = path.string();
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      std::ofstream csv(path);
      if (!csv) fail(ErrorKind::invalid_config, "cannot write " + path.string());
      csv << "j,gamma_j,n_j,S,Sbar,E_W2,Sigma0,Sigma1,Sigma2,Sigma3,diag11\n";
      for (const auto& row : arr) {
        csv << row["j"].get<int>() << "," << row["gamma"].get<long long>() << "," << row["n"].get<long long>();
        for (const char* k : {"S", "Sbar", "E_W2"}) csv << "," << detail::fmt_double(row[k][0].get<double>());
        for (const char* k : {"Sigma0", "Sigma1", "Sigma2", "Sigma3", "diag11"})
          csv << "," << (row.contains("sigma") ? detail::fmt_double(row["sigma"][k].get<double>()) : std::string());
        csv << "\n";
      }
      result = {{"file", path.string()}, {"scales", arr}, {"length", x.size()}};
    } else if (*cs) {
      command = "constants";
      const auto model = cs_model.build();
      const auto bank = cs_bank.build(model.K());
      config = {{"model", model.to_json()}, {"bank", bank.to_json()}, {"budget", cs_budget},
                {"seed", cs_seed},          {"gamma", cs_gamma},       {"P", cs_P}};
      std::vector<int> qs = cs_q.empty() ? std::vector<int>{} : parse_int_list(cs_q);
      std::optional<RegimeReport> rep;
      std::optional<HermiteExpansion> e;
      if (cs_exp.given()) {
        e = cs_exp.build();
        config["expansion"] = cs_exp.to_json();
        config["growth"] = cs_growth;
        rep = classify(structure(*e), rational_from_double(model.d()), model.K(), GrowthSpec::parse(cs_growth),
                       bank.M());
        if (rep->constant == ConstantKind::gamma_matrix) cs_gamma = true;
        else if (rep->constant != ConstantKind::none && std::find(qs.begin(), qs.end(), rep->constant_q) == qs.end())
          qs.push_back(rep->constant_q);
      }
      std::sort(qs.begin(), qs.end());
      config["q"] = qs;
      LimitConstants lc;
      lc.fstar0 = model.fstar0();
      const auto h2 = limit_transfer_sq(bank);
      json lq = json::object();
      for (int q : qs) {
        lc.Lq[q] = compute_Lq(h2, q, model.d(), model.K(), cs_budget, cs_seed);
        lq[std::to_string(q)] = lc.Lq[q].to_json();
      }
      result = {{"Lq", lq}, {"fstar0", lc.fstar0}, {"Gamma", nullptr}, {"theorem_constant", nullptr}};
      if (cs_gamma) {
        lc.Gamma = compute_Gamma(bank, model, cs_P);
        result["Gamma"] = lc.Gamma->to_json();
        result["Gamma_truncation_delta"] = lc.Gamma->truncation_delta;
        result["Gamma_min_eigenvalue"] = lc.Gamma->min_eigenvalue;
      }
      if (rep) {
        result["regime"] = rep->to_json();
        if (rep->constant != ConstantKind::none) result["theorem_constant"] = theorem_constant(*rep, lc, *e).to_json();
      }
    } else if (*ref) {
      command = "reference";
      const auto path = ref_out.empty() ? out_dir() / "reference.csv" : std::filesystem::path(ref_out);
      const double d = to_double(parse_rational(ref_d));
      config = {{"q", ref_q}, {"d", ref_d}, {"internal_n", ref_n}, {"replicas", ref_reps},
                {"seed", ref_seed}, {"out", path.string()}};
      const auto s = sample_reference(ref_q, d, ref_n, ref_reps, ref_seed, ref_workers);
      write_series_csv(path, "draw", s.draws);
      result = {{"file", path.string()}, {"family", s.family},       {"replicas", s.draws.size()},
                {"scale", s.scale},      {"scale_half", s.scale_half}, {"stable", s.stable},
                {"warning", s.warning},  {"moments", moments_json(stats::moments(s.draws))}};
    } else if (*mc) {
      command = "mc";
      auto cfg = ExperimentConfig::load(mc_config);
      if (mc_workers) cfg.workers = *mc_workers;
      const auto dir = mc_out.empty() ? out_dir() / ("mc_" + std::to_string(cfg.seed)) : std::filesystem::path(mc_out);
      config = cfg.to_json();
      config["out"] = dir.string();
      const auto r = run_experiment(cfg);
      persist(r, dir);
      json cells = json::array();
      for (const auto& c : r.cells) {
        json cj{{"j", c.j}, {"N", c.N}, {"n", c.n}};
        if (c.diagnostics) cj["diagnostics"] = c.diagnostics->to_json();
        cells.push_back(cj);
      }
      json slopes = json::array();
      for (const auto& s : r.slopes)
        slopes.push_back({{"series", s.series}, {"axis", s.axis}, {"fixed", s.fixed}, {"slope", s.fit.slope},
                          {"ci", {s.fit.ci_low, s.fit.ci_high}},
                          {"predicted", s.predicted ? json(*s.predicted) : json(nullptr)}});
      result = {{"dir", dir.string()}, {"report", r.report}, {"cells", cells}, {"slopes", slopes},
                {"runtime_seconds", r.runtime_seconds}};
    }
  } catch (const NumericError& e) {
    err << json{{"error", to_string(e.kind())}, {"message", e.what()}, {"achieved", e.achieved()}}.dump() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << json{{"error", to_string(e.kind())}, {"message", e.what()}}.dump() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return kExitNumeric;
  }

  config["command"] = command;
  config["timestamp"] = timestamp();
  if (!table.empty()) {
    out << table << "config         " << config.dump() << "\n";
    return kExitOk;
  }
  out << json{{"config", config}, {"result", result}}.dump(2) << "\n";
  return kExitOk;
}

}  // namespace lrdscal::cli
