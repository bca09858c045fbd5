// Command-line front end: simulate | scatter | test | estimate | variogram.
// Results go to stdout as JSON (schema_version 1) with the fully resolved
// configuration echoed, so identical invocations produce identical bytes.
// Exit codes: 0 success, 2 validation/usage errors, 1 numerical failures.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sbss/sbss.hpp"

namespace {

using nlohmann::json;
using namespace sbss;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

void emit(const json& j, const std::string& out_path) {
  std::string text = j.dump(2);
  text.push_back('\n');
  std::cout << text;
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw ValidationError(out_path + ": cannot open file for writing");
    f << text;
    if (!f) throw ValidationError(out_path + ": write failed");
  }
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t salt) {
  std::uint64_t s = root ^ ((salt + 1) * 0x9e3779b97f4a7c15ULL);
  return splitmix64(s);
}

json data_summary(const LocationSet& loc, Index p) {
  json d;
  d["n"] = loc.n();
  d["p"] = p;
  d["dim"] = loc.dim();
  d["min_pairwise_distance"] = loc.min_pairwise_distance();
  GridDescriptor gd = detect_grid(loc);
  d["regular_grid"] = gd.is_regular;
  if (gd.is_regular) d["grid_spacing"] = gd.spacing;
  return d;
}

json kernels_to_json(const std::vector<Kernel>& ks) {
  json a = json::array();
  for (const Kernel& k : ks) a.push_back(k.spec_string());
  return a;
}

json null_model_json(const NullModel& nm) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        json j;
        if constexpr (std::is_same_v<T, ChiSquareNull>) {
          j["type"] = "chi-square";
          j["df"] = m.df;
        } else if constexpr (std::is_same_v<T, WeightedChiSquareNull>) {
          j["type"] = "weighted-chi-square";
          j["weights"] = m.weights;
          j["df_each"] = m.df_each;
          j["moment_matched"] = m.moment_matched;
        } else {
          j["type"] = "bootstrap";
          j["replicates"] = m.replicates;
          j["count_geq"] = m.count_geq;
        }
        return j;
      },
      nm);
}

json test_result_json(const TestResult& res, double alpha) {
  json j;
  j["r"] = res.r;
  j["statistic"] = res.stat;
  j["p_value"] = res.p_value;
  j["method"] = res.method;
  j["reject"] = res.p_value < alpha;
  j["null_model"] = null_model_json(res.null_model);
  return j;
}

json trace_json(const EstimateResult& res) {
  json a = json::array();
  for (const TraceEntry& e : res.trace) {
    json t;
    t["r"] = e.r;
    t["value"] = e.value;
    t["rejected"] = e.rejected;
    a.push_back(t);
  }
  return a;
}

std::vector<MaternParams> parse_signals(const std::string& text) {
  std::vector<MaternParams> out;
  if (text.empty()) return out;
  for (const std::string& tok : sbss::detail::split(text, ',')) {
    const std::string what = "signal spec '" + tok + "'";
    auto parts = sbss::detail::split(tok, ':');
    if (parts.size() != 2) throw ValidationError(what + ": expected nu:phi");
    out.push_back({sbss::detail::parse_double(parts[0], what),
                   sbss::detail::parse_double(parts[1], what)});
  }
  return out;
}

struct CommonOpts {
  std::string input;
  std::string kernels;
  std::string method = "asym";
  double alpha = 0.05;
  int replicates = 200;
  std::optional<double> block_size;
  std::uint64_t seed = 0;
  bool uncentered = false;
  bool unnormalized = false;
  bool allow_ball = false;
  int workers = 0;
  std::string latent_out;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_kernels = true) {
  cmd->add_option("--input", o.input, "input CSV (header x,y[,z],value columns)")->required();
  if (with_kernels) {
    cmd->add_option("--kernels", o.kernels,
                    "comma-separated kernel specs (ring:r1:r2, ball:r, lag:m:h)")
        ->required();
  }
  cmd->add_option("--method", o.method, "asym | param | perm | sp-param | sp-perm")
      ->check(CLI::IsMember({"asym", "param", "perm", "sp-param", "sp-perm"}));
  cmd->add_option("--alpha", o.alpha, "significance level in (0, 1]");
  cmd->add_option("--B", o.replicates, "bootstrap replicates");
  cmd->add_option("--block-size", o.block_size,
                  "spatial bootstrap block edge (length units; lattice units on grids)");
  cmd->add_option("--seed", o.seed, "bootstrap seed");
  cmd->add_flag("--uncentered", o.uncentered, "skip empirical centering of the values");
  cmd->add_flag("--unnormalized", o.unnormalized,
                "use unnormalized local covariances (weighted chi-square null)");
  cmd->add_flag("--allow-ball", o.allow_ball, "permit ball kernels in tests");
  cmd->add_option("--workers", o.workers, "bootstrap worker threads (0 = auto)");
  cmd->add_option("--latent-out", o.latent_out, "write latent components CSV (IC.1..IC.p)");
  cmd->add_option("--out", o.out, "also write the JSON result to this path");
}

bool is_bootstrap(const std::string& method) { return method != "asym"; }
bool is_spatial(const std::string& method) {
  return method == "sp-param" || method == "sp-perm";
}

void check_bootstrap_flags(const CLI::App* cmd, const CommonOpts& o) {
  if (!is_bootstrap(o.method)) {
    for (const char* flag : {"--B", "--block-size", "--seed", "--workers"}) {
      if (cmd->count(flag) > 0) {
        throw ValidationError(std::string(flag) + " requires a bootstrap method");
      }
    }
  }
  if (!is_spatial(o.method) && cmd->count("--block-size") > 0) {
    throw ValidationError("--block-size requires a spatial bootstrap method");
  }
  if (!(o.alpha > 0.0) || o.alpha > 1.0) throw ValidationError("--alpha must lie in (0, 1]");
}

int resolve_workers(int workers) {
  if (workers > 0) return workers;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

SpatialMode resolve_spatial(const CommonOpts& o, const LocationSet& loc, json& cfg) {
  if (!is_spatial(o.method)) return std::monostate{};
  GridDescriptor gd = detect_grid(loc);
  if (gd.is_regular) {
    int m;
    if (o.block_size) {
      if (!(*o.block_size >= 1.0) || std::floor(*o.block_size) != *o.block_size) {
        throw ValidationError("--block-size must be a positive integer on lattice data");
      }
      m = static_cast<int>(*o.block_size);
    } else {
      m = static_cast<int>(std::ceil(
          std::pow(static_cast<double>(loc.n()), 1.0 / (2.0 * loc.dim()))));
    }
    cfg["block_size"] = m;
    cfg["block_regime"] = "regular";
    return RegularBlocks{m};
  }
  const double m = o.block_size.value_or(10.0);
  if (!(m > 0.0)) throw ValidationError("--block-size must be positive");
  cfg["block_size"] = m;
  cfg["block_regime"] = "irregular";
  return IrregularBlocks{m};
}

json common_config(const CommonOpts& o, const std::vector<Kernel>& kernels) {
  json cfg;
  cfg["input"] = o.input;
  cfg["kernels"] = kernels_to_json(kernels);
  cfg["method"] = o.method;
  cfg["alpha"] = o.alpha;
  cfg["centered"] = !o.uncentered;
  cfg["renormalized"] = !o.unnormalized;
  cfg["allow_ball"] = o.allow_ball;
  if (is_bootstrap(o.method)) {
    cfg["replicates"] = o.replicates;
    cfg["seed"] = o.seed;
    cfg["workers"] = resolve_workers(o.workers);
  }
  if (!o.latent_out.empty()) cfg["latent_out"] = o.latent_out;
  if (!o.out.empty()) cfg["out"] = o.out;
  return cfg;
}

TestOptions make_test_options(const CommonOpts& o) {
  TestOptions opt;
  opt.centered = !o.uncentered;
  opt.unnormalized = o.unnormalized;
  opt.allow_ball = o.allow_ball;
  return opt;
}

BootstrapSpec make_bootstrap_spec(const CommonOpts& o, const SpatialMode& spatial,
                                  std::uint64_t seed) {
  BootstrapSpec spec;
  spec.replicates = o.replicates;
  spec.noise_mode =
      (o.method == "param" || o.method == "sp-param") ? NoiseMode::Parametric : NoiseMode::Permute;
  spec.spatial = spatial;
  spec.seed = seed;
  return spec;
}

int run_simulate(const std::string& out, int edge, const std::string& pattern,
                 const std::string& signals_text, int noise, std::uint64_t seed) {
  if (out.empty()) throw ValidationError("--out is required");
  CoordPattern pat;
  if (pattern == "uniform") {
    pat = CoordPattern::Uniform;
  } else if (pattern == "skewed") {
    pat = CoordPattern::BetaSkewed;
  } else if (pattern == "grid") {
    pat = CoordPattern::Grid;
  } else {
    throw ValidationError("--pattern must be uniform, skewed, or grid");
  }

  LatentModel model;
  model.signals = parse_signals(signals_text);
  model.noise_count = noise;
  if (noise < 0) throw ValidationError("--noise must be >= 0");
  if (model.p() < 1) throw ValidationError("model needs at least one channel");

  Rng coord_rng = Rng::stream(seed, 0);
  LocationSet loc = gen_coords(pat, edge, coord_rng);
  FieldSampler sampler(loc, model);
  Rng field_rng = Rng::stream(seed, 1);
  SpatialSample sample = sampler.draw(field_rng);
  write_csv(out, sample);

  json cfg;
  cfg["out"] = out;
  cfg["edge"] = edge;
  cfg["pattern"] = pattern;
  json sig = json::array();
  for (const MaternParams& mp : model.signals) {
    json s;
    s["nu"] = mp.nu;
    s["phi"] = mp.phi;
    sig.push_back(s);
  }
  cfg["signals"] = sig;
  cfg["noise"] = noise;
  cfg["seed"] = seed;
  cfg["mixing"] = "identity";

  json j;
  j["schema_version"] = 1;
  j["command"] = "simulate";
  j["config"] = cfg;
  j["data"] = data_summary(sample.loc, sample.p());
  emit(j, out + ".meta.json");
  return 0;
}

int run_scatter(const CommonOpts& o, const std::string& csv_out) {
  LoadedSample loaded = read_csv(o.input);
  std::vector<Kernel> kernels = parse_kernel_list(o.kernels);

  json result;
  json mats = json::array();
  std::ofstream csv;
  if (!csv_out.empty()) {
    csv.open(csv_out, std::ios::binary);
    if (!csv) throw ValidationError(csv_out + ": cannot open file for writing");
    csv << "kernel,row,col,value\n";
  }
  for (const Kernel& k : kernels) {
    ScatterMatrix sm = scatter(loaded.sample, k, !o.uncentered);
    json entry;
    entry["kernel"] = k.spec_string();
    entry["normalization"] = sm.normalization;
    entry["matrix"] = matrix_to_json(sm.m);
    mats.push_back(entry);
    if (csv.is_open()) {
      for (Index a = 0; a < sm.m.rows(); ++a) {
        for (Index b = 0; b < sm.m.cols(); ++b) {
          csv << k.spec_string() << ',' << a << ',' << b << ','
              << sbss::detail::format_double(sm.m(a, b)) << '\n';
        }
      }
    }
  }
  result["matrices"] = mats;

  json cfg;
  cfg["input"] = o.input;
  cfg["kernels"] = kernels_to_json(kernels);
  cfg["centered"] = !o.uncentered;
  if (!csv_out.empty()) cfg["csv_out"] = csv_out;
  if (!o.out.empty()) cfg["out"] = o.out;

  json j;
  j["schema_version"] = 1;
  j["command"] = "scatter";
  j["config"] = cfg;
  j["data"] = data_summary(loaded.sample.loc, loaded.sample.p());
  j["result"] = result;
  emit(j, o.out);
  return 0;
}

int run_test(const CLI::App* cmd, const CommonOpts& o, int r) {
  check_bootstrap_flags(cmd, o);
  LoadedSample loaded = read_csv(o.input);
  const SpatialSample& sample = loaded.sample;
  KernelSet kernels = KernelSet::make(parse_kernel_list(o.kernels));
  TestOptions opt = make_test_options(o);

  json cfg = common_config(o, kernels.kernels);
  cfg["r"] = r;
  SpatialMode spatial = resolve_spatial(o, sample.loc, cfg);

  TestResult res;
  if (o.method == "asym") {
    res = asymptotic_test(sample, kernels, r, opt);
  } else {
    res = bootstrap_test(sample, kernels, r, make_bootstrap_spec(o, spatial, o.seed), opt,
                         resolve_workers(o.workers));
  }

  if (!o.latent_out.empty()) {
    SbssSolution sol = fit(sample, kernels, {!o.uncentered, !o.unnormalized, {}});
    write_latent_csv(o.latent_out, sample.loc, sol.latent);
  }

  json j;
  j["schema_version"] = 1;
  j["command"] = "test";
  j["config"] = cfg;
  j["data"] = data_summary(sample.loc, sample.p());
  j["result"] = test_result_json(res, o.alpha);
  emit(j, o.out);
  return 0;
}

int run_estimate(const CLI::App* cmd, const CommonOpts& o, const std::string& strategy,
                 bool include_zero, std::optional<double> c_n) {
  check_bootstrap_flags(cmd, o);
  if (strategy != "divide-conquer" && strategy != "forward" && strategy != "threshold") {
    throw ValidationError("--strategy must be divide-conquer, forward, or threshold");
  }
  if (strategy == "threshold" && is_bootstrap(o.method)) {
    throw ValidationError("the threshold strategy uses the statistic directly; pair it with --method asym");
  }
  if (c_n && strategy != "threshold") {
    throw ValidationError("--c-n applies to the threshold strategy only");
  }
  if (c_n && !(*c_n > 0.0)) throw ValidationError("--c-n must be positive");

  LoadedSample loaded = read_csv(o.input);
  const SpatialSample& sample = loaded.sample;
  KernelSet kernels = KernelSet::make(parse_kernel_list(o.kernels));
  TestOptions opt = make_test_options(o);
  const int p = static_cast<int>(sample.p());

  json cfg = common_config(o, kernels.kernels);
  cfg["strategy"] = strategy;
  cfg["include_zero"] = include_zero;
  SpatialMode spatial = resolve_spatial(o, sample.loc, cfg);

  FitOptions fopt{!o.uncentered, !o.unnormalized, {}};
  EstimateResult res;
  SbssSolution sol;
  bool have_sol = false;
  if (o.method == "asym" || strategy == "threshold" || !o.latent_out.empty()) {
    detail::check_test_kernels(kernels, o.allow_ball);
    sol = fit(sample, kernels, fopt);
    have_sol = true;
  }

  if (strategy == "threshold") {
    if (p < 2) throw ValidationError("the threshold strategy needs p >= 2");
    std::vector<double> stats;
    for (int r = 1; r < p; ++r) stats.push_back(statistic(sol, r));
    std::vector<double> thresholds;
    std::string criterion;
    if (c_n) {
      thresholds.assign(stats.size(), *c_n);
      criterion = "c_n=" + sbss::detail::format_double(*c_n);
      cfg["c_n"] = *c_n;
    } else {
      thresholds = default_thresholds(p, kernels.k(), o.alpha);
      criterion = "chi2 quantile, " + sbss::detail::format_alpha(o.alpha);
    }
    res = threshold_estimate_result(stats, thresholds, criterion);
  } else {
    std::function<double(int)> test_fn;
    if (o.method == "asym") {
      test_fn = [&](int r) { return asymptotic_test(sol, kernels, r).p_value; };
    } else {
      test_fn = [&](int r) {
        BootstrapSpec spec = make_bootstrap_spec(o, spatial, derive_seed(o.seed, static_cast<std::uint64_t>(r)));
        return bootstrap_test(sample, kernels, r, spec, opt, resolve_workers(o.workers)).p_value;
      };
    }
    res = strategy == "forward" ? forward_estimate(test_fn, p, o.alpha, include_zero)
                                : divide_conquer(test_fn, p, o.alpha, include_zero);
  }

  if (!o.latent_out.empty() && have_sol) {
    write_latent_csv(o.latent_out, sample.loc, sol.latent);
  }

  json result;
  result["q_hat"] = res.q_hat;
  result["strategy"] = res.strategy;
  result["criterion"] = res.criterion;
  result["trace"] = trace_json(res);

  json j;
  j["schema_version"] = 1;
  j["command"] = "estimate";
  j["config"] = cfg;
  j["data"] = data_summary(sample.loc, sample.p());
  j["result"] = result;
  emit(j, o.out);
  return 0;
}

int run_variogram(const std::string& input, const std::string& column, const std::string& edges,
                  std::optional<double> max_h, int n_bins, const std::string& out,
                  const std::string& csv_out) {
  LoadedSample loaded = read_csv(input);
  const SpatialSample& sample = loaded.sample;

  Index col = 0;
  if (!column.empty()) {
    auto it = std::find(loaded.value_names.begin(), loaded.value_names.end(), column);
    if (it == loaded.value_names.end()) {
      throw ValidationError(input + ": no value column named '" + column + "'");
    }
    col = static_cast<Index>(it - loaded.value_names.begin());
  }

  std::vector<VariogramBin> bins;
  if (!edges.empty()) {
    if (max_h) throw ValidationError("give either --edges or --max-h, not both");
    std::vector<double> e;
    const std::string what = "bin edges '" + edges + "'";
    for (const std::string& tok : sbss::detail::split(edges, ',')) {
      e.push_back(sbss::detail::parse_double(tok, what));
    }
    if (e.size() < 2) throw ValidationError(what + ": need at least two edges");
    for (std::size_t i = 1; i < e.size(); ++i) {
      if (!(e[i] > e[i - 1])) throw ValidationError(what + ": edges must increase");
      bins.push_back({e[i - 1], e[i]});
    }
  } else {
    if (n_bins < 1) throw ValidationError("--bins must be >= 1");
    double h_max;
    if (max_h) {
      h_max = *max_h;
      if (!(h_max > 0.0)) throw ValidationError("--max-h must be positive");
    } else {
      const Matrix& c = sample.loc.coords();
      h_max = 0.5 * (c.colwise().maxCoeff() - c.colwise().minCoeff()).norm();
      if (!(h_max > 0.0)) throw ValidationError("degenerate domain: give --max-h explicitly");
    }
    for (int b = 0; b < n_bins; ++b) {
      bins.push_back({h_max * b / n_bins, h_max * (b + 1) / n_bins});
    }
  }

  std::vector<VariogramPoint> pts =
      empirical_variogram(sample.values.col(col), sample.loc, bins);

  json arr = json::array();
  for (std::size_t b = 0; b < pts.size(); ++b) {
    json e;
    e["h_lo"] = bins[b].lo;
    e["h_hi"] = bins[b].hi;
    e["h_mid"] = pts[b].h_mid;
    e["gamma"] = pts[b].gamma;
    e["pair_count"] = pts[b].pair_count;
    arr.push_back(e);
  }
  if (!csv_out.empty()) {
    std::ofstream csv(csv_out, std::ios::binary);
    if (!csv) throw ValidationError(csv_out + ": cannot open file for writing");
    csv << "h_lo,h_hi,h_mid,gamma,pair_count\n";
    for (std::size_t b = 0; b < pts.size(); ++b) {
      csv << sbss::detail::format_double(bins[b].lo) << ','
          << sbss::detail::format_double(bins[b].hi) << ','
          << sbss::detail::format_double(pts[b].h_mid) << ','
          << sbss::detail::format_double(pts[b].gamma) << ',' << pts[b].pair_count << '\n';
    }
  }

  json cfg;
  cfg["input"] = input;
  cfg["column"] = loaded.value_names[static_cast<std::size_t>(col)];
  if (!csv_out.empty()) cfg["csv_out"] = csv_out;
  if (!out.empty()) cfg["out"] = out;

  json j;
  j["schema_version"] = 1;
  j["command"] = "variogram";
  j["config"] = cfg;
  j["data"] = data_summary(sample.loc, sample.p());
  j["result"]["bins"] = arr;
  emit(j, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial blind source separation: dimension tests and estimation"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw a Matern signal + noise sample");
  std::string sim_out;
  int sim_edge = 30;
  std::string sim_pattern = "uniform";
  std::string sim_signals = "3:2,2:1.5,1:1";
  int sim_noise = 2;
  std::uint64_t sim_seed = 0;
  sim->add_option("--out", sim_out, "output CSV path")->required();
  sim->add_option("--edge", sim_edge, "domain edge length (default 30)");
  sim->add_option("--pattern", sim_pattern, "uniform | skewed | grid")
      ->check(CLI::IsMember({"uniform", "skewed", "grid"}));
  sim->add_option("--signals", sim_signals, "Matern channels as nu:phi[,nu:phi...]");
  sim->add_option("--noise", sim_noise, "white noise channel count");
  sim->add_option("--seed", sim_seed, "RNG seed");

  // scatter
  auto* sca = app.add_subcommand("scatter", "local covariance matrices per kernel");
  CommonOpts sca_o;
  std::string sca_csv_out;
  sca->add_option("--input", sca_o.input, "input CSV")->required();
  sca->add_option("--kernels", sca_o.kernels, "kernel specs (f0, ring:r1:r2, ball:r, lag:m:h)")
      ->required();
  sca->add_flag("--uncentered", sca_o.uncentered, "skip empirical centering");
  sca->add_option("--out", sca_o.out, "also write the JSON result to this path");
  sca->add_option("--csv-out", sca_csv_out, "long-format CSV of the matrices");

  // test
  auto* tst = app.add_subcommand("test", "test H0r: exactly p-r white noise channels");
  CommonOpts tst_o;
  int tst_r = 0;
  tst->add_option("--r", tst_r, "hypothesized signal dimension r")->required();
  add_common(tst, tst_o);

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate the signal dimension");
  CommonOpts est_o;
  std::string est_strategy = "divide-conquer";
  bool est_include_zero = false;
  std::optional<double> est_cn;
  est->add_option("--strategy", est_strategy, "divide-conquer | forward | threshold")
      ->check(CLI::IsMember({"divide-conquer", "forward", "threshold"}));
  est->add_flag("--include-zero", est_include_zero, "allow q_hat = 0 (test r = 0 too)");
  est->add_option("--c-n", est_cn, "constant threshold for the threshold strategy");
  add_common(est, est_o);

  // variogram
  auto* vgr = app.add_subcommand("variogram", "empirical variogram of one value column");
  std::string vgr_input, vgr_column, vgr_edges, vgr_out, vgr_csv_out;
  std::optional<double> vgr_max_h;
  int vgr_bins = 15;
  vgr->add_option("--input", vgr_input, "input CSV")->required();
  vgr->add_option("--column", vgr_column, "value column name (default: first)");
  vgr->add_option("--edges", vgr_edges, "explicit bin edges, e.g. 0,1,2,4");
  vgr->add_option("--max-h", vgr_max_h, "equal-width bins on (0, max-h]");
  vgr->add_option("--bins", vgr_bins, "bin count for --max-h mode (default 15)");
  vgr->add_option("--out", vgr_out, "also write the JSON result to this path");
  vgr->add_option("--csv-out", vgr_csv_out, "CSV of the binned variogram");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      return run_simulate(sim_out, sim_edge, sim_pattern, sim_signals, sim_noise, sim_seed);
    }
    if (sca->parsed()) return run_scatter(sca_o, sca_csv_out);
    if (tst->parsed()) return run_test(tst, tst_o, tst_r);
    if (est->parsed()) return run_estimate(est, est_o, est_strategy, est_include_zero, est_cn);
    if (vgr->parsed()) return run_variogram(vgr_input, vgr_column, vgr_edges, vgr_max_h,
                                            vgr_bins, vgr_out, vgr_csv_out);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const RankOutOfRange& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const OverlappingKernelSupports& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NoDonorBlocks& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NotRegular& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
