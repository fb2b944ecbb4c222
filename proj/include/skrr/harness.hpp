#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "skrr/kernel.hpp"
#include "skrr/rng.hpp"
#include "skrr/sketch.hpp"
#include "skrr/solver.hpp"
#include "skrr/spectral.hpp"
#include "skrr/synthdata.hpp"

namespace skrr {

/// Configuration problems (bad JSON, invalid fields, mismatched
/// experiment); the CLI maps these to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Power-law schedule value(n) = coef * n^exponent, the form every
/// kernel/lambda/d schedule in the experiments takes.
struct Schedule {
  double coef = 1.0;
  double exponent = 0.0;

  double at(Index n) const {
    return coef * std::pow(static_cast<double>(n), exponent);
  }
  Index at_floor(Index n) const {
    return std::max<Index>(1, static_cast<Index>(std::floor(at(n))));
  }
};

struct KernelSchedule {
  KernelFamily family = KernelFamily::gaussian;
  Schedule scale;           // bandwidth (gaussian) or lengthscale (matern)
  double smoothness = 1.5;  // matern only

  KernelSpec at(Index n) const {
    return family == KernelFamily::gaussian
               ? KernelSpec::gaussian(scale.at(n))
               : KernelSpec::matern(smoothness, scale.at(n));
  }
};

enum class MethodKind {
  exact,
  nystrom,
  accumulation,
  gaussian,
  sparse_projection,
  leverage_nystrom,
  identity
};

inline const char* method_name(MethodKind kind) {
  switch (kind) {
    case MethodKind::exact: return "exact";
    case MethodKind::nystrom: return "nystrom";
    case MethodKind::accumulation: return "accumulation";
    case MethodKind::gaussian: return "gaussian";
    case MethodKind::sparse_projection: return "sparse_projection";
    case MethodKind::leverage_nystrom: return "leverage_nystrom";
    case MethodKind::identity: return "identity";
  }
  return "?";
}

struct MethodSpec {
  MethodKind kind = MethodKind::nystrom;
  int m = 1;            // accumulation rounds (nystrom/leverage fix m = 1)
  double sparse_s = 0;  // sparse projection density; 0 means default sqrt(n)
};

enum class ExperimentKind { approx_error, tradeoff, diagnose, bench_products };

inline const char* experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::approx_error: return "approx_error";
    case ExperimentKind::tradeoff: return "tradeoff";
    case ExperimentKind::diagnose: return "diagnose";
    case ExperimentKind::bench_products: return "bench_products";
  }
  return "?";
}

struct DatasetConfig {
  std::string path;
  std::string target;
};

struct BlockInstanceConfig {
  Index n = 64;
  Index dense_size = 4;
  double dense_variance = 8.0;
  double dense_corr = 0.5;
  double anchor_mass = 0.0;
};

struct DiagnoseConfig {
  Schedule delta{0.03125, 0.0};
  std::vector<std::pair<Index, int>> dm_pairs;
  int seeds = 200;
  std::string instance = "block";  // "block" or "bimodal"
  BlockInstanceConfig block;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::approx_error;
  std::vector<Index> n_list;
  std::vector<MethodSpec> methods;
  KernelSchedule kernel;
  Schedule lambda{0.5, -4.0 / 7.0};
  Schedule d{1.5, 3.0 / 7.0};
  double gamma = 0.6;
  double noise_sd = 0.5;
  int replicates = 30;
  std::uint64_t master_seed = 0;
  double test_fraction = 0.2;
  std::optional<DatasetConfig> dataset;
  DiagnoseConfig diagnose;
  int threads = 1;
};

/// One replicate's measurements. Optional fields stay empty when a value
/// does not apply to the method/experiment or when the replicate failed.
struct ExperimentRecord {
  std::string experiment;
  std::string dataset;
  Index n = 0;
  std::string method;
  int m = 0;  // 0 = no accumulation count (dense sketches, exact)
  Index d = 0;
  int replicate_index = 0;
  std::uint64_t seed = 0;
  std::optional<double> approx_error;
  std::optional<double> estimation_error;
  std::optional<double> test_mse;
  double sketch_time_ms = 0.0;
  double fit_time_ms = 0.0;
  double predict_time_ms = 0.0;
};

struct DiagnoseRecord {
  std::string instance;
  Index n = 0;
  int replicate_index = 0;
  double delta = 0.0;
  Index d_delta = 0;
  double d_stat = 0.0;
  std::optional<double> m_uniform;
  std::optional<double> m_leverage;
  Index d = 0;
  int m = 0;
  int seeds = 0;
  double cond1_rate = 0.0;
  double cond2_rate = 0.0;
  double pass_rate = 0.0;
};

struct BenchRecord {
  Index n = 0;
  Index d = 0;
  int m = 0;
  int replicate_index = 0;
  double structured_ks_ms = 0.0;
  double dense_ks_ms = 0.0;
  double structured_stks_ms = 0.0;
  double dense_stks_ms = 0.0;
};

// ---------------------------------------------------------------------------
// Seed derivation
// ---------------------------------------------------------------------------

inline int method_id(MethodKind kind) { return static_cast<int>(kind); }

/// Seed for the data of one replicate: shared by every method so that all
/// sketches of a replicate compete on identical (X, Y, K).
inline std::uint64_t data_seed(const ExperimentConfig& cfg, Index n, int rep) {
  std::uint64_t h = cfg.master_seed;
  h = mix64(h, hash_label("data"));
  h = mix64(h, hash_label(experiment_name(cfg.experiment)));
  h = mix64(h, static_cast<std::uint64_t>(n));
  h = mix64(h, static_cast<std::uint64_t>(rep));
  return h;
}

/// Seed for one (method, replicate) sketch draw; this value lands in the
/// record's seed column.
inline std::uint64_t sketch_seed(const ExperimentConfig& cfg, Index n,
                                 const MethodSpec& method, int rep) {
  std::uint64_t h = cfg.master_seed;
  h = mix64(h, hash_label("sketch"));
  h = mix64(h, hash_label(experiment_name(cfg.experiment)));
  h = mix64(h, static_cast<std::uint64_t>(n));
  h = mix64(h, static_cast<std::uint64_t>(method_id(method.kind)));
  h = mix64(h, static_cast<std::uint64_t>(method.m));
  h = mix64(h, static_cast<std::uint64_t>(rep));
  return h;
}

inline std::uint64_t satisfiability_seed(const ExperimentConfig& cfg, Index n,
                                         Index d, int m, int trial) {
  std::uint64_t h = cfg.master_seed;
  h = mix64(h, hash_label("satisfiability"));
  h = mix64(h, static_cast<std::uint64_t>(n));
  h = mix64(h, static_cast<std::uint64_t>(d));
  h = mix64(h, static_cast<std::uint64_t>(m));
  h = mix64(h, static_cast<std::uint64_t>(trial));
  return h;
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline Schedule parse_schedule(const json& j, const char* what) {
  if (!j.is_object() || !j.contains("coef") || !j.contains("exp"))
    throw ConfigError(std::string(what) + ": expected {\"coef\": c, \"exp\": e}");
  Schedule s;
  s.coef = j.at("coef").get<double>();
  s.exponent = j.at("exp").get<double>();
  if (!(s.coef > 0.0) || !std::isfinite(s.coef) || !std::isfinite(s.exponent))
    throw ConfigError(std::string(what) + ": coef must be positive and finite");
  return s;
}

inline MethodSpec parse_method(const json& j) {
  if (!j.is_object() || !j.contains("name"))
    throw ConfigError("methods: expected objects with a \"name\" field");
  const std::string name = j.at("name").get<std::string>();
  MethodSpec spec;
  if (name == "nystrom") {
    spec.kind = MethodKind::nystrom;
  } else if (name == "accumulation") {
    spec.kind = MethodKind::accumulation;
    spec.m = j.value("m", 1);
    if (spec.m < 1) throw ConfigError("accumulation: m must be >= 1");
  } else if (name == "gaussian") {
    spec.kind = MethodKind::gaussian;
  } else if (name == "sparse_projection") {
    spec.kind = MethodKind::sparse_projection;
    spec.sparse_s = j.value("s", 0.0);
  } else if (name == "leverage_nystrom") {
    spec.kind = MethodKind::leverage_nystrom;
  } else if (name == "identity") {
    spec.kind = MethodKind::identity;
  } else {
    throw ConfigError("methods: unknown method '" + name + "'");
  }
  return spec;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::parse_method;
  using detail::parse_schedule;
  try {
    ExperimentConfig cfg;
    const std::string exp = j.value("experiment", "approx_error");
    if (exp == "approx_error")
      cfg.experiment = ExperimentKind::approx_error;
    else if (exp == "tradeoff")
      cfg.experiment = ExperimentKind::tradeoff;
    else if (exp == "diagnose")
      cfg.experiment = ExperimentKind::diagnose;
    else if (exp == "bench_products")
      cfg.experiment = ExperimentKind::bench_products;
    else
      throw ConfigError("unknown experiment '" + exp + "'");

    for (const auto& v : j.value("n_list", nlohmann::json::array()))
      cfg.n_list.push_back(v.get<Index>());
    for (const auto& v : j.value("methods", nlohmann::json::array()))
      cfg.methods.push_back(parse_method(v));

    if (j.contains("kernel")) {
      const auto& k = j.at("kernel");
      const std::string family = k.value("family", "gaussian");
      if (family == "gaussian")
        cfg.kernel.family = KernelFamily::gaussian;
      else if (family == "matern")
        cfg.kernel.family = KernelFamily::matern;
      else
        throw ConfigError("kernel: unknown family '" + family + "'");
      if (k.contains("scale")) cfg.kernel.scale = parse_schedule(k.at("scale"), "kernel.scale");
      cfg.kernel.smoothness = k.value("smoothness", 1.5);
    }
    if (j.contains("lambda")) cfg.lambda = parse_schedule(j.at("lambda"), "lambda");
    if (j.contains("d")) cfg.d = parse_schedule(j.at("d"), "d");
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.noise_sd = j.value("noise_sd", cfg.noise_sd);
    cfg.replicates = j.value("replicates", cfg.replicates);
    cfg.master_seed = j.value("master_seed", std::uint64_t{0});
    cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
    cfg.threads = j.value("threads", 1);
    if (j.contains("dataset")) {
      DatasetConfig ds;
      ds.path = j.at("dataset").value("path", "");
      ds.target = j.at("dataset").value("target", "");
      if (ds.path.empty() || ds.target.empty())
        throw ConfigError("dataset: needs both path and target");
      cfg.dataset = ds;
    }
    if (j.contains("diagnose")) {
      const auto& d = j.at("diagnose");
      if (d.contains("delta")) cfg.diagnose.delta = parse_schedule(d.at("delta"), "diagnose.delta");
      cfg.diagnose.seeds = d.value("seeds", cfg.diagnose.seeds);
      cfg.diagnose.instance = d.value("instance", cfg.diagnose.instance);
      if (cfg.diagnose.instance != "block" && cfg.diagnose.instance != "bimodal")
        throw ConfigError("diagnose.instance must be 'block' or 'bimodal'");
      for (const auto& p : d.value("pairs", nlohmann::json::array())) {
        if (!p.is_array() || p.size() != 2)
          throw ConfigError("diagnose.pairs: expected [d, m] pairs");
        cfg.diagnose.dm_pairs.emplace_back(p[0].get<Index>(), p[1].get<int>());
      }
      if (d.contains("block")) {
        const auto& b = d.at("block");
        cfg.diagnose.block.n = b.value("n", cfg.diagnose.block.n);
        cfg.diagnose.block.dense_size = b.value("dense_size", cfg.diagnose.block.dense_size);
        cfg.diagnose.block.dense_variance = b.value("dense_variance", cfg.diagnose.block.dense_variance);
        cfg.diagnose.block.dense_corr = b.value("dense_corr", cfg.diagnose.block.dense_corr);
        cfg.diagnose.block.anchor_mass = b.value("anchor_mass", cfg.diagnose.block.anchor_mass);
      }
    }

    if (cfg.replicates < 1) throw ConfigError("replicates must be >= 1");
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    if (!(cfg.test_fraction > 0.0) || !(cfg.test_fraction < 1.0))
      throw ConfigError("test_fraction must be in (0, 1)");
    if (cfg.experiment != ExperimentKind::diagnose && cfg.n_list.empty())
      throw ConfigError("n_list must not be empty");
    const bool needs_methods = cfg.experiment == ExperimentKind::approx_error ||
                               cfg.experiment == ExperimentKind::tradeoff;
    if (needs_methods && cfg.methods.empty())
      throw ConfigError("methods must not be empty");
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

inline std::string csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string csv_opt(const std::optional<double>& v) {
  return v ? csv_double(*v) : std::string();
}

/// Splits one CSV line honoring double-quote escaping.
inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cell);
      cell.clear();
    } else {
      cell += ch;
    }
  }
  out.push_back(cell);
  return out;
}

}  // namespace detail

inline constexpr const char* kRecordCsvHeader =
    "experiment,dataset,n,method,m,d,replicate_index,seed,approx_error,"
    "estimation_error,test_mse,sketch_time_ms,fit_time_ms,predict_time_ms";

inline void emit_csv(const std::vector<ExperimentRecord>& records,
                     std::ostream& out) {
  out << kRecordCsvHeader << "\n";
  for (const auto& r : records) {
    out << detail::csv_quote(r.experiment) << ',' << detail::csv_quote(r.dataset)
        << ',' << r.n << ',' << detail::csv_quote(r.method) << ',' << r.m << ','
        << r.d << ',' << r.replicate_index << ',' << r.seed << ','
        << detail::csv_opt(r.approx_error) << ','
        << detail::csv_opt(r.estimation_error) << ','
        << detail::csv_opt(r.test_mse) << ','
        << detail::csv_double(r.sketch_time_ms) << ','
        << detail::csv_double(r.fit_time_ms) << ','
        << detail::csv_double(r.predict_time_ms) << "\n";
  }
}

inline void emit_csv(const std::vector<ExperimentRecord>& records,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF line endings
  if (!out) throw std::runtime_error("emit_csv: cannot write " + path);
  emit_csv(records, out);
  if (!out) throw std::runtime_error("emit_csv: write failed for " + path);
}

/// Reads back a record CSV produced by emit_csv; numeric fields round-trip
/// exactly thanks to the %.17g formatting.
inline std::vector<ExperimentRecord> parse_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("parse_records_csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRecordCsvHeader)
    throw std::runtime_error("parse_records_csv: unexpected header");
  std::vector<ExperimentRecord> records;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::csv_split(line);
    if (cells.size() != 14)
      throw std::runtime_error("parse_records_csv: bad row");
    ExperimentRecord r;
    r.experiment = cells[0];
    r.dataset = cells[1];
    r.n = std::stoll(cells[2]);
    r.method = cells[3];
    r.m = std::stoi(cells[4]);
    r.d = std::stoll(cells[5]);
    r.replicate_index = std::stoi(cells[6]);
    r.seed = std::stoull(cells[7]);
    auto opt = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    r.approx_error = opt(cells[8]);
    r.estimation_error = opt(cells[9]);
    r.test_mse = opt(cells[10]);
    r.sketch_time_ms = std::stod(cells[11]);
    r.fit_time_ms = std::stod(cells[12]);
    r.predict_time_ms = std::stod(cells[13]);
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<ExperimentRecord> parse_records_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("parse_records_csv: cannot open " + path);
  return parse_records_csv(in);
}

inline void emit_diagnose_csv(const std::vector<DiagnoseRecord>& records,
                              std::ostream& out) {
  out << "experiment,instance,n,replicate_index,delta,d_delta,d_stat,"
         "m_uniform,m_leverage,d,m,seeds,cond1_rate,cond2_rate,pass_rate\n";
  for (const auto& r : records) {
    out << "diagnose," << detail::csv_quote(r.instance) << ',' << r.n << ','
        << r.replicate_index << ',' << detail::csv_double(r.delta) << ','
        << r.d_delta << ',' << detail::csv_double(r.d_stat) << ','
        << detail::csv_opt(r.m_uniform) << ',' << detail::csv_opt(r.m_leverage)
        << ',' << r.d << ',' << r.m << ',' << r.seeds << ','
        << detail::csv_double(r.cond1_rate) << ','
        << detail::csv_double(r.cond2_rate) << ','
        << detail::csv_double(r.pass_rate) << "\n";
  }
}

inline void emit_bench_csv(const std::vector<BenchRecord>& records,
                           std::ostream& out) {
  out << "experiment,n,d,m,replicate_index,structured_ks_ms,dense_ks_ms,"
         "structured_stks_ms,dense_stks_ms\n";
  for (const auto& r : records) {
    out << "bench_products," << r.n << ',' << r.d << ',' << r.m << ','
        << r.replicate_index << ',' << detail::csv_double(r.structured_ks_ms)
        << ',' << detail::csv_double(r.dense_ks_ms) << ','
        << detail::csv_double(r.structured_stks_ms) << ','
        << detail::csv_double(r.dense_stks_ms) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Experiment runners
// ---------------------------------------------------------------------------

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Runs fn(i) for i in [0, count) on `threads` workers. Tasks own disjoint
/// output slots, so results are independent of the thread count.
template <typename Fn>
inline void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

/// Builds the sketch a MethodSpec asks for. `profile` supplies leverage
/// scores for leverage_nystrom and may be empty for the other methods.
inline SketchMatrix build_method_sketch(const MethodSpec& method, Index n,
                                        Index d, double lambda,
                                        const SpectralProfile* profile,
                                        RngStream& rng) {
  switch (method.kind) {
    case MethodKind::nystrom:
      return build_accumulation(n, d, 1, uniform_distribution(n), rng);
    case MethodKind::accumulation:
      return build_accumulation(n, d, method.m, uniform_distribution(n), rng);
    case MethodKind::gaussian:
      return build_gaussian(n, d, rng);
    case MethodKind::sparse_projection: {
      const double s = method.sparse_s > 0.0
                           ? method.sparse_s
                           : std::sqrt(static_cast<double>(n));
      return build_sparse_projection(n, d, s, rng);
    }
    case MethodKind::leverage_nystrom: {
      if (profile == nullptr)
        throw std::runtime_error("leverage_nystrom: missing spectral profile");
      return build_accumulation(
          n, d, 1, leverage_distribution(leverage_scores(*profile, lambda)),
          rng);
    }
    case MethodKind::identity:
      return build_identity(n);
    default:
      throw std::runtime_error("build_method_sketch: unsupported method");
  }
}

inline bool wants_leverage(const std::vector<MethodSpec>& methods) {
  for (const auto& m : methods)
    if (m.kind == MethodKind::leverage_nystrom) return true;
  return false;
}

}  // namespace detail

/// Approximation-error experiment: per (n, replicate) generates bimodal
/// data, fits the exact estimator once, then each configured sketching
/// method on the same data, and records the in-sample gaps against the
/// exact fit (approx_error) and against f* (estimation_error). Exceptions
/// in a single (method, replicate) leave that record's error fields empty.
inline std::vector<ExperimentRecord> run_approx_error(
    const ExperimentConfig& cfg) {
  if (cfg.experiment != ExperimentKind::approx_error)
    throw ConfigError("run_approx_error: wrong experiment kind");
  const int per_rep = static_cast<int>(cfg.methods.size()) + 1;  // + exact row
  std::vector<ExperimentRecord> records;

  for (const Index n : cfg.n_list) {
    const KernelSpec spec = cfg.kernel.at(n);
    const double lam = cfg.lambda.at(n);
    const Index d = cfg.d.at_floor(n);
    std::vector<ExperimentRecord> block(
        static_cast<std::size_t>(per_rep) * cfg.replicates);

    detail::parallel_for(cfg.replicates, cfg.threads, [&](int rep) {
      auto* row = &block[static_cast<std::size_t>(rep) * per_rep];
      auto base_record = [&](MethodKind kind, int m, Index dd) {
        ExperimentRecord r;
        r.experiment = experiment_name(cfg.experiment);
        r.dataset = "bimodal";
        r.n = n;
        r.method = method_name(kind);
        r.m = m;
        r.d = dd;
        r.replicate_index = rep;
        return r;
      };
      // prefill so a failed replicate still emits well-formed rows
      row[0] = base_record(MethodKind::exact, 0, 0);
      row[0].seed = data_seed(cfg, n, rep);
      for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const MethodSpec& method = cfg.methods[mi];
        row[1 + mi] = base_record(
            method.kind, method.kind == MethodKind::accumulation ? method.m
                         : method.kind == MethodKind::nystrom ||
                                 method.kind == MethodKind::leverage_nystrom
                             ? 1
                             : 0,
            method.kind == MethodKind::identity ? n : d);
        row[1 + mi].seed = sketch_seed(cfg, n, method, rep);
      }

      Matrix K;
      RegressionDataset ds;
      ExactFit exact;
      Vector f_n;
      try {
        RngStream data_rng(data_seed(cfg, n, rep));
        ds = make_dataset({n, cfg.gamma, 3}, cfg.noise_sd, data_rng);
        K = gram(spec, ds.X);
        auto t0 = detail::Clock::now();
        exact = fit_exact(K, ds.Y, lam, spec, ds.X);
        row[0].fit_time_ms = detail::ms_since(t0);
        t0 = detail::Clock::now();
        f_n = in_sample(exact, K);
        row[0].predict_time_ms = detail::ms_since(t0);
        row[0].approx_error = 0.0;
        row[0].estimation_error = empirical_sq_norm(f_n, ds.f_star);
      } catch (const std::exception&) {
        return;  // no exact baseline, leave the replicate's rows empty
      }

      std::optional<SpectralProfile> profile;
      if (detail::wants_leverage(cfg.methods)) {
        try {
          profile = decompose(K);
        } catch (const std::exception&) {
        }
      }

      for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const MethodSpec& method = cfg.methods[mi];
        ExperimentRecord& r = row[1 + mi];
        try {
          RngStream rng(r.seed);
          auto t0 = detail::Clock::now();
          const SketchMatrix S = detail::build_method_sketch(
              method, n, d, lam, profile ? &*profile : nullptr, rng);
          r.sketch_time_ms = detail::ms_since(t0);
          t0 = detail::Clock::now();
          const SketchedFit fit = fit_sketched(K, ds.Y, lam, S, spec, ds.X);
          r.fit_time_ms = detail::ms_since(t0);
          t0 = detail::Clock::now();
          const Vector f_s = in_sample(fit, K);
          r.predict_time_ms = detail::ms_since(t0);
          r.approx_error = empirical_sq_norm(f_s, f_n);
          r.estimation_error = empirical_sq_norm(f_s, ds.f_star);
        } catch (const std::exception&) {
          // failed method: error fields stay empty
        }
      }
    });
    records.insert(records.end(), std::make_move_iterator(block.begin()),
                   std::make_move_iterator(block.end()));
  }
  return records;
}

/// Accuracy/runtime trade-off on a CSV dataset (or the synthetic bimodal
/// fallback when no dataset is configured): per (n, replicate) draws a
/// train subset of size n and a held-out test split, fits every method and
/// records test MSE plus wall-clock timings.
inline std::vector<ExperimentRecord> run_tradeoff(const ExperimentConfig& cfg) {
  if (cfg.experiment != ExperimentKind::tradeoff)
    throw ConfigError("run_tradeoff: wrong experiment kind");

  std::optional<detail::RawCsv> raw;
  Index target = 0;
  std::string dataset_name = "bimodal";
  if (cfg.dataset) {
    raw = detail::read_numeric_csv(cfg.dataset->path);
    target = detail::resolve_target_column(raw->header, cfg.dataset->target);
    dataset_name = cfg.dataset->path;
  }

  // Per-replicate data: for CSV input, shuffle, hold out the test split and
  // take the next n rows as training data, scaling features by the training
  // subset's standard deviation; otherwise draw fresh bimodal train/test sets.
  auto build_split = [&](RngStream& data_rng, Index n, RegressionDataset& train,
                         RegressionDataset& test) {
    if (raw) {
      const Index nrow = raw->values.rows();
      const Index ncol = raw->values.cols();
      std::vector<Index> order(nrow);
      std::iota(order.begin(), order.end(), Index{0});
      for (Index i = nrow - 1; i > 0; --i) {
        const Index j = static_cast<Index>(data_rng.uniform01() *
                                           static_cast<double>(i + 1));
        std::swap(order[i], order[std::min(j, i)]);
      }
      const Index n_test = std::clamp<Index>(
          static_cast<Index>(std::llround(cfg.test_fraction *
                                          static_cast<double>(nrow))),
          1, nrow - 1);
      if (n > nrow - n_test)
        throw std::runtime_error("tradeoff: n exceeds available train rows");
      const Index nfeat = ncol - 1;
      auto fill = [&](RegressionDataset& ds, Index begin, Index count) {
        ds.X.resize(count, nfeat);
        ds.Y.resize(count);
        for (Index r = 0; r < count; ++r) {
          const Index src = order[begin + r];
          Index f = 0;
          for (Index c = 0; c < ncol; ++c) {
            if (c == target) continue;
            ds.X(r, f++) = raw->values(src, c);
          }
          ds.Y[r] = raw->values(src, target);
        }
        ds.f_star = ds.Y;
      };
      fill(test, 0, n_test);
      fill(train, n_test, n);
      for (Index f = 0; f < nfeat; ++f) {
        const double mean = train.X.col(f).mean();
        const double var = (train.X.col(f).array() - mean).square().sum() /
                           static_cast<double>(std::max<Index>(n - 1, 1));
        if (!(var > 0.0))
          throw std::runtime_error("tradeoff: constant feature column");
        const double sd = std::sqrt(var);
        train.X.col(f) /= sd;
        test.X.col(f) /= sd;
      }
    } else {
      train = make_dataset({n, cfg.gamma, 3}, cfg.noise_sd, data_rng);
      const Index n_test = std::max<Index>(
          1, static_cast<Index>(std::llround(cfg.test_fraction *
                                             static_cast<double>(n))));
      test = make_dataset({n_test, cfg.gamma, 3}, cfg.noise_sd, data_rng);
    }
  };

  const int per_rep = static_cast<int>(cfg.methods.size());
  std::vector<ExperimentRecord> records;

  for (const Index n : cfg.n_list) {
    const KernelSpec spec = cfg.kernel.at(n);
    const double lam = cfg.lambda.at(n);
    const Index d = cfg.d.at_floor(n);
    std::vector<ExperimentRecord> block(
        static_cast<std::size_t>(per_rep) * cfg.replicates);

    detail::parallel_for(cfg.replicates, cfg.threads, [&](int rep) {
      auto* row = &block[static_cast<std::size_t>(rep) * per_rep];
      for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const MethodSpec& method = cfg.methods[mi];
        ExperimentRecord& r = row[mi];
        r.experiment = experiment_name(cfg.experiment);
        r.dataset = dataset_name;
        r.n = n;
        r.method = method_name(method.kind);
        r.m = method.kind == MethodKind::accumulation ? method.m
             : method.kind == MethodKind::nystrom ||
                     method.kind == MethodKind::leverage_nystrom
                 ? 1
                 : 0;
        r.d = method.kind == MethodKind::identity ? n : d;
        r.replicate_index = rep;
        r.seed = sketch_seed(cfg, n, method, rep);
      }

      RngStream data_rng(data_seed(cfg, n, rep));
      RegressionDataset train, test;
      try {
        build_split(data_rng, n, train, test);
      } catch (const std::exception&) {
        return;  // replicate rows stay empty
      }

      Matrix K;
      try {
        K = gram(spec, train.X);
      } catch (const std::exception&) {
        return;
      }
      std::optional<SpectralProfile> profile;
      if (detail::wants_leverage(cfg.methods)) {
        try {
          profile = decompose(K);
        } catch (const std::exception&) {
        }
      }

      for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const MethodSpec& method = cfg.methods[mi];
        ExperimentRecord& r = row[mi];
        try {
          RngStream rng(r.seed);
          auto t0 = detail::Clock::now();
          const SketchMatrix S = detail::build_method_sketch(
              method, n, d, lam, profile ? &*profile : nullptr, rng);
          r.sketch_time_ms = detail::ms_since(t0);
          t0 = detail::Clock::now();
          const SketchedFit fit = fit_sketched(K, train.Y, lam, S, spec, train.X);
          r.fit_time_ms = detail::ms_since(t0);
          t0 = detail::Clock::now();
          const Vector pred = predict_many(fit, test.X);
          r.predict_time_ms = detail::ms_since(t0);
          r.test_mse = empirical_sq_norm(pred, test.Y);
        } catch (const std::exception&) {
        }
      }
    });
    records.insert(records.end(), std::make_move_iterator(block.begin()),
                   std::make_move_iterator(block.end()));
  }
  return records;
}

/// Spectral diagnostics: effective rank, statistical dimension, incoherence
/// under uniform and leverage sampling, and Monte Carlo K-satisfiability
/// pass rates for each configured (d, m) pair.
inline std::vector<DiagnoseRecord> run_diagnose(const ExperimentConfig& cfg) {
  if (cfg.experiment != ExperimentKind::diagnose)
    throw ConfigError("run_diagnose: wrong experiment kind");
  const bool block_instance = cfg.diagnose.instance == "block";
  std::vector<DiagnoseRecord> records;

  const std::vector<Index> n_values =
      block_instance ? std::vector<Index>{cfg.diagnose.block.n} : cfg.n_list;
  const int reps = block_instance ? 1 : cfg.replicates;

  for (const Index n : n_values) {
    for (int rep = 0; rep < reps; ++rep) {
      Matrix K;
      if (block_instance) {
        const auto& b = cfg.diagnose.block;
        K = block_diagonal_instance(b.n, b.dense_size, b.dense_variance,
                                    b.dense_corr, b.anchor_mass);
      } else {
        RngStream data_rng(data_seed(cfg, n, rep));
        BimodalConfig bimodal{n, cfg.gamma, 3};
        K = gram(cfg.kernel.at(n), gen_bimodal(bimodal, data_rng));
      }
      const SpectralProfile profile = decompose(K);
      const double delta = cfg.diagnose.delta.at(n);

      DiagnoseRecord base;
      base.instance = cfg.diagnose.instance;
      base.n = n;
      base.replicate_index = rep;
      base.delta = delta;
      base.d_delta = d_delta(profile, delta);
      base.d_stat = statistical_dimension(profile, delta);
      base.m_uniform = incoherence(profile, delta, uniform_distribution(n));
      try {
        base.m_leverage = incoherence(
            profile, delta,
            leverage_distribution(leverage_scores(profile, delta)));
      } catch (const std::exception&) {
        // zero leverage rows leave the leverage column empty
      }

      if (cfg.diagnose.dm_pairs.empty()) {
        records.push_back(base);
        continue;
      }
      for (const auto& [d, m] : cfg.diagnose.dm_pairs) {
        DiagnoseRecord r = base;
        r.d = d;
        r.m = m;
        r.seeds = cfg.diagnose.seeds;
        int pass1 = 0, pass2 = 0, pass_both = 0;
        const SamplingDistribution P = uniform_distribution(n);
        for (int trial = 0; trial < cfg.diagnose.seeds; ++trial) {
          RngStream rng(satisfiability_seed(cfg, n, d, m, trial));
          const SketchMatrix S = build_accumulation(n, d, m, P, rng);
          const SatisfiabilityReport rep_out =
              check_k_satisfiability(S, profile, delta);
          pass1 += rep_out.pass1;
          pass2 += rep_out.pass2;
          pass_both += rep_out.pass();
        }
        const double total = static_cast<double>(cfg.diagnose.seeds);
        r.cond1_rate = pass1 / total;
        r.cond2_rate = pass2 / total;
        r.pass_rate = pass_both / total;
        records.push_back(std::move(r));
      }
    }
  }
  return records;
}

/// Times structured vs dense KS and S^T(KS) across n_list, after checking
/// the structured products against the dense oracle at 1e-10 relative
/// Frobenius error. One warm-up iteration per product is discarded.
inline std::vector<BenchRecord> bench_products(const ExperimentConfig& cfg) {
  if (cfg.experiment != ExperimentKind::bench_products)
    throw ConfigError("bench_products: wrong experiment kind");
  int m = 4;
  for (const auto& method : cfg.methods)
    if (method.kind == MethodKind::accumulation) m = method.m;
  std::vector<BenchRecord> records;

  for (const Index n : cfg.n_list) {
    const Index d = cfg.d.at_floor(n);
    RngStream data_rng(data_seed(cfg, n, 0));
    BimodalConfig bimodal{n, cfg.gamma, 3};
    const Matrix K = gram(cfg.kernel.at(n), gen_bimodal(bimodal, data_rng));

    RngStream sketch_rng(mix64(cfg.master_seed, hash_label("bench")));
    const SketchMatrix S =
        build_accumulation(n, d, m, uniform_distribution(n), sketch_rng);
    const Matrix S_dense = to_dense(S);

    const Matrix C = right_multiply(K, S);
    const Matrix C_oracle = K * S_dense;
    if ((C - C_oracle).norm() > 1e-10 * C_oracle.norm())
      throw std::runtime_error("bench_products: structured KS disagrees with dense");
    const Matrix B = transpose_apply(S, C);
    const Matrix B_oracle = S_dense.transpose() * C;
    if ((B - B_oracle).norm() > 1e-10 * B_oracle.norm())
      throw std::runtime_error("bench_products: structured StKS disagrees with dense");

    // warm-up (also touches K once so first timing does not pay page faults)
    (void)right_multiply(K, S);
    (void)(K * S_dense).eval();
    (void)transpose_apply(S, C);
    (void)(S_dense.transpose() * C).eval();

    for (int rep = 0; rep < cfg.replicates; ++rep) {
      BenchRecord r;
      r.n = n;
      r.d = d;
      r.m = m;
      r.replicate_index = rep;
      auto t0 = detail::Clock::now();
      volatile double sink = right_multiply(K, S).sum();
      r.structured_ks_ms = detail::ms_since(t0);
      t0 = detail::Clock::now();
      sink = (K * S_dense).eval().sum();
      r.dense_ks_ms = detail::ms_since(t0);
      t0 = detail::Clock::now();
      sink = transpose_apply(S, C).sum();
      r.structured_stks_ms = detail::ms_since(t0);
      t0 = detail::Clock::now();
      sink = (S_dense.transpose() * C).eval().sum();
      r.dense_stks_ms = detail::ms_since(t0);
      (void)sink;
      records.push_back(r);
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Built-in configurations for the CLI's --preset flag.
inline nlohmann::json preset_json(const std::string& name) {
  using nlohmann::json;
  if (name == "m-sweep") {
    return json::parse(R"({
      "experiment": "approx_error",
      "n_list": [1000, 2000],
      "replicates": 30,
      "master_seed": 20210212,
      "gamma": 0.6,
      "noise_sd": 0.5,
      "kernel": {"family": "gaussian",
                 "scale": {"coef": 1.5, "exp": -0.14285714285714285}},
      "lambda": {"coef": 0.5, "exp": -0.5714285714285714},
      "d": {"coef": 0.75, "exp": 0.42857142857142855},
      "methods": [{"name": "nystrom"},
                  {"name": "accumulation", "m": 8},
                  {"name": "accumulation", "m": 32},
                  {"name": "gaussian"}]
    })");
  }
  if (name == "toy") {
    return json::parse(R"({
      "experiment": "approx_error",
      "n_list": [1000, 2000, 4000],
      "replicates": 30,
      "master_seed": 20210212,
      "gamma": 0.5,
      "noise_sd": 0.5,
      "kernel": {"family": "matern", "smoothness": 0.5,
                 "scale": {"coef": 1.0, "exp": 0.0}},
      "lambda": {"coef": 0.3, "exp": -0.5714285714285714},
      "d": {"coef": 1.3, "exp": 0.42857142857142855},
      "methods": [{"name": "nystrom"},
                  {"name": "accumulation", "m": 5},
                  {"name": "gaussian"}]
    })");
  }
  if (name == "tradeoff") {
    return json::parse(R"({
      "experiment": "tradeoff",
      "n_list": [1000, 2000, 4000],
      "replicates": 30,
      "master_seed": 20210212,
      "gamma": 0.6,
      "noise_sd": 0.5,
      "test_fraction": 0.2,
      "kernel": {"family": "matern", "smoothness": 1.5,
                 "scale": {"coef": 1.0, "exp": 0.0}},
      "lambda": {"coef": 0.9, "exp": -0.6666666666666666},
      "d": {"coef": 1.5, "exp": 0.3333333333333333},
      "methods": [{"name": "nystrom"},
                  {"name": "accumulation", "m": 4},
                  {"name": "gaussian"},
                  {"name": "sparse_projection"}]
    })");
  }
  if (name == "diagnose-block") {
    return json::parse(R"({
      "experiment": "diagnose",
      "master_seed": 20210212,
      "diagnose": {
        "instance": "block",
        "block": {"n": 64, "dense_size": 4, "dense_variance": 64.0,
                  "dense_corr": 0.984375, "anchor_mass": 0.58},
        "delta": {"coef": 0.03125, "exp": 0.0},
        "pairs": [[2, 1], [2, 4], [2, 16]],
        "seeds": 200
      }
    })");
  }
  if (name == "bench") {
    return json::parse(R"({
      "experiment": "bench_products",
      "n_list": [1000, 2000, 4000, 8000],
      "replicates": 5,
      "master_seed": 20210212,
      "gamma": 0.6,
      "kernel": {"family": "gaussian",
                 "scale": {"coef": 1.5, "exp": -0.14285714285714285}},
      "d": {"coef": 60.0, "exp": 0.0},
      "methods": [{"name": "accumulation", "m": 4}]
    })");
  }
  if (name == "smoke") {
    return json::parse(R"({
      "experiment": "approx_error",
      "n_list": [64],
      "replicates": 2,
      "master_seed": 7,
      "gamma": 0.6,
      "noise_sd": 0.5,
      "kernel": {"family": "gaussian",
                 "scale": {"coef": 1.5, "exp": -0.14285714285714285}},
      "lambda": {"coef": 0.5, "exp": -0.5714285714285714},
      "d": {"coef": 1.5, "exp": 0.42857142857142855},
      "methods": [{"name": "nystrom"}, {"name": "gaussian"},
                  {"name": "identity"}]
    })");
  }
  throw ConfigError("unknown preset '" + name + "'");
}

inline ExperimentConfig preset_config(const std::string& name) {
  return parse_config(preset_json(name));
}

}  // namespace skrr
