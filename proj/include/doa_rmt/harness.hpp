#ifndef DOA_RMT_HARNESS_HPP
#define DOA_RMT_HARNESS_HPP

// Monte Carlo experiment runner: trials, aggregation, sweeps, theory reports
// and CSV / JSON / plot-data output.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "doa_rmt/angles.hpp"
#include "doa_rmt/config.hpp"
#include "doa_rmt/errors.hpp"
#include "doa_rmt/estimators.hpp"
#include "doa_rmt/rmttheory.hpp"
#include "doa_rmt/rng.hpp"
#include "doa_rmt/sigmodel.hpp"

namespace doa {

/// One CSV row. source_index 0 is the average over sources.
struct AggregateStats {
  std::string method;
  std::size_t N = 0, T = 0, K = 0, n = 0, delta = 0;
  double snr_db = 0.0;
  std::size_t source_index = 0;
  double theta_true_rad = std::numeric_limits<double>::quiet_NaN();
  double theta_bar_rad = std::numeric_limits<double>::quiet_NaN();
  double mse = 0.0, variance = 0.0, bias = 0.0;
  double crb = std::numeric_limits<double>::quiet_NaN();
  std::size_t trials_used = 0, trials_rejected = 0;
  std::uint64_t seed = 0;
};

struct MethodTrial {
  bool ok = false;
  bool below_threshold = false;
  std::vector<double> errors;  // per source, signed and wrapped
};

struct TrialOutcome {
  std::vector<MethodTrial> methods;
};

struct PointResult {
  std::vector<AggregateStats> rows;
  std::vector<std::size_t> flagged;  // per method: trials with a below-threshold spike
  bool all_rejected = false;
};

namespace harness {

/// Worker count: DOA_RMT_THREADS when set, else hardware concurrency.
inline std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DOA_RMT_THREADS")) {
    std::size_t cap = 0;
    const std::string_view sv(env);
    const auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), cap);
    if (ec == std::errc() && cap >= 1) n = std::min<std::size_t>(cap, 256);
  }
  return n;
}

/// Runs f(i) for i in [0, count) on up to worker_count() threads.
template <class F>
void parallel_for(std::size_t count, F&& f) {
  const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline double method_delta(const std::string& method, const UlaScenario& s) {
  return method == "esprit" || method == "gesprit" ? static_cast<double>(s.subarray.delta) : 1.0;
}

inline DoaEstimate run_method(const std::string& method, const SampleSpectrum& spectrum, const UlaScenario& s,
                              std::size_t grid_size) {
  const double delta = static_cast<double>(s.subarray.delta);
  if (method == "esprit") return esprit(spectrum, s.K, s.window(), delta);
  if (method == "gesprit") return gesprit(spectrum, s.K, s.window(), delta, s.c());
  if (method == "music") return music(spectrum, s.K, grid_size);
  if (method == "gmusic") return gmusic(spectrum, s.K, grid_size, s.c());
  throw InvalidArgument("unknown method '" + method + "'");
}

inline TrialOutcome run_trial(const UlaScenario& s, const std::vector<std::string>& methods, std::size_t grid_size,
                              std::uint64_t seed) {
  TrialOutcome out;
  out.methods.resize(methods.size());
  SampleSpectrum spectrum;
  try {
    const auto x = generate_snapshots(s, seed);
    spectrum = scm_top_spectrum(x, s.K);
  } catch (const NumericalError&) {
    return out;
  }
  for (std::size_t m = 0; m < methods.size(); ++m) {
    try {
      const auto est = run_method(methods[m], spectrum, s, grid_size);
      if (!est.complete(s.K)) continue;
      auto match = match_and_wrap(est.angles, s.thetas, method_delta(methods[m], s));
      out.methods[m].ok = true;
      out.methods[m].below_threshold = est.any_below_threshold();
      out.methods[m].errors = std::move(match.errors);
    } catch (const NumericalError&) {
    }
  }
  return out;
}

/// Per-source and source-averaged statistics of one method's trials, in
/// trial-index order.
inline std::vector<AggregateStats> aggregate(const std::vector<TrialOutcome>& trials, std::size_t method_index,
                                             const AggregateStats& base, const std::vector<double>& theta_bar,
                                             const std::vector<double>& crb_diag,
                                             const std::vector<double>& thetas) {
  const std::size_t k = thetas.size();
  std::size_t used = 0;
  std::vector<double> mean(k, 0.0), var(k, 0.0);
  for (const auto& t : trials) {
    const auto& mt = t.methods[method_index];
    if (!mt.ok) continue;
    ++used;
    for (std::size_t j = 0; j < k; ++j) mean[j] += mt.errors[j];
  }
  const double inv = used ? 1.0 / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
  for (auto& m : mean) m *= inv;
  for (const auto& t : trials) {
    const auto& mt = t.methods[method_index];
    if (!mt.ok) continue;
    for (std::size_t j = 0; j < k; ++j) {
      const double d = mt.errors[j] - mean[j];
      var[j] += d * d;
    }
  }
  for (auto& v : var) v *= inv;

  std::vector<AggregateStats> rows;
  AggregateStats agg = base;
  agg.trials_used = used;
  agg.trials_rejected = trials.size() - used;
  agg.source_index = 0;
  double var_sum = 0.0, bias2_sum = 0.0, crb_sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    var_sum += var[j];
    bias2_sum += mean[j] * mean[j];
    crb_sum += crb_diag.empty() ? std::numeric_limits<double>::quiet_NaN() : crb_diag[j];
  }
  const double kk = static_cast<double>(k);
  agg.variance = var_sum / kk;
  agg.bias = std::sqrt(bias2_sum / kk);
  agg.mse = agg.variance + agg.bias * agg.bias;
  agg.crb = crb_sum / kk;
  rows.push_back(agg);
  for (std::size_t j = 0; j < k; ++j) {
    AggregateStats r = agg;
    r.source_index = j + 1;
    r.theta_true_rad = thetas[j];
    r.theta_bar_rad = theta_bar.empty() ? std::numeric_limits<double>::quiet_NaN() : theta_bar[j];
    r.variance = var[j];
    r.bias = mean[j];
    r.mse = r.variance + r.bias * r.bias;
    r.crb = crb_diag.empty() ? std::numeric_limits<double>::quiet_NaN() : crb_diag[j];
    rows.push_back(r);
  }
  return rows;
}

}  // namespace harness

/// All configured methods at one resolved scenario.
inline PointResult run_point(const ExperimentConfig& cfg, const UlaScenario& s, double snr_db) {
  std::vector<TrialOutcome> trials(cfg.trials);
  harness::parallel_for(cfg.trials, [&](std::size_t i) {
    trials[i] = harness::run_trial(s, cfg.methods, cfg.grid_size, substream_seed(cfg.master_seed, i));
  });

  std::vector<double> theta_bar, crb_diag;
  try {
    theta_bar = rmt::predicted_angles(s, cfg.c_override).theta_bar;
  } catch (const std::exception&) {
  }
  try {
    crb_diag = crb(s);
  } catch (const std::exception&) {
  }

  AggregateStats base;
  base.N = s.N;
  base.T = s.T;
  base.K = s.K;
  base.n = s.subarray.n;
  base.delta = s.subarray.delta;
  base.snr_db = snr_db;
  base.seed = cfg.master_seed;

  PointResult out;
  out.all_rejected = true;
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    base.method = cfg.methods[m];
    auto rows = harness::aggregate(trials, m, base, theta_bar, crb_diag, s.thetas);
    if (rows.front().trials_used > 0) out.all_rejected = false;
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    std::size_t flagged = 0;
    for (const auto& t : trials) flagged += t.methods[m].ok && t.methods[m].below_threshold;
    out.flagged.push_back(flagged);
  }
  return out;
}

inline PointResult run_point(const ExperimentConfig& cfg, std::optional<SweepPoint> point = {}) {
  return run_point(cfg, cfg.resolve(point), cfg.snr_db(point));
}

struct SweepResult {
  std::vector<AggregateStats> rows;
  std::vector<double> x;  // sweep value of each point
  std::size_t points = 0;
  std::size_t failed_points = 0;
};

inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  SweepResult out;
  std::vector<std::optional<SweepPoint>> points;
  if (cfg.sweep) {
    for (double v : cfg.sweep->values) points.push_back(SweepPoint{cfg.sweep->axis, v});
  } else {
    points.push_back(std::nullopt);
  }
  for (const auto& p : points) {
    const auto r = run_point(cfg, p);
    ++out.points;
    if (r.all_rejected) ++out.failed_points;
    out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
    const double x = p ? p->value : static_cast<double>(cfg.resolve().N);
    out.x.insert(out.x.end(), r.rows.size(), x);
  }
  return out;
}

namespace harness {

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace harness

/// Theory columns for one resolved scenario.
inline json theory_report(const ExperimentConfig& cfg, std::optional<SweepPoint> point = {}) {
  const UlaScenario s = cfg.resolve(point);
  json out;
  out["N"] = s.N;
  out["T"] = s.T;
  out["K"] = s.K;
  out["n"] = s.subarray.n;
  out["delta"] = s.subarray.delta;
  out["snr_db"] = cfg.snr_db(point);
  out["theta_true"] = s.thetas;
  const auto pred = rmt::predicted_angles(s, cfg.c_override);
  out["c"] = pred.c;
  out["tau"] = pred.tau;
  out["theta_bar"] = pred.theta_bar;
  out["ell"] = pred.ells;
  out["g"] = pred.g;
  out["lambda_bar"] = pred.lambda_bar;
  out["below_threshold"] = pred.below_threshold;
  json thr = json::array();
  for (const auto& t : rmt::phase_transition_thresholds(s)) thr.push_back(harness::finite_or_null(t.db));
  out["thresholds_db"] = thr;
  json cr = json::array();
  try {
    for (double v : crb(s)) cr.push_back(v);
  } catch (const NumericalError&) {
    cr = nullptr;
  }
  out["crb"] = cr;
  return out;
}

namespace csv {

inline const std::vector<std::string>& columns() {
  static const std::vector<std::string> c = {
      "method", "N",   "T",    "K",   "n",           "delta",           "snr_db", "source_index", "theta_true_rad",
      "theta_bar_rad", "mse", "variance", "bias", "crb", "trials_used", "trials_rejected", "seed"};
  return c;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline void write(std::ostream& os, const std::vector<AggregateStats>& rows) {
  const auto& cols = columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : rows) {
    os << r.method << ',' << r.N << ',' << r.T << ',' << r.K << ',' << r.n << ',' << r.delta << ','
       << format_double(r.snr_db) << ',' << r.source_index << ',' << format_double(r.theta_true_rad) << ','
       << format_double(r.theta_bar_rad) << ',' << format_double(r.mse) << ',' << format_double(r.variance) << ','
       << format_double(r.bias) << ',' << format_double(r.crb) << ',' << r.trials_used << ',' << r.trials_rejected
       << ',' << r.seed << '\n';
  }
}

inline std::string to_string(const std::vector<AggregateStats>& rows) {
  std::ostringstream os;
  write(os, rows);
  return os.str();
}

namespace detail {

template <class T>
T parse_field(const std::string& f) {
  T v{};
  const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc() || p != f.data() + f.size()) throw InvalidArgument("csv: bad field '" + f + "'");
  return v;
}

}  // namespace detail

inline std::vector<AggregateStats> parse(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("csv: empty input");
  std::vector<AggregateStats> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != columns().size()) throw InvalidArgument("csv: wrong column count");
    AggregateStats r;
    using detail::parse_field;
    r.method = f[0];
    r.N = parse_field<std::size_t>(f[1]);
    r.T = parse_field<std::size_t>(f[2]);
    r.K = parse_field<std::size_t>(f[3]);
    r.n = parse_field<std::size_t>(f[4]);
    r.delta = parse_field<std::size_t>(f[5]);
    r.snr_db = parse_field<double>(f[6]);
    r.source_index = parse_field<std::size_t>(f[7]);
    r.theta_true_rad = parse_field<double>(f[8]);
    r.theta_bar_rad = parse_field<double>(f[9]);
    r.mse = parse_field<double>(f[10]);
    r.variance = parse_field<double>(f[11]);
    r.bias = parse_field<double>(f[12]);
    r.crb = parse_field<double>(f[13]);
    r.trials_used = parse_field<std::size_t>(f[14]);
    r.trials_rejected = parse_field<std::size_t>(f[15]);
    r.seed = parse_field<std::uint64_t>(f[16]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace csv

inline json rows_to_json(const std::vector<AggregateStats>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"method", r.method},
                   {"N", r.N},
                   {"T", r.T},
                   {"K", r.K},
                   {"n", r.n},
                   {"delta", r.delta},
                   {"snr_db", r.snr_db},
                   {"source_index", r.source_index},
                   {"theta_true_rad", harness::finite_or_null(r.theta_true_rad)},
                   {"theta_bar_rad", harness::finite_or_null(r.theta_bar_rad)},
                   {"mse", harness::finite_or_null(r.mse)},
                   {"variance", harness::finite_or_null(r.variance)},
                   {"bias", harness::finite_or_null(r.bias)},
                   {"crb", harness::finite_or_null(r.crb)},
                   {"trials_used", r.trials_used},
                   {"trials_rejected", r.trials_rejected},
                   {"seed", r.seed}});
  }
  return arr;
}

enum class OutputFormat { csv, json, plotdata };

namespace harness {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace harness

/// Writes results. `dest` is a file for csv/json and a directory for
/// plotdata (one `<method>.dat` table per curve, source-averaged rows).
inline void emit_outputs(const SweepResult& result, OutputFormat format, const std::filesystem::path& dest,
                         const std::string& x_label = "x") {
  if (result.rows.empty()) throw InvalidArgument("emit_outputs: no statistics");
  if (format == OutputFormat::csv) {
    harness::write_file(dest, csv::to_string(result.rows));
    return;
  }
  if (format == OutputFormat::json) {
    harness::write_file(dest, rows_to_json(result.rows).dump(2) + "\n");
    return;
  }
  std::error_code ec;
  std::filesystem::create_directories(dest, ec);
  if (ec) throw std::runtime_error("cannot create '" + dest.string() + "'");
  std::vector<std::string> methods;
  for (const auto& r : result.rows)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  for (const auto& m : methods) {
    std::ostringstream os;
    os << "# " << x_label << " mse variance bias crb\n";
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
      const auto& r = result.rows[i];
      if (r.method != m || r.source_index != 0) continue;
      os << csv::format_double(result.x[i]) << ' ' << csv::format_double(r.mse) << ' '
         << csv::format_double(r.variance) << ' ' << csv::format_double(r.bias) << ' ' << csv::format_double(r.crb)
         << '\n';
    }
    harness::write_file(dest / (m + ".dat"), os.str());
  }
}

}  // namespace doa

#endif  // DOA_RMT_HARNESS_HPP
