// Acceptance suite: runs the full experiment matrix on the desk-scale presets
// and evaluates each release criterion at its pinned tolerance, printing one
// PASS/FAIL line per criterion. Returns non-zero if any criterion fails.
//
// The matrix (2 benchmarks x 3 loads x 3 policies x N seeds, plus ablations,
// the EDF/FIFO pair, and two calibrations) is shared across criteria; runs
// execute on a small worker pool since instances share no state.

#include <atomic>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tailsim/experiment.hpp"
#include "tailsim/queueing.hpp"

using namespace tailsim;

namespace {

int kSeeds = 5;  // overridable for quick local iterations
const double kLoads[] = {0.3, 0.6, 0.9};

struct Key {
  std::string bench;
  std::string variant;  // baseline|pegasus|timetrader|noedf|requestonly|computeonly|edf0|fifo0
  double load;
  std::uint64_t seed;
  bool operator<(const Key& o) const {
    return std::tie(bench, variant, load, seed) < std::tie(o.bench, o.variant, o.load, o.seed);
  }
};

std::map<Key, RunSummary> g_results;
std::mutex g_mu;

int g_pass = 0, g_fail = 0;

void report(int crit, bool ok, const std::string& what) {
  std::printf("%s  criterion %2d: %s\n", ok ? "PASS" : "FAIL", crit, what.c_str());
  std::fflush(stdout);
  (ok ? g_pass : g_fail)++;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

ExperimentConfig base_config(const std::string& bench) {
  std::string path = bench == "search" ? "configs/search_desk.json"
                                       : "configs/memcached_desk.json";
  return load_config(path);
}

// The scale controller needs several 5 s intervals to settle, so
// timetrader-family runs get a long warmup; baseline and pegasus pairs use
// the same measurement window for the throughput comparison.
void shape_run(ExperimentConfig* cfg, const std::string& variant, double load,
               std::uint64_t seed) {
  cfg->run.load = load;
  cfg->run.seed = seed;
  cfg->run.warmup_s = cfg->cluster.benchmark == "search" ? 20.0 : 15.0;
  cfg->run.duration_s = 20.0;
  cfg->policy.kind = PolicyKind::Baseline;
  if (variant == "pegasus") {
    cfg->policy.kind = PolicyKind::Pegasus;
  } else if (variant != "baseline") {
    cfg->policy.kind = PolicyKind::TimeTrader;
    if (variant == "noedf") cfg->policy.edf = false;
    if (variant == "requestonly") cfg->policy.use_queuing_slack = false;
    if (variant == "computeonly") cfg->policy.use_request_slack = false;
    if (variant == "edf0" || variant == "fifo0") {
      cfg->policy.scale_initial = 0.0;
      cfg->policy.scale_adaptation = false;
      cfg->policy.edf = variant == "edf0";
      cfg->run.warmup_s = 5.0;
    }
  }
}

const RunSummary& result(const Key& k) {
  auto it = g_results.find(k);
  if (it == g_results.end()) {
    std::fprintf(stderr, "missing run %s/%s/%.1f/%llu\n", k.bench.c_str(),
                 k.variant.c_str(), k.load, (unsigned long long)k.seed);
    std::abort();
  }
  return it->second;
}

double savings(const Key& k) {
  const RunSummary& s = result(k);
  const RunSummary& b = result({k.bench, "baseline", k.load, k.seed});
  return 1.0 - s.energy_j / b.energy_j;
}

void run_matrix() {
  static std::map<std::string, Calibration> calib;
  for (const char* bench : {"search", "memcached"}) {
    ExperimentConfig cfg = base_config(bench);
    cfg.run.warmup_s = 10;
    cfg.run.duration_s = 25;
    std::printf("calibrating %s...\n", bench);
    std::fflush(stdout);
    calib[bench] = calibrate_peak(cfg);
    std::printf("  %s\n", calib[bench].report.c_str());
    std::fflush(stdout);
  }

  std::vector<Key> keys;
  for (const char* bench : {"search", "memcached"}) {
    for (double load : kLoads) {
      for (int seed = 1; seed <= kSeeds; ++seed) {
        for (const char* v : {"baseline", "pegasus", "timetrader"}) {
          keys.push_back({bench, v, load, static_cast<std::uint64_t>(seed)});
        }
      }
    }
  }
  // Ablations (search, one seed, every load) and the EDF/FIFO pair at 90%.
  for (double load : kLoads) {
    for (const char* v : {"noedf", "requestonly", "computeonly"}) {
      keys.push_back({"search", v, load, 1});
    }
  }
  keys.push_back({"search", "edf0", 0.9, 1});
  keys.push_back({"search", "fifo0", 0.9, 1});

  std::atomic<std::size_t> next{0};
  unsigned workers = std::max(2u, std::thread::hardware_concurrency());
  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= keys.size()) return;
      const Key& k = keys[i];
      ExperimentConfig cfg = base_config(k.bench);
      shape_run(&cfg, k.variant, k.load, k.seed);
      const Calibration* c =
          cfg.policy.kind == PolicyKind::TimeTrader ? &calib[k.bench] : nullptr;
      RunSummary s = run_experiment(cfg, c);
      {
        std::lock_guard<std::mutex> lock(g_mu);
        g_results[k] = std::move(s);
        std::printf("  ran %s/%s load %.1f seed %llu (%zu/%zu)\n", k.bench.c_str(),
                    k.variant.c_str(), k.load, (unsigned long long)k.seed, g_results.size(),
                    keys.size());
        std::fflush(stdout);
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

void criterion_1_deadlines() {
  bool ok = true;
  double worst = 0;
  std::string where;
  for (const char* bench : {"search", "memcached"}) {
    for (double load : kLoads) {
      for (int seed = 1; seed <= kSeeds; ++seed) {
        for (const char* v : {"baseline", "pegasus", "timetrader"}) {
          double m = result({bench, v, load, static_cast<std::uint64_t>(seed)}).miss_reply_frac;
          if (m > worst) {
            worst = m;
            where = fmt("%s/%s@%.0f%%/s%d", bench, v, load * 100, seed);
          }
          if (m >= 0.015) ok = false;
        }
      }
    }
  }
  report(1, ok, fmt("per-reply miss < 1.5%% for all policies/loads/seeds (worst %.2f%% at %s)",
                    worst * 100, where.c_str()));
}

void criterion_2_peak_ordering() {
  bool ok = true;
  double peg_lo = 1, peg_hi = -1, tt_lo = 1;
  for (const char* bench : {"search", "memcached"}) {
    for (int seed = 1; seed <= kSeeds; ++seed) {
      double p = savings({bench, "pegasus", 0.9, static_cast<std::uint64_t>(seed)});
      double t = savings({bench, "timetrader", 0.9, static_cast<std::uint64_t>(seed)});
      peg_lo = std::min(peg_lo, p);
      peg_hi = std::max(peg_hi, p);
      tt_lo = std::min(tt_lo, t);
      if (p < -0.02 || p > 0.05) ok = false;
      if (t < 0.10) ok = false;
    }
  }
  report(2, ok,
         fmt("90%% load: pegasus savings in [-2%%,5%%] (saw %.1f..%.1f%%), timetrader >= 10%% "
             "(min %.1f%%)",
             peg_lo * 100, peg_hi * 100, tt_lo * 100));
}

void criterion_3_low_load() {
  bool ok = true;
  double tt_lo = 1, tt_hi = -1, pg_lo = 1, pg_hi = -1, gap_min = 1;
  for (const char* bench : {"search", "memcached"}) {
    for (int seed = 1; seed <= kSeeds; ++seed) {
      double t = savings({bench, "timetrader", 0.3, static_cast<std::uint64_t>(seed)});
      double p = savings({bench, "pegasus", 0.3, static_cast<std::uint64_t>(seed)});
      tt_lo = std::min(tt_lo, t);
      tt_hi = std::max(tt_hi, t);
      pg_lo = std::min(pg_lo, p);
      pg_hi = std::max(pg_hi, p);
      gap_min = std::min(gap_min, t - p);
      if (t < 0.30 || t > 0.60) ok = false;
      if (p < 0.20 || p > 0.45) ok = false;
      if (t - p < 0.05) ok = false;
    }
  }
  report(3, ok,
         fmt("30%% load: timetrader in [30,60]%% (saw %.1f..%.1f), pegasus in [20,45]%% "
             "(saw %.1f..%.1f), gap >= 5 pts every seed (min %.1f)",
             tt_lo * 100, tt_hi * 100, pg_lo * 100, pg_hi * 100, gap_min * 100));
}

void criterion_4_edf_reshaping() {
  const RunSummary& edf = result({"search", "edf0", 0.9, 1});
  const RunSummary& fifo = result({"search", "fifo0", 0.9, 1});
  double p99_change = edf.leaf_response.p99 / fifo.leaf_response.p99 - 1.0;
  double mean_edf = edf.mean_leaf_wait_ms;
  double mean_fifo = fifo.mean_leaf_wait_ms;
  double mean_change = std::abs(mean_edf - mean_fifo) / std::max(mean_fifo, 1e-9);
  bool ok = p99_change <= -0.05 && mean_change < 0.05;
  report(4, ok,
         fmt("EDF vs FIFO at 90%% load, slowdown 0: p99 leaf response %+.1f%% (needs <= -5%%); "
             "mean wait change %.1f%% (needs < 5%%)",
             p99_change * 100, mean_change * 100));
}

void criterion_5_throughput() {
  bool ok = true;
  double worst = 0;
  for (const char* bench : {"search", "memcached"}) {
    for (double load : kLoads) {
      for (int seed = 1; seed <= kSeeds; ++seed) {
        const RunSummary& b = result({bench, "baseline", load, static_cast<std::uint64_t>(seed)});
        const RunSummary& t =
            result({bench, "timetrader", load, static_cast<std::uint64_t>(seed)});
        double d = std::abs(static_cast<double>(t.completed) - static_cast<double>(b.completed)) /
                   static_cast<double>(b.completed);
        worst = std::max(worst, d);
        if (d >= 0.01) ok = false;
      }
    }
  }
  report(5, ok, fmt("completed queries agree with baseline within 1%% (worst %.2f%%)", worst * 100));
}

void criterion_6_slack() {
  bool ok = true;
  double clean_lo = 1, clean_hi = 0, slack_lo = 1;
  for (const char* bench : {"search", "memcached"}) {
    for (double load : kLoads) {
      for (int seed = 1; seed <= kSeeds; ++seed) {
        const RunSummary& t =
            result({bench, "timetrader", load, static_cast<std::uint64_t>(seed)});
        clean_lo = std::min(clean_lo, t.clean_request_frac);
        clean_hi = std::max(clean_hi, t.clean_request_frac);
        if (t.clean_request_frac < 0.85 || t.clean_request_frac > 0.98) ok = false;
      }
    }
    for (int seed = 1; seed <= kSeeds; ++seed) {
      const RunSummary& t = result({bench, "timetrader", 0.9, static_cast<std::uint64_t>(seed)});
      slack_lo = std::min(slack_lo, t.frac_slack_ge_quarter_budget);
      if (t.frac_slack_ge_quarter_budget < 0.80) ok = false;
    }
  }
  report(6, ok,
         fmt("request slack availability: clean fraction in [0.85,0.98] (saw %.3f..%.3f); at "
             "90%% load >= 80%% of requests hold slack >= budget/4 (min %.1f%%)",
             clean_lo, clean_hi, slack_lo * 100));
}

void criterion_7_queueing_oracle() {
  MmkResult r1 = simulate_mmk(1, 0.9, 1000.0, 400000, 12345);
  double w1 = erlang_wait_factor(1, 0.9);
  MmkResult r100 = simulate_mmk(100, 0.9, 1000.0, 400000, 777);
  double w100 = erlang_wait_factor(100, 0.9);
  bool ok = std::abs(r1.ratio - w1) / w1 < 0.02 && std::abs(r100.ratio - w100) / w100 < 0.02;
  report(7, ok,
         fmt("M/M/k simulator vs Erlang-C within 2%%: k=1 rho=0.9 %.3f vs %.3f; k=100 %.4f vs "
             "%.4f",
             r1.ratio, w1, r100.ratio, w100));
}

void criterion_8_percentile_arithmetic() {
  RngStream rng(99, "accept-p99sum");
  double ratio = p99_of_sum_mc(SumDist::Exponential, 0.99, 2000000, rng);
  double det = p99_of_sum_mc(SumDist::Deterministic, 0.99, 1000, rng);
  bool ok = ratio >= 1.40 && ratio <= 1.50 && det == 2.0;
  report(8, ok, fmt("p99(X+Y)/p99(X): iid exponential %.3f in [1.40,1.50]; deterministic %.1f == 2",
                    ratio, det));
}

void criterion_9_determinism() {
  ExperimentConfig cfg = base_config("search");
  cfg.run.load = 0.6;
  cfg.run.seed = 42;
  cfg.run.warmup_s = 1.0;
  cfg.run.duration_s = 3.0;
  RunSummary a = run_experiment(cfg, nullptr);
  RunSummary b = run_experiment(cfg, nullptr);
  bool ok = summary_csv_header(a) + summary_csv_row(a) ==
            summary_csv_header(b) + summary_csv_row(b);
  report(9, ok, "repeated (config, seed) run yields byte-identical summary CSV");
}

void criterion_10_power_states() {
  bool ok = true;
  double below_min = 1;
  for (const char* bench : {"search", "memcached"}) {
    for (int seed = 1; seed <= kSeeds; ++seed) {
      const RunSummary& t90 = result({bench, "timetrader", 0.9, static_cast<std::uint64_t>(seed)});
      double below = 0;
      for (std::size_t i = 0; i + 1 < t90.state_frac.size(); ++i) below += t90.state_frac[i];
      below_min = std::min(below_min, below);
      if (below < 0.60) ok = false;
      // Stochastic dominance: cumulative mass from the slowest state upward
      // must be at least as large at 30% load as at 90%.
      const RunSummary& t30 = result({bench, "timetrader", 0.3, static_cast<std::uint64_t>(seed)});
      double c30 = 0, c90 = 0;
      for (std::size_t i = 0; i + 1 < t30.state_frac.size(); ++i) {
        c30 += t30.state_frac[i];
        c90 += t90.state_frac[i];
        if (c30 + 1e-9 < c90 - 0.02) ok = false;
      }
    }
  }
  report(10, ok,
         fmt("timetrader at 90%%: majority of requests below base frequency (min %.0f%%, needs "
             ">= 60%%); 30%% histogram sits at slower states",
             below_min * 100));
}

void criterion_11_ablations() {
  bool ok = true;
  std::string detail;
  for (double load : kLoads) {
    double full = savings({"search", "timetrader", load, 1});
    double noedf = savings({"search", "noedf", load, 1});
    if (noedf >= full) ok = false;
    detail += fmt("[%.0f%%: full %.1f vs no-EDF %.1f] ", load * 100, full * 100, noedf * 100);
  }
  double req90 = savings({"search", "requestonly", 0.9, 1});
  double cmp90 = savings({"search", "computeonly", 0.9, 1});
  double req30 = savings({"search", "requestonly", 0.3, 1});
  double cmp30 = savings({"search", "computeonly", 0.3, 1});
  if (!(req90 > cmp90)) ok = false;
  if (!(cmp30 > req30)) ok = false;
  report(11, ok,
         fmt("ablations: no-EDF < full at every load %s; request-only %.1f%% > compute-only "
             "%.1f%% at 90%%; reversed at 30%% (%.1f%% vs %.1f%%)",
             detail.c_str(), req90 * 100, cmp90 * 100, cmp30 * 100, req30 * 100));
}

}  // namespace

int main(int argc, char** argv) {
  bool matrix_only = argc > 1 && std::strcmp(argv[1], "--matrix-only") == 0;
  if (const char* s = std::getenv("TAILSIM_ACCEPT_SEEDS")) {
    int n = std::atoi(s);
    if (n >= 1 && n <= 16) kSeeds = n;
  }
  run_matrix();
  if (matrix_only) return 0;
  criterion_1_deadlines();
  criterion_2_peak_ordering();
  criterion_3_low_load();
  criterion_4_edf_reshaping();
  criterion_5_throughput();
  criterion_6_slack();
  criterion_7_queueing_oracle();
  criterion_8_percentile_arithmetic();
  criterion_9_determinism();
  criterion_10_power_states();
  criterion_11_ablations();
  std::printf("%d passed, %d failed\n", g_pass, g_fail);
  return g_fail ? 2 : 0;
}
