#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tailsim/metrics.hpp"
#include "tailsim/queueing.hpp"

using namespace tailsim;

TEST_CASE("nearest-rank percentile on 1..100") {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  CHECK(percentile(v, 0.99) == 99.0);
  CHECK(percentile(v, 0.50) == 50.0);
  CHECK(percentile(v, 0.999) == 100.0);
}

TEST_CASE("percentile of a single sample is that sample") {
  CHECK(percentile({7.0}, 0.01) == 7.0);
  CHECK(percentile({7.0}, 0.99) == 7.0);
}

TEST_CASE("percentile rejects empty input") {
  CHECK_THROWS(percentile({}, 0.5));
}

TEST_CASE("p99 of a million exponential samples matches -ln(0.01)") {
  RngStream rng(3, "exp");
  std::vector<double> v(1000000);
  for (double& x : v) x = rng.expo(1.0);
  CHECK(percentile(v, 0.99) == doctest::Approx(4.60517).epsilon(0.011));
}

TEST_CASE("erlang wait factor: paper quotes") {
  CHECK(erlang_wait_factor(1, 0.9) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(erlang_wait_factor(100, 0.9) == doctest::Approx(1.02).epsilon(0.005));
  CHECK(erlang_wait_factor(1, 0.0) == 1.0);
  CHECK_THROWS(erlang_wait_factor(1, 1.0));
  CHECK_THROWS(erlang_wait_factor(1, -0.1));
}

TEST_CASE("erlang C reduces to M/M/1 blocking form") {
  // For k=1, C(1, rho) = rho.
  CHECK(erlang_c(1, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(erlang_c(1, 0.9) == doctest::Approx(0.9).epsilon(1e-12));
}

namespace {
// Independent oracle for the iid-exponential sum: the 99th percentile of
// Gamma(2,1) by Newton root-finding on 1 - e^-x (1+x) = 0.99, divided by the
// 99th percentile of Exponential(1), -ln(0.01).
double gamma2_p99_over_exp_p99() {
  double x = 6.0;
  for (int i = 0; i < 60; ++i) {
    double f = 1.0 - std::exp(-x) * (1.0 + x) - 0.99;
    double fp = x * std::exp(-x);
    x -= f / fp;
  }
  return x / (-std::log(0.01));
}
}  // namespace

TEST_CASE("p99 of iid exponential sum vs analytic Gamma(2) oracle") {
  double analytic = gamma2_p99_over_exp_p99();
  CHECK(analytic == doctest::Approx(1.4415).epsilon(0.001));
  RngStream rng(5, "sum");
  double mc = p99_of_sum_mc(SumDist::Exponential, 0.99, 2000000, rng);
  CHECK(mc == doctest::Approx(analytic).epsilon(0.01));
  CHECK(mc >= 1.40);
  CHECK(mc <= 1.50);
}

TEST_CASE("p99 of deterministic sum is exactly 2") {
  RngStream rng(5, "sum");
  CHECK(p99_of_sum_mc(SumDist::Deterministic, 0.99, 1000, rng) == 2.0);
}

TEST_CASE("separate budgets: p99(X) + p99(Y) is twice the single percentile") {
  RngStream rng(9, "sep");
  std::vector<double> x(100000);
  for (double& v : x) v = rng.expo(1.0);
  std::vector<double> y = x;  // iid in distribution; identical multiset
  CHECK(percentile(x, 0.99) + percentile(y, 0.99) == 2 * percentile(x, 0.99));
}

TEST_CASE("summary csv row shape is stable") {
  RunSummary s;
  s.policy = "baseline";
  s.benchmark = "search";
  s.load = 0.9;
  s.seed = 1;
  s.state_ghz = {1.2, 2.5};
  s.state_frac = {0.25, 0.75};
  s.savings_frac = std::nan("");
  std::string header = summary_csv_header(s);
  std::string row = summary_csv_row(s);
  CHECK(header.find("policy,benchmark,load,seed,queries,completed,dropped") == 0);
  CHECK(header.find("frac_1.2GHz") != std::string::npos);
  CHECK(row.find("baseline,search,0.9,1,") == 0);
  CHECK(row.find("nan") != std::string::npos);
  // Same number of columns in header and row.
  auto count = [](const std::string& s) {
    std::size_t n = 1;
    for (char c : s)
      if (c == ',') ++n;
    return n;
  };
  CHECK(count(header) == count(row));
}
