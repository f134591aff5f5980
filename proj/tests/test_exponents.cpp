#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "dmac/exponents.hpp"
#include "test_util.hpp"

using namespace dmac;

namespace {

// Everything below recomputes the objectives with plain loops, std::pow
// and linear-domain sums, sharing no indexing helpers with the library.

std::vector<long long> own_strides(const std::vector<int>& sizes) {
  std::vector<long long> st(sizes.size(), 1);
  for (int i = static_cast<int>(sizes.size()) - 2; i >= 0; --i)
    st[i] = st[i + 1] * sizes[i + 1];
  return st;
}

bool odometer_next(std::vector<int>& digits, const std::vector<int>& sizes) {
  for (int i = static_cast<int>(digits.size()) - 1; i >= 0; --i) {
    if (++digits[i] < sizes[i]) return true;
    digits[i] = 0;
  }
  return false;
}

const std::vector<double>& dist_of(const CodeEnsemble& e,
                                   const CodeIndexVector& g, int user) {
  return e.user_options[user][g.options[user]].input_dist;
}

// P(y | x_D) with the other users averaged out under g's options.
double naive_marginal(const ChannelModel& ch, const CodeEnsemble& e,
                      const CodeIndexVector& g, UserSet decode_set,
                      const std::vector<int>& fixed, int y) {
  std::vector<long long> st = own_strides(ch.input_alphabet_sizes);
  std::vector<int> free_users, free_sizes;
  long long base = 0;
  for (int k = 0; k < ch.num_users; ++k) {
    if (set_contains(decode_set, k)) {
      base += st[k] * fixed[k];
    } else {
      free_users.push_back(k);
      free_sizes.push_back(ch.input_alphabet_sizes[k]);
    }
  }
  double total = 0.0;
  std::vector<int> digits(free_users.size(), 0);
  do {
    long long x = base;
    double w = 1.0;
    for (size_t i = 0; i < free_users.size(); ++i) {
      x += st[free_users[i]] * digits[i];
      w *= dist_of(e, g, free_users[i])[digits[i]];
    }
    total += w * ch.row(g.interferer, x)[y];
  } while (odometer_next(digits, free_sizes));
  return total;
}

struct NaiveParts {
  std::vector<int> s_users, r_users, s_sizes, r_sizes;
  double rate_rest_g = 0.0, rate_rest_gt = 0.0;
};

NaiveParts split_parts(const ExponentQuery& q) {
  NaiveParts p;
  const ChannelModel& ch = *q.channel;
  for (int k = 0; k < ch.num_users; ++k) {
    if (!set_contains(q.decode_set, k)) continue;
    if (set_contains(q.subset, k)) {
      p.s_users.push_back(k);
      p.s_sizes.push_back(ch.input_alphabet_sizes[k]);
    } else {
      p.r_users.push_back(k);
      p.r_sizes.push_back(ch.input_alphabet_sizes[k]);
      p.rate_rest_g += q.ensemble->user_options[k][q.g.options[k]].rate_nats;
      p.rate_rest_gt +=
          q.ensemble->user_options[k][q.g_tilde.options[k]].rate_nats;
    }
  }
  return p;
}

double naive_wrong_message(const ExponentQuery& q, double rho, double s) {
  const ChannelModel& ch = *q.channel;
  const CodeEnsemble& e = *q.ensemble;
  NaiveParts p = split_parts(q);
  double ag = std::exp(-q.alpha_g), at = std::exp(-q.alpha_g_tilde);
  double acc = 0.0;
  for (int y = 0; y < ch.output_alphabet_size; ++y) {
    std::vector<int> xs(p.s_users.size(), 0);
    do {
      double ws = 1.0;
      std::vector<int> fixed(ch.num_users, 0);
      for (size_t i = 0; i < p.s_users.size(); ++i) {
        ws *= dist_of(e, q.g, p.s_users[i])[xs[i]];
        fixed[p.s_users[i]] = xs[i];
      }
      double in_g = 0.0, in_t = 0.0;
      std::vector<int> xr(p.r_users.size(), 0);
      do {
        double wg = 1.0, wt = 1.0;
        for (size_t i = 0; i < p.r_users.size(); ++i) {
          wg *= dist_of(e, q.g, p.r_users[i])[xr[i]];
          wt *= dist_of(e, q.g_tilde, p.r_users[i])[xr[i]];
          fixed[p.r_users[i]] = xr[i];
        }
        in_g += wg *
                std::pow(naive_marginal(ch, e, q.g, q.decode_set, fixed, y) * ag,
                         1.0 - s);
        in_t += wt * std::pow(naive_marginal(ch, e, q.g_tilde, q.decode_set,
                                             fixed, y) *
                                  at,
                              s / rho);
      } while (odometer_next(xr, p.r_sizes));
      acc += ws * in_g * std::pow(in_t, rho);
    } while (odometer_next(xs, p.s_sizes));
  }
  return -rho * p.rate_rest_gt - std::log(acc);
}

double naive_misdetect_subset(const ExponentQuery& q, double rho, double s) {
  const ChannelModel& ch = *q.channel;
  const CodeEnsemble& e = *q.ensemble;
  NaiveParts p = split_parts(q);
  double ag = std::exp(-q.alpha_g), at = std::exp(-q.alpha_g_tilde);
  double acc = 0.0;
  for (int y = 0; y < ch.output_alphabet_size; ++y) {
    std::vector<int> xs(p.s_users.size(), 0);
    do {
      double ws = 1.0;
      std::vector<int> fixed(ch.num_users, 0);
      for (size_t i = 0; i < p.s_users.size(); ++i) {
        ws *= dist_of(e, q.g, p.s_users[i])[xs[i]];
        fixed[p.s_users[i]] = xs[i];
      }
      double in_g = 0.0, in_t = 0.0;
      std::vector<int> xr(p.r_users.size(), 0);
      do {
        double wg = 1.0, wt = 1.0;
        for (size_t i = 0; i < p.r_users.size(); ++i) {
          wg *= dist_of(e, q.g, p.r_users[i])[xr[i]];
          wt *= dist_of(e, q.g_tilde, p.r_users[i])[xr[i]];
          fixed[p.r_users[i]] = xr[i];
        }
        in_g += wg *
                std::pow(naive_marginal(ch, e, q.g, q.decode_set, fixed, y) * ag,
                         s / (s + rho));
        in_t += wt * naive_marginal(ch, e, q.g_tilde, q.decode_set, fixed, y) *
                at;
      } while (odometer_next(xr, p.r_sizes));
      acc += ws * std::pow(in_g, s + rho) * std::pow(in_t, 1.0 - s);
    } while (odometer_next(xs, p.s_sizes));
  }
  return -rho * p.rate_rest_g - std::log(acc);
}

double naive_misdetect_full(const ExponentQuery& q, double s) {
  const ChannelModel& ch = *q.channel;
  const CodeEnsemble& e = *q.ensemble;
  NaiveParts p = split_parts(q);
  double ag = std::exp(-q.alpha_g), at = std::exp(-q.alpha_g_tilde);
  double acc = 0.0;
  for (int y = 0; y < ch.output_alphabet_size; ++y) {
    std::vector<int> xs(p.s_users.size(), 0);
    do {
      double ws = 1.0;
      std::vector<int> fixed(ch.num_users, 0);
      for (size_t i = 0; i < p.s_users.size(); ++i) {
        ws *= dist_of(e, q.g, p.s_users[i])[xs[i]];
        fixed[p.s_users[i]] = xs[i];
      }
      double bg = naive_marginal(ch, e, q.g, q.decode_set, fixed, y) * ag;
      double bt = naive_marginal(ch, e, q.g_tilde, q.decode_set, fixed, y) * at;
      acc += ws * std::pow(bg, s) * std::pow(bt, 1.0 - s);
    } while (odometer_next(xs, p.s_sizes));
  }
  return -std::log(acc);
}

ExponentQuery random_query(std::mt19937_64& rng,
                           const testutil::RandomInstance& inst,
                           const std::vector<CodeIndexVector>& all,
                           ExponentKind kind) {
  ExponentQuery q;
  q.channel = &inst.channel;
  q.ensemble = &inst.ensemble;
  q.kind = kind;
  UserSet full = full_set(inst.channel.num_users);
  q.decode_set = 1 + static_cast<UserSet>(uniform01(rng) * full);
  q.decode_set &= full;
  if (q.decode_set == 0) q.decode_set = 1;
  if (kind == ExponentKind::MisdetectFull) {
    q.subset = q.decode_set;
  } else {
    do {
      q.subset = static_cast<UserSet>(rng()) & q.decode_set;
    } while (q.subset == q.decode_set);
  }
  q.g = all[static_cast<size_t>(uniform01(rng) * all.size()) % all.size()];
  q.g_tilde =
      all[static_cast<size_t>(uniform01(rng) * all.size()) % all.size()];
  for (int k : set_members(q.subset)) q.g_tilde.options[k] = q.g.options[k];
  q.alpha_g = 0.5 * uniform01(rng);
  q.alpha_g_tilde = 0.5 * uniform01(rng);
  return q;
}

}  // namespace

TEST_CASE("decode marginal averages out the other users") {
  ChannelModel ch = testutil::adder2();
  CodeEnsemble e = testutil::uniform_ensemble(ch, {0.1, 0.1});
  MarginalChannel m = make_decode_marginal(ch, e, CodeIndexVector{{0, 0}, 0}, 0b01);
  REQUIRE(m.decode_users == std::vector<int>{0});
  REQUIRE(m.num_inputs() == 2);
  CHECK(m.prob(0, 0) == doctest::Approx(0.5));
  CHECK(m.prob(0, 1) == doctest::Approx(0.5));
  CHECK(m.prob(0, 2) == doctest::Approx(0.0));
  CHECK(m.prob(1, 1) == doctest::Approx(0.5));
  CHECK(m.prob(1, 2) == doctest::Approx(0.5));

  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    testutil::RandomInstance inst = testutil::random_instance(rng);
    std::vector<CodeIndexVector> all = enumerate_vectors(inst.ensemble);
    UserSet full = full_set(inst.channel.num_users);
    for (UserSet d = 1; d <= full; ++d) {
      MarginalChannel mm =
          make_decode_marginal(inst.channel, inst.ensemble, all[0], d);
      for (long long xd = 0; xd < mm.num_inputs(); ++xd) {
        double row_sum = 0.0;
        for (int y = 0; y < mm.output_size; ++y) row_sum += mm.prob(xd, y);
        CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("objectives agree with the naive linear-domain oracle") {
  std::mt19937_64 rng(31);
  int checked = 0;
  for (int rep = 0; rep < 30; ++rep) {
    testutil::RandomInstance inst = testutil::random_instance(rng);
    std::vector<CodeIndexVector> all = enumerate_vectors(inst.ensemble);
    for (int t = 0; t < 3; ++t) {
      ExponentQuery wm =
          random_query(rng, inst, all, ExponentKind::WrongMessage);
      ExponentQuery ms = wm;
      ms.kind = ExponentKind::MisdetectSubset;
      ExponentQuery mf =
          random_query(rng, inst, all, ExponentKind::MisdetectFull);

      double rho = 0.3 + 0.7 * uniform01(rng);
      double s_wm = uniform01(rng);
      double s_ms = (1.0 - rho) * uniform01(rng);
      double s_mf = uniform01(rng);

      CHECK(wrong_message_objective(wm, rho, s_wm) ==
            doctest::Approx(naive_wrong_message(wm, rho, s_wm)).epsilon(1e-9));
      CHECK(misdetect_subset_objective(ms, rho, s_ms) ==
            doctest::Approx(naive_misdetect_subset(ms, rho, s_ms))
                .epsilon(1e-9));
      CHECK(misdetect_full_objective(mf, s_mf) ==
            doctest::Approx(naive_misdetect_full(mf, s_mf)).epsilon(1e-9));
      ++checked;
    }
  }
  CHECK(checked == 90);
}

TEST_CASE("structural channel zeros keep the zero-power convention") {
  ChannelModel ch = testutil::adder2();
  CodeEnsemble e = testutil::uniform_ensemble(ch, {0.2, 0.3});
  ExponentQuery q;
  q.channel = &ch;
  q.ensemble = &e;
  q.decode_set = 0b11;
  q.subset = 0b01;
  q.g = q.g_tilde = CodeIndexVector{{0, 0}, 0};
  q.kind = ExponentKind::WrongMessage;
  for (double rho : {0.4, 1.0}) {
    for (double s : {0.0, 0.5, 1.0}) {
      double got = wrong_message_objective(q, rho, s);
      CHECK(std::isfinite(got));
      CHECK(got == doctest::Approx(naive_wrong_message(q, rho, s)).epsilon(1e-9));
    }
  }
  ExponentQuery f = q;
  f.kind = ExponentKind::MisdetectFull;
  f.subset = 0b11;
  for (double s : {0.0, 1.0}) {
    double got = misdetect_full_objective(f, s);
    CHECK(std::isfinite(got));
    CHECK(got == doctest::Approx(naive_misdetect_full(f, s)).epsilon(1e-9));
  }
}

TEST_CASE("single-user slice reproduces the classical random-coding curve") {
  ChannelModel ch = testutil::bsc(0.1);
  double r = 0.1;
  CodeEnsemble e = testutil::uniform_ensemble(ch, {r});
  ExponentQuery q;
  q.channel = &ch;
  q.ensemble = &e;
  q.decode_set = 0b1;
  q.subset = 0;
  q.g = q.g_tilde = CodeIndexVector{{0}, 0};
  q.kind = ExponentKind::WrongMessage;

  auto e0 = [](double eps, double rho) {
    double a = 1.0 / (1.0 + rho);
    double inner = 0.5 * std::pow(1.0 - eps, a) + 0.5 * std::pow(eps, a);
    return -std::log(2.0 * std::pow(inner, 1.0 + rho));
  };
  for (int i = 0; i <= 10; ++i) {
    double rho = 0.05 + 0.95 * i / 10.0;
    double s = rho / (1.0 + rho);
    CHECK(wrong_message_objective(q, rho, s) ==
          doctest::Approx(-rho * r + e0(0.1, rho)).epsilon(1e-9));
  }

  CodeEnsemble e_zero = testutil::uniform_ensemble(ch, {0.0});
  ExponentQuery qz = q;
  qz.ensemble = &e_zero;
  ExponentReport rep = maximize(qz);
  CHECK(rep.value >= std::log(1.25) - 1e-6);
  CHECK(rep.value <= std::log(1.25) + 1e-9);
}

TEST_CASE("full-match exponent collapses when both laws coincide") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    ChannelModel ch;
    ch.num_users = 2;
    ch.input_alphabet_sizes = {2, 2};
    ch.output_alphabet_size = 2 + static_cast<int>(uniform01(rng) * 2);
    ch.interferer_options = {"only"};
    for (long long i = 0; i < ch.num_rows(); ++i) {
      std::vector<double> row = testutil::random_dist(rng, ch.output_alphabet_size);
      ch.transition.insert(ch.transition.end(), row.begin(), row.end());
    }
    require_valid(ch);

    CodeEnsemble e;
    std::vector<double> shared = testutil::random_dist(rng, 2);
    e.user_options.push_back({CodeOption{0.2, testutil::random_dist(rng, 2)}});
    e.user_options.push_back(
        {CodeOption{0.1, shared}, CodeOption{0.9, shared}});
    e.num_interferer_options = 1;

    ExponentQuery q;
    q.channel = &ch;
    q.ensemble = &e;
    q.decode_set = 0b01;
    q.subset = 0b01;
    q.g = CodeIndexVector{{0, 0}, 0};
    q.g_tilde = CodeIndexVector{{0, 1}, 0};
    q.alpha_g = uniform01(rng);
    q.alpha_g_tilde = uniform01(rng);
    q.kind = ExponentKind::MisdetectFull;

    double s = uniform01(rng);
    CHECK(misdetect_full_objective(q, s) ==
          doctest::Approx(s * q.alpha_g + (1.0 - s) * q.alpha_g_tilde));
    ExponentReport report = maximize(q);
    CHECK(report.value ==
          doctest::Approx(std::max(q.alpha_g, q.alpha_g_tilde)).epsilon(1e-6));
    CHECK(!report.has_rho);
  }
}

TEST_CASE("objectives reject out-of-domain arguments") {
  ChannelModel ch = testutil::bsc(0.1);
  CodeEnsemble e = testutil::uniform_ensemble(ch, {0.1});
  ExponentQuery q;
  q.channel = &ch;
  q.ensemble = &e;
  q.decode_set = 0b1;
  q.subset = 0;
  q.g = q.g_tilde = CodeIndexVector{{0}, 0};
  q.kind = ExponentKind::WrongMessage;

  CHECK_THROWS_AS(wrong_message_objective(q, 0.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(wrong_message_objective(q, 1.1, 0.5), std::domain_error);
  CHECK_THROWS_AS(wrong_message_objective(q, 0.5, -0.1), std::domain_error);
  CHECK_THROWS_AS(wrong_message_objective(q, 0.5, 1.1), std::domain_error);

  ExponentQuery m = q;
  m.kind = ExponentKind::MisdetectSubset;
  CHECK_THROWS_AS(misdetect_subset_objective(m, 0.4, 0.7), std::domain_error);
  CHECK_NOTHROW(misdetect_subset_objective(m, 0.4, 0.6));

  ExponentQuery f = q;
  f.kind = ExponentKind::MisdetectFull;
  f.subset = 0b1;
  CHECK_THROWS_AS(misdetect_full_objective(f, -0.01), std::domain_error);
  CHECK_THROWS_AS(misdetect_full_objective(f, 1.01), std::domain_error);

  CHECK_THROWS_AS(misdetect_subset_objective(q, 0.4, 0.1),
                  std::invalid_argument);  // kind mismatch
}

TEST_CASE("query validation catches structural mistakes") {
  ChannelModel ch = testutil::adder2();
  CodeEnsemble e = testutil::uniform_ensemble(ch, {0.1, 0.2});
  e.user_options[0].push_back(CodeOption{0.3, {0.3, 0.7}});

  ExponentQuery q;
  q.channel = &ch;
  q.ensemble = &e;
  q.decode_set = 0b11;
  q.subset = 0b01;
  q.g = CodeIndexVector{{0, 0}, 0};
  q.g_tilde = CodeIndexVector{{0, 0}, 0};
  q.kind = ExponentKind::WrongMessage;
  CHECK_NOTHROW(validate_query(q));

  ExponentQuery bad = q;
  bad.channel = nullptr;
  CHECK_THROWS_AS(validate_query(bad), std::invalid_argument);

  bad = q;
  bad.decode_set = 0;
  CHECK_THROWS_AS(validate_query(bad), std::invalid_argument);

  bad = q;
  bad.subset = 0b10;
  bad.decode_set = 0b01;
  CHECK_THROWS_AS(validate_query(bad), std::invalid_argument);

  bad = q;
  bad.subset = bad.decode_set;  // proper subset required for this kind
  CHECK_THROWS_AS(validate_query(bad), std::invalid_argument);

  bad = q;
  bad.kind = ExponentKind::MisdetectFull;  // and equality for this one
  CHECK_THROWS_AS(validate_query(bad), std::invalid_argument);

  bad = q;
  bad.g_tilde.options[0] = 1;  // differs on the matched subset
  CHECK_THROWS_AS(validate_query(bad), std::invalid_argument);

  bad = q;
  bad.alpha_g = -0.1;
  CHECK_THROWS_AS(validate_query(bad), std::invalid_argument);

  bad = q;
  bad.g.options[0] = 7;
  CHECK_THROWS_AS(validate_query(bad), std::out_of_range);
}

TEST_CASE("maximize reports the objective at its own argmax") {
  std::mt19937_64 rng(123);
  for (int rep = 0; rep < 6; ++rep) {
    testutil::RandomInstance inst = testutil::random_instance(rng);
    std::vector<CodeIndexVector> all = enumerate_vectors(inst.ensemble);
    for (ExponentKind kind : {ExponentKind::WrongMessage,
                              ExponentKind::MisdetectSubset,
                              ExponentKind::MisdetectFull}) {
      ExponentQuery q = random_query(rng, inst, all, kind);
      MaximizeOptions opt;
      opt.grid_points = 21;
      opt.refine_rounds = 2;
      ExponentReport rep = maximize(q, opt);
      CHECK(std::isfinite(rep.value));
      CHECK(rep.evaluations > 0);
      double direct;
      switch (kind) {
        case ExponentKind::WrongMessage:
          direct = wrong_message_objective(q, rep.arg_rho, rep.arg_s);
          CHECK(rep.has_rho);
          break;
        case ExponentKind::MisdetectSubset:
          direct = misdetect_subset_objective(q, rep.arg_rho, rep.arg_s);
          CHECK(rep.has_rho);
          break;
        default:
          direct = misdetect_full_objective(q, rep.arg_s);
          CHECK(!rep.has_rho);
      }
      CHECK(rep.value == doctest::Approx(direct).epsilon(1e-12));
      // a denser search never loses to a coarser one by more than noise
      MaximizeOptions fine;
      fine.grid_points = 41;
      fine.refine_rounds = 3;
      CHECK(maximize(q, fine).value >= rep.value - 1e-9);
    }
  }
}
