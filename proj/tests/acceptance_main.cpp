// Release gate: one PASS or FAIL line per criterion, exit 1 on any FAIL.
// Usage: dmac_acceptance <data_dir> <cli_binary>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "dmac/channel.hpp"
#include "dmac/code_space.hpp"
#include "dmac/common.hpp"
#include "dmac/exponents.hpp"
#include "dmac/gep.hpp"
#include "dmac/infotheory.hpp"
#include "dmac/io.hpp"
#include "dmac/simulator.hpp"
#include "test_util.hpp"

using namespace dmac;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
  if (!cond) throw Failure(msg);
}

std::string g_data;
std::string g_cli;

// ---------------------------------------------------------------- 1
// Closed-form mutual information values, tolerance 1e-9 in nats.

void c1_mutual_information() {
  ChannelModel bsc = testutil::bsc(0.1);
  CodeEnsemble be = testutil::uniform_ensemble(bsc, {0.0});
  double i_bsc =
      conditional_mi(build_joint(bsc, be, CodeIndexVector{{0}, 0}), 0b1, 0);
  double hb = -(0.1 * std::log(0.1) + 0.9 * std::log(0.9));
  require(std::abs(i_bsc - (std::log(2.0) - hb)) < 1e-9,
          "binary symmetric channel disagrees with log2 - H(0.1)");
  require(std::abs(i_bsc - 0.368064) < 5e-7,
          "binary symmetric channel far from 0.368064 nats");

  ChannelModel add = testutil::adder2();
  CodeEnsemble ae = testutil::uniform_ensemble(add, {0.0, 0.0});
  JointDistribution j = build_joint(add, ae, CodeIndexVector{{0, 0}, 0});
  double i_joint = conditional_mi(j, 0b11, 0);
  double i_cond = conditional_mi(j, 0b01, 0b10);
  require(std::abs(i_joint - 1.5 * std::log(2.0)) < 1e-9,
          "adder joint information is not 1.5 log2");
  require(std::abs(i_joint - 1.039721) < 5e-7,
          "adder joint information far from 1.039721 nats");
  require(std::abs(i_cond - std::log(2.0)) < 1e-9,
          "adder conditional information is not log2");
  require(std::abs(i_cond - 0.693147) < 5e-7,
          "adder conditional information far from 0.693147 nats");
}

// ---------------------------------------------------------------- 2
// Subset membership equals the conjunction of per-user memberships, and
// the all-users region implies every per-user region, on 100 random
// instances.

void c2_region_identities() {
  std::mt19937_64 rng(0x20260815ull);
  for (int i = 0; i < 100; ++i) {
    testutil::RandomInstance inst = testutil::random_instance(rng);
    const ChannelModel& ch = inst.channel;
    const CodeEnsemble& en = inst.ensemble;
    const int num_users = ch.num_users;
    const UserSet full = full_set(num_users);
    for (const CodeIndexVector& g : enumerate_vectors(en)) {
      std::vector<bool> user_member(num_users);
      for (int k = 0; k < num_users; ++k)
        user_member[k] = in_cd_user(ch, en, g, k).member;
      for (UserSet s = 1; s <= full; ++s) {
        bool conj = true;
        for (int k = 0; k < num_users; ++k)
          if (set_contains(s, k) && !user_member[k]) conj = false;
        require(in_cd_subset(ch, en, g, s).member == conj,
                "subset membership differs from per-user conjunction on "
                "instance " + std::to_string(i) + ", vector " + g.to_string());
      }
      if (in_cd_all(ch, en, g).member) {
        for (int k = 0; k < num_users; ++k)
          require(user_member[k],
                  "all-users membership without user " + std::to_string(k) +
                  " on instance " + std::to_string(i));
      }
    }
  }
}

// ---------------------------------------------------------------- 3
// Single-user wrong-message exponent at rate 0 reaches the classical
// random-coding value for the binary symmetric channel, and the
// s = rho/(1+rho) slice reproduces the independently coded curve.

void c3_single_user_reduction() {
  ChannelModel ch = testutil::bsc(0.1);
  CodeEnsemble en = testutil::uniform_ensemble(ch, {0.0});
  ExponentQuery q;
  q.channel = &ch;
  q.ensemble = &en;
  q.decode_set = 0b1;
  q.subset = 0;
  q.g = q.g_tilde = CodeIndexVector{{0}, 0};
  q.kind = ExponentKind::WrongMessage;

  ExponentReport rep = maximize(q);
  require(rep.value >= 0.223144 - 1e-6,
          "maximized exponent below 0.223144 at rate zero");
  require(rep.value <= std::log(1.25) + 1e-9,
          "maximized exponent exceeds log(1.25), the true optimum");

  auto e0 = [](double eps, double rho) {
    double a = 1.0 / (1.0 + rho);
    double inner = 0.5 * std::pow(1.0 - eps, a) + 0.5 * std::pow(eps, a);
    return -std::log(2.0 * std::pow(inner, 1.0 + rho));
  };
  for (int i = 0; i <= 10; ++i) {
    double rho = (i + 1) / 11.0;
    double s = rho / (1.0 + rho);
    double got = wrong_message_objective(q, rho, s);
    require(std::abs(got - e0(0.1, rho)) < 1e-9,
            "restricted slice off the classical curve at rho " +
            std::to_string(rho));
  }
}

// ---------------------------------------------------------------- 4
// When both candidate vectors induce the same channel the full-match
// misdetection exponent collapses to the larger weight exponent.

void c4_identical_collapse() {
  std::mt19937_64 rng(424242);
  for (int rep = 0; rep < 20; ++rep) {
    testutil::RandomInstance inst = testutil::random_instance(rng);
    std::vector<CodeIndexVector> universe = enumerate_vectors(inst.ensemble);
    const CodeIndexVector& g =
        universe[static_cast<size_t>(uniform01(rng) * universe.size()) %
                 universe.size()];
    ExponentQuery q;
    q.channel = &inst.channel;
    q.ensemble = &inst.ensemble;
    q.decode_set = full_set(inst.channel.num_users);
    q.subset = q.decode_set;
    q.g = q.g_tilde = g;
    q.alpha_g = 2.0 * uniform01(rng);
    q.alpha_g_tilde = 2.0 * uniform01(rng);
    q.kind = ExponentKind::MisdetectFull;
    double expect = std::max(q.alpha_g, q.alpha_g_tilde);
    double got = maximize(q).value;
    require(std::abs(got - expect) <= 1e-6,
            "collapse value " + std::to_string(got) + " differs from " +
            std::to_string(expect) + " on draw " + std::to_string(rep));
  }
}

// ---------------------------------------------------------------- 5
// On the shipped small instance the exact enumerated error performance
// stays below the analytic bound, term by term.

bool kinds_match(GepTermKind term, ExponentKind event) {
  switch (term) {
    case GepTermKind::MessageInRegion:
      return event == ExponentKind::WrongMessage;
    case GepTermKind::BoundaryMismatch:
      return event == ExponentKind::MisdetectSubset;
    case GepTermKind::StrictMismatch:
      return event == ExponentKind::MisdetectFull;
  }
  return false;
}

void c5_oracle_vs_bound() {
  ChannelModel ch = io::load_channel(g_data + "/tiny.channel.json");
  require_valid(ch);
  CodeEnsemble en = io::load_ensemble(g_data + "/tiny.ensemble.json");
  require_valid(en, &ch);
  VectorSet region(io::load_vector_list(g_data + "/tiny.region.json"));
  VectorSet margin(io::load_vector_list(g_data + "/tiny.margin.json"));
  std::vector<CodeIndexVector> universe = enumerate_vectors(en);
  require(en.num_users() == 2 && universe.size() == 4,
          "shipped instance shape changed");

  const int n = 2;
  WeightAssignment weights = uniform_weights(universe, n);
  UserSet decode = full_set(2);
  OperationConfig config(region, margin, decode);
  GepBoundReport bound =
      decoder_gep_bound(ch, en, decode, region, margin, weights);
  size_t term_count = 0;
  for (const GepVectorBreakdown& b : bound.per_vector)
    term_count += b.terms.size();

  auto term_for = [&](const EventProbability& ev) -> const GepTerm& {
    const GepVectorBreakdown* bd = nullptr;
    for (const GepVectorBreakdown& b : bound.per_vector)
      if (b.g == ev.g) bd = &b;
    require(bd != nullptr, "event for a vector missing from the bound");
    const GepTerm* term = nullptr;
    int hits = 0;
    for (const GepTerm& t : bd->terms) {
      if (t.g_tilde == ev.g_tilde && t.subset == ev.subset &&
          kinds_match(t.kind, ev.kind)) {
        term = &t;
        ++hits;
      }
    }
    require(hits == 1, "event does not match exactly one bound term");
    return *term;
  };

  auto run_oracle = [&](std::uint64_t seed) {
    CodebookSet books = generate_codebooks(en, n, seed);
    TuneOptions tune;
    tune.seed = seed;
    ThresholdPolicy policy = tune_policy(ch, en, config, weights, books, tune);
    OracleOptions opts;
    opts.seed = seed;
    opts.mode = ErrorMode::DecodeSetThreeZone;
    opts.events = true;
    return exact_oracle(ch, en, config, policy, weights, opts);
  };

  // The termwise exponents bound the codebook-average event
  // probabilities. Realizations with duplicate codewords (likely at
  // block length 2) can sit above a single term, so the per-realization
  // check runs on duplicate-free seeds and the average-sense claim is
  // checked over a window of seeds including the degenerate ones.
  for (std::uint64_t seed : {3ull, 5ull}) {
    SimulationReport rep = run_oracle(seed);
    require(rep.exact, "oracle did not run exactly");
    require(rep.analytic_decoder_bound.has_value(), "bound not attached");
    require(rep.weighted_error_sum <= *rep.analytic_decoder_bound + 1e-12,
            "exact weighted error exceeds the analytic bound at seed " +
            std::to_string(seed));
    require(std::abs(*rep.analytic_decoder_bound - bound.total) <= 1e-12,
            "attached bound differs from the direct computation");
    require(!rep.events.empty(), "oracle produced no event probabilities");

    size_t matched = 0;
    for (const EventProbability& ev : rep.events) {
      const GepTerm& term = term_for(ev);
      double cap = std::exp(-n * term.exponent) + 1e-12;
      if (ev.kind == ExponentKind::WrongMessage) {
        require(ev.p_message >= 0.0, "message event left unevaluated");
        require(ev.p_message * std::exp(-n * weights.alpha_of(ev.g)) <= cap,
                "weighted wrong-message probability above its term bound");
      } else {
        require(ev.p_threshold >= 0.0 && ev.p_misdetect >= 0.0,
                "mismatch event left unevaluated");
        require(ev.p_threshold * std::exp(-n * weights.alpha_of(ev.g)) <= cap,
                "weighted threshold-failure probability above its term bound");
        require(
            ev.p_misdetect * std::exp(-n * weights.alpha_of(ev.g_tilde)) <= cap,
            "weighted misdetection probability above its term bound");
      }
      ++matched;
    }
    require(matched == term_count, "event list does not cover every term");
  }

  const int num_seeds = 32;
  std::vector<double> mean_message, mean_threshold, mean_misdetect;
  std::vector<EventProbability> keys;
  for (std::uint64_t seed = 1; seed <= num_seeds; ++seed) {
    SimulationReport rep = run_oracle(seed);
    if (keys.empty()) {
      keys = rep.events;
      mean_message.assign(keys.size(), 0.0);
      mean_threshold.assign(keys.size(), 0.0);
      mean_misdetect.assign(keys.size(), 0.0);
    }
    require(rep.events.size() == keys.size(),
            "event list shape changed across seeds");
    for (size_t i = 0; i < keys.size(); ++i) {
      const EventProbability& ev = rep.events[i];
      require(ev.g == keys[i].g && ev.g_tilde == keys[i].g_tilde &&
                  ev.subset == keys[i].subset && ev.kind == keys[i].kind,
              "event ordering changed across seeds");
      mean_message[i] += ev.p_message / num_seeds;
      mean_threshold[i] += ev.p_threshold / num_seeds;
      mean_misdetect[i] += ev.p_misdetect / num_seeds;
    }
  }
  for (size_t i = 0; i < keys.size(); ++i) {
    const GepTerm& term = term_for(keys[i]);
    double cap = std::exp(-n * term.exponent) + 1e-12;
    if (keys[i].kind == ExponentKind::WrongMessage) {
      require(mean_message[i] * std::exp(-n * weights.alpha_of(keys[i].g)) <=
                  cap,
              "seed-averaged wrong-message probability above its term bound");
    } else {
      require(mean_threshold[i] * std::exp(-n * weights.alpha_of(keys[i].g)) <=
                  cap,
              "seed-averaged threshold failure above its term bound");
      require(mean_misdetect[i] *
                      std::exp(-n * weights.alpha_of(keys[i].g_tilde)) <=
                  cap,
              "seed-averaged misdetection above its term bound");
    }
  }
}

// ---------------------------------------------------------------- 6
// Exhaustive partition search never loses to greedy, both produce valid
// partitions, and each part's margin is the rest of the tolerated zone.

void c6_partition_optimality() {
  std::mt19937_64 rng(606060);
  int done = 0;
  while (done < 8) {
    testutil::RandomInstance inst = testutil::random_instance(rng, 2, 3, 2);
    if (inst.channel.num_users != 2) continue;
    const ChannelModel& ch = inst.channel;
    const CodeEnsemble& en = inst.ensemble;
    std::vector<CodeIndexVector> universe = enumerate_vectors(en);
    std::vector<CodeIndexVector> shuffled = universe;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    size_t max_region = std::min<size_t>(6, shuffled.size());
    size_t rsz = 1 + static_cast<size_t>(uniform01(rng) * max_region) %
                         max_region;
    std::vector<CodeIndexVector> rv(shuffled.begin(), shuffled.begin() + rsz);
    size_t avail = shuffled.size() - rsz;
    size_t msz = std::min<size_t>(avail,
                                  static_cast<size_t>(uniform01(rng) * 3));
    std::vector<CodeIndexVector> mv(shuffled.begin() + rsz,
                                    shuffled.begin() + rsz + msz);
    VectorSet region(rv), margin(mv);
    WeightAssignment weights = uniform_weights(universe, 4);
    ExponentCache cache;

    SingleUserGepBound ex =
        single_user_gep_bound(ch, en, region, margin, weights,
                              PartitionStrategy::Exhaustive, &cache);
    SingleUserGepBound gr = single_user_gep_bound(
        ch, en, region, margin, weights, PartitionStrategy::Greedy, &cache);
    require(ex.total <= gr.total + 1e-12,
            "exhaustive search lost to greedy on instance " +
            std::to_string(done));
    require(ex.assignments_examined >= 1 && gr.assignments_examined >= 1,
            "search reported no examined assignments");

    for (const SingleUserGepBound* res : {&ex, &gr}) {
      require(res->assignment.decode_set_of.size() == region.size(),
              "partition does not cover the region exactly");
      std::map<UserSet, std::vector<CodeIndexVector>> parts;
      for (const auto& [g, d] : res->assignment.decode_set_of) {
        require(region.contains(g), "partition assigns a foreign vector");
        require(set_contains(d, 0), "a decode set misses the anchor user");
        require(set_subset_of(d, full_set(2)), "decode set out of range");
        parts[d].push_back(g);
      }
      require(parts.size() == res->per_decoder.size(),
              "per-decoder reports disagree with the parts");
      double sum = 0.0;
      for (const auto& [d, part] : parts) {
        auto it = res->per_decoder.find(d);
        require(it != res->per_decoder.end(), "missing per-decoder report");
        std::vector<CodeIndexVector> rest;
        VectorSet part_set(part);
        for (const CodeIndexVector& g : region)
          if (!part_set.contains(g)) rest.push_back(g);
        for (const CodeIndexVector& g : margin) rest.push_back(g);
        GepBoundReport ref = decoder_gep_bound(
            ch, en, d, part_set, VectorSet(rest), weights, &cache);
        require(std::abs(ref.total - it->second.total) <= 1e-12,
                "margin-complement recomputation changed a part bound");
        require(ref.per_vector.size() == it->second.per_vector.size(),
                "part vector lists disagree");
        for (size_t i = 0; i < ref.per_vector.size(); ++i) {
          require(ref.per_vector[i].g == it->second.per_vector[i].g,
                  "part vectors ordered differently");
          require(std::abs(ref.per_vector[i].total -
                           it->second.per_vector[i].total) <= 1e-12,
                  "per-vector totals disagree after recomputation");
          require(ref.per_vector[i].terms.size() ==
                      it->second.per_vector[i].terms.size(),
                  "term counts disagree after recomputation");
        }
        sum += it->second.total;
      }
      require(std::abs(sum - res->total) <= 1e-9,
              "per-decoder totals do not add up");
    }
    ++done;
  }
}

// ------------------------------------------------------------- 7 + 8
// Monte Carlo error trend on the noisy adder fixture, collision
// rejection for a vector far outside the capacity region, and the
// lenient-versus-strict accounting relation on the same trial sets.

struct TrendPoint {
  double p = 0.0, lo = 0.0, hi = 0.0;
};

struct SharedSimState {
  bool ran = false;
  std::vector<std::pair<long long, long long>> lenient_strict_counts;
  ChannelModel channel;
  CodeEnsemble ensemble;
  OperationConfig config;
  std::vector<CodeIndexVector> universe;
};

SharedSimState g_sim;

void c7_error_trend() {
  ChannelModel ch = io::load_channel(g_data + "/tiny.channel.json");
  require_valid(ch);
  CodeEnsemble en;
  for (int k = 0; k < 2; ++k) {
    CodeOption inside;
    inside.rate_nats = 0.015;
    inside.input_dist = {0.5, 0.5};
    CodeOption outside;
    outside.rate_nats = 0.015;
    outside.input_dist = {0.999, 0.001};
    en.user_options.push_back({inside, outside});
  }
  en.num_interferer_options = 1;
  require_valid(en, &ch);

  CodeIndexVector g_in{{0, 0}, 0}, g_out{{1, 1}, 0};

  RegionVerdict vin = in_cd_all(ch, en, g_in);
  require(vin.member, "inside vector not a member");
  for (const SubsetWitness& w : vin.witnesses) {
    require(w.satisfied && w.chosen.slack >= 0.1,
            "inside vector not strictly inside");
  }
  RegionVerdict vout = in_cd_all(ch, en, g_out);
  require(!vout.member, "outside vector is a member");
  bool strict_violation = false;
  for (const SubsetWitness& w : vout.witnesses) {
    if (w.satisfied) continue;
    bool all_fail_by_margin = !w.rejected.empty();
    for (const RateInequality& iq : w.rejected)
      if (iq.rate_sum < iq.mutual_info + 0.005) all_fail_by_margin = false;
    if (all_fail_by_margin) strict_violation = true;
  }
  require(strict_violation, "outside vector not strictly outside");

  std::vector<CodeIndexVector> universe = enumerate_vectors(en);
  OperationConfig config(VectorSet({g_in}), VectorSet{}, full_set(2));

  std::vector<TrendPoint> trend;
  double collision_rate_200 = -1.0;
  for (int n : {50, 100, 200}) {
    WeightAssignment weights = uniform_weights(universe, n);
    CodebookSet books = generate_codebooks(en, n, 811);
    TuneOptions tune;
    tune.seed = 811;
    ThresholdPolicy policy = tune_policy(ch, en, config, weights, books, tune);
    MonteCarloOptions mc;
    mc.trials = 10000;
    mc.seed = 811 + static_cast<std::uint64_t>(n);
    mc.mode = ErrorMode::DecodeSetThreeZone;
    mc.threads = 8;
    mc.attach_bound = false;
    std::vector<CodeIndexVector> sel = {g_in};
    if (n == 200) sel.push_back(g_out);
    mc.vectors = sel;
    SimulationReport rep = run_monte_carlo(ch, en, config, policy, weights, mc);
    for (const VectorStats& st : rep.per_vector) {
      long long lenient = st.mode_errors[mode_index(ErrorMode::LenientTwoZone)];
      long long strict = st.mode_errors[mode_index(ErrorMode::StrictTwoZone)];
      require(lenient >= 0 && strict >= 0, "error mode left uncounted");
      g_sim.lenient_strict_counts.emplace_back(lenient, strict);
      if (st.g == g_in) trend.push_back({st.p_error, st.ci_low, st.ci_high});
      if (st.g == g_out && n == 200) collision_rate_200 = st.collision_rate;
    }
  }
  require(trend.size() == 3, "missing a trend point");
  for (size_t i = 1; i < trend.size(); ++i) {
    require(trend[i].p <= trend[i - 1].p || trend[i].lo <= trend[i - 1].hi,
            "error estimate grew with block length beyond confidence overlap");
  }
  require(collision_rate_200 > 0.9,
          "collision rate " + std::to_string(collision_rate_200) +
          " at block length 200 not above 0.9");

  g_sim.ran = true;
  g_sim.channel = ch;
  g_sim.ensemble = en;
  g_sim.config = config;
  g_sim.universe = universe;
}

void c8_lenient_vs_strict() {
  require(g_sim.ran, "trend criterion did not leave its shared state");
  for (const auto& [lenient, strict] : g_sim.lenient_strict_counts)
    require(lenient <= strict,
            "lenient error count exceeds strict on a trial set");

  const ChannelModel& ch = g_sim.channel;
  const CodeEnsemble& en = g_sim.ensemble;
  const OperationConfig& config = g_sim.config;
  const int n = 50;
  WeightAssignment weights = uniform_weights(g_sim.universe, n);
  CodebookSet books = generate_codebooks(en, n, 331);
  TuneOptions tune;
  tune.seed = 331;
  ThresholdPolicy policy = tune_policy(ch, en, config, weights, books, tune);
  MonteCarloOptions mc;
  mc.trials = 1200;
  mc.seed = 77;
  mc.mode = ErrorMode::StrictTwoZone;
  mc.threads = 4;
  mc.attach_bound = false;
  mc.keep_records = true;
  SimulationReport rep = run_monte_carlo(ch, en, config, policy, weights, mc);
  require(rep.records.size() ==
              g_sim.universe.size() * static_cast<size_t>(mc.trials),
          "record count off");

  std::map<CodeIndexVector, long long> correct_outside;
  for (const TrialRecord& rec : rep.records) {
    bool lenient = classify_trial(rec.w, rec.g, rec.outcome, config,
                                  ErrorMode::LenientTwoZone);
    bool strict = classify_trial(rec.w, rec.g, rec.outcome, config,
                                 ErrorMode::StrictTwoZone);
    require(!lenient || strict, "a trial is lenient-bad but strict-good");
    if (strict && !lenient) {
      require(rec.outcome.decoded(),
              "difference trial did not decode anything");
      require(!config.region.contains(rec.g),
              "difference trial transmitted a region vector");
      ++correct_outside[rec.g];
    }
  }
  for (const VectorStats& st : rep.per_vector) {
    long long lenient = st.mode_errors[mode_index(ErrorMode::LenientTwoZone)];
    long long strict = st.mode_errors[mode_index(ErrorMode::StrictTwoZone)];
    require(lenient <= strict, "lenient exceeds strict in the records run");
    require(strict - lenient == correct_outside[st.g],
            "count gap is not the number of correct out-of-region decodes");
    if (correct_outside[st.g] == 0)
      require(lenient == strict,
              "counts differ although nothing decoded correctly outside");
  }
}

// ---------------------------------------------------------------- 9
// Every subcommand, run twice with fixed seeds, emits identical bytes.

std::string run_cli_capture(const std::string& args, const std::string& tag,
                            int run_idx) {
  namespace fs = std::filesystem;
  fs::path out = fs::temp_directory_path() /
                 ("dmac_accept_" + tag + "_" + std::to_string(run_idx) +
                  ".out");
  std::string cmd = "\"" + g_cli + "\" " + args + " > \"" + out.string() +
                    "\" 2> /dev/null";
  int rc = std::system(cmd.c_str());
  require(rc != -1 && WIFEXITED(rc) && WEXITSTATUS(rc) == 0,
          "command '" + args + "' did not exit 0");
  std::string bytes = io::read_text_file(out.string());
  fs::remove(out);
  return bytes;
}

void c9_byte_identical_reruns() {
  std::string adder = " --channel \"" + g_data + "/adder_mac.channel.json\"" +
                      " --ensemble \"" + g_data + "/adder_mac.ensemble.json\"";
  std::string tiny = " --channel \"" + g_data + "/tiny.channel.json\"" +
                     " --ensemble \"" + g_data + "/tiny.ensemble.json\"" +
                     " --region \"" + g_data + "/tiny.region.json\"" +
                     " --margin \"" + g_data + "/tiny.margin.json\"";
  std::vector<std::pair<std::string, std::string>> commands = {
      {"validate", "validate --channel \"" + g_data +
                       "/tiny.channel.json\" --ensemble \"" + g_data +
                       "/tiny.ensemble.json\""},
      {"region_check", "region check" + adder + " --r 0.3,0.3"},
      {"region_sweep", "region sweep" + adder +
                           " --axis-user 0 --start 0.05 --stop 1.2 --steps 12"},
      {"exponent", "exponent --channel \"" + g_data +
                       "/tiny.channel.json\" --ensemble \"" + g_data +
                       "/tiny.ensemble.json\" --kind misdetect-full"
                       " --D 0,1 --S 0,1 --g 0,0 --gt 0,0"
                       " --alpha-g 0.2 --alpha-gt 0.4"},
      {"gep", "gep" + tiny + " --N 6 --D 0,1"},
      {"simulate", "simulate" + tiny +
                       " --N 8 --seed 11 --trials 150 --threads 2 --mode eq6"},
      {"oracle", "oracle" + tiny + " --N 2 --seed 7 --events"},
      {"gaussian", "gaussian --K 2 --P 1,1 --N0 1 --r 0.3,0.3"},
  };
  for (const auto& [tag, args] : commands) {
    std::string first = run_cli_capture(args, tag, 1);
    std::string second = run_cli_capture(args, tag, 2);
    require(!first.empty(), "command '" + tag + "' printed nothing");
    require(first == second,
            "command '" + tag + "' produced different bytes across reruns");
  }
}

struct Criterion {
  int id;
  const char* name;
  void (*fn)();
  double budget_seconds;
};

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <data_dir> <cli_binary>\n", argv[0]);
    return 2;
  }
  g_data = argv[1];
  g_cli = argv[2];

  const std::vector<Criterion> criteria = {
      {1, "closed-form mutual information", c1_mutual_information, 1.0},
      {2, "region membership identities", c2_region_identities, 30.0},
      {3, "single-user random-coding reduction", c3_single_user_reduction,
       5.0},
      {4, "identical-law exponent collapse", c4_identical_collapse, 5.0},
      {5, "exact oracle within the analytic bound", c5_oracle_vs_bound, 120.0},
      {6, "partition search optimality", c6_partition_optimality, 60.0},
      {7, "error trend and collision rejection", c7_error_trend, 600.0},
      {8, "lenient versus strict accounting", c8_lenient_vs_strict, 600.0},
      {9, "byte-identical reruns", c9_byte_identical_reruns, 600.0},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    std::string why;
    try {
      c.fn();
    } catch (const std::exception& e) {
      why = e.what();
    }
    double dt = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    if (why.empty() && dt > c.budget_seconds) {
      why = "exceeded the " + std::to_string(c.budget_seconds) +
            " second budget";
    }
    if (why.empty()) {
      std::printf("PASS %d %s (%.2f s)\n", c.id, c.name, dt);
    } else {
      std::printf("FAIL %d %s: %s (%.2f s)\n", c.id, c.name, why.c_str(), dt);
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures) {
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return 1;
  }
  std::printf("all %zu criteria passed\n", criteria.size());
  return 0;
}
