#ifndef DMAC_SIMULATOR_HPP
#define DMAC_SIMULATOR_HPP

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmac/channel.hpp"
#include "dmac/code_space.hpp"
#include "dmac/common.hpp"
#include "dmac/exponents.hpp"

namespace dmac {

// One realized random codebook: codeword w is the symbol row
// symbols[w * block_length .. +block_length).
struct Codebook {
  long long num_codewords = 0;
  int block_length = 0;
  std::vector<std::uint8_t> symbols;

  int symbol(long long w, int j) const {
    return symbols[static_cast<size_t>(w) * block_length + j];
  }
};

// Codebooks for every (user, option) pair, shared verbatim by the
// transmitter and the receiver.
struct CodebookSet {
  int block_length = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<Codebook>> books;  // [user][option]

  const Codebook& book(int user, int option) const {
    return books.at(user).at(option);
  }
};

// floor(exp(N * rate)), at least 1. Throws when the count exceeds the cap.
long long codeword_count(double rate_nats, int block_length,
                         long long max_codewords = 1000000);

// Symbols drawn i.i.d. from each option's input distribution with an
// inverse-CDF walk, one derived generator stream per (user, option), so
// books are reproducible and independent of each other's sizes.
CodebookSet generate_codebooks(const CodeEnsemble& ensemble, int block_length,
                               std::uint64_t seed,
                               long long max_codewords = 1000000);

struct ThresholdKey {
  CodeIndexVector g;
  CodeIndexVector g_tilde;
  UserSet subset = 0;

  auto operator<=>(const ThresholdKey&) const = default;
};

// Scalar offsets t for the per-(g, g_tilde, subset) threshold tests. The
// test a candidate must pass is
//   log L_g(candidate) > -N*t + sum_j log T(x_S,j, y_j) - N*alpha_tilde,
// where T marginalizes the competitor's law over the unmatched decoded
// users, i.e. the candidate's weighted likelihood must beat the
// competitor's by the tunable factor exp(-N*t). Larger t lowers the bar.
struct ThresholdPolicy {
  std::map<ThresholdKey, double> offsets;

  double offset_of(const CodeIndexVector& g, const CodeIndexVector& g_tilde,
                   UserSet subset) const;
  void set(const CodeIndexVector& g, const CodeIndexVector& g_tilde,
           UserSet subset, double offset);
};

// Every threshold test the receiver runs for this configuration, in a
// fixed order: region vectors as stored, subsets of the decode set in
// ascending bitmask order, competitors in ensemble enumeration order.
// Competitors are the universe vectors outside the region; margin
// vectors are skipped at subset == decode_set because a full agreement
// with a tolerated vector already yields an acceptable output.
std::vector<ThresholdKey> enumerate_threshold_tests(
    const CodeEnsemble& ensemble, const OperationConfig& config);

// log L_g = sum_j log P(y_j | x_{D,j}, g) - N * alpha_g, where the
// per-symbol law marginalizes every non-decoded user over its option's
// input distribution. x_decode is one symbol row per decoded user in
// ascending user order. A zero-probability symbol makes the value -inf.
double log_weighted_likelihood(const ChannelModel& channel,
                               const CodeEnsemble& ensemble,
                               const CodeIndexVector& g, UserSet decode_set,
                               const std::vector<std::vector<int>>& x_decode,
                               std::span<const int> y, double alpha_g);

struct DecodeOutcome {
  bool collision = true;
  std::vector<int> messages;  // per decoded user, ascending user order
  std::vector<int> options;   // option picks for the decoded users

  bool decoded() const { return !collision; }
};

// Receiver for one operation config: candidates are (message tuple,
// region vector) pairs; a candidate survives when, for every subset S of
// the decode set, it beats the threshold test against every competitor
// outside the region that matches it on S. Full-set tests against margin
// vectors are vacuous (a margin competitor that agrees on the whole
// decode set would produce an acceptable output anyway). Among the
// survivors the maximum weighted likelihood wins; ties across distinct
// (messages, options) outputs collide.
class Decoder {
 public:
  Decoder(const ChannelModel& channel, const CodeEnsemble& ensemble,
          const CodebookSet& codebooks, const OperationConfig& config,
          const ThresholdPolicy& policy, const WeightAssignment& weights);
  ~Decoder();
  Decoder(const Decoder&) = delete;
  Decoder& operator=(const Decoder&) = delete;

  DecodeOutcome decode(std::span<const int> y) const;

  // Normalized test statistics. threshold_statistic is the true
  // candidate's weighted log likelihood minus the competitor's
  // threshold base; the test against offset t passes iff it exceeds
  // -N*t. misdetect_statistic is the same quantity maximized over the
  // candidates that agree with the transmitted competitor exactly on
  // `subset` and disagree pairwise elsewhere in the decode set (-inf
  // when no such candidate exists). w_actual is the full transmitted
  // message tuple, one entry per user.
  double threshold_statistic(const CodeIndexVector& g_actual,
                             const CodeIndexVector& g_tilde, UserSet subset,
                             std::span<const int> w_actual,
                             std::span<const int> y) const;
  double misdetect_statistic(const CodeIndexVector& g_tilde_actual,
                             std::span<const int> w_actual,
                             const CodeIndexVector& g_region, UserSet subset,
                             std::span<const int> y) const;

  // Event probes used for empirical and exact event accounting; the
  // actual transmitted pair is (w_actual under g_actual), y the
  // received block. Throws when the queried vectors do not fit the
  // event's zone requirements.
  bool message_event(const CodeIndexVector& g_actual,
                     std::span<const int> w_actual,
                     const CodeIndexVector& g_tilde, UserSet subset,
                     std::span<const int> y) const;
  bool threshold_event(const CodeIndexVector& g_actual,
                       std::span<const int> w_actual,
                       const CodeIndexVector& g_tilde, UserSet subset,
                       std::span<const int> y) const;
  bool misdetect_event(const CodeIndexVector& g_tilde_actual,
                       std::span<const int> w_actual,
                       const CodeIndexVector& g_region, UserSet subset,
                       std::span<const int> y) const;

  struct Impl;
  const Impl& impl() const;

 private:
  std::unique_ptr<Impl> impl_;
};

// Error accounting conventions. CLI tokens in parentheses.
//  - LenientTwoZone (eq1): outside the region, only a wrong decode for
//    the anchor user counts as an error.
//  - StrictTwoZone (eq6): outside the region the receiver must collide.
//  - DecodeSetThreeZone (eq10): exact decode of the whole decode set in
//    the region, anything but collision is an error beyond the margin,
//    only wrong decodes count inside the margin.
//  - AnchorThreeZone (eq12): same zones, correctness judged on the
//    anchor user's (message, option) pair alone.
enum class ErrorMode {
  LenientTwoZone,
  StrictTwoZone,
  DecodeSetThreeZone,
  AnchorThreeZone
};

ErrorMode parse_error_mode(const std::string& token);
std::string to_string(ErrorMode mode);
int mode_index(ErrorMode mode);
inline constexpr int kNumErrorModes = 4;

// True when the trial counts as an error under the given accounting.
// w is the full transmitted message tuple (every user).
bool classify_trial(const std::vector<int>& w, const CodeIndexVector& g,
                    const DecodeOutcome& outcome,
                    const OperationConfig& config, ErrorMode mode);

struct TrialRecord {
  CodeIndexVector g;
  std::vector<int> w;
  std::vector<int> y;
  DecodeOutcome outcome;
};

struct VectorStats {
  CodeIndexVector g;
  std::string zone;  // "region", "margin", "outside"
  double alpha = 0.0;
  long long trials = 0;
  std::array<long long, kNumErrorModes> mode_errors{};
  long long collisions = 0;
  double p_error = 0.0;  // selected mode; exact value for the oracle
  double ci_low = 0.0, ci_high = 0.0;
  // exact per-mode probabilities (oracle only): worst message and
  // message-averaged
  std::array<double, kNumErrorModes> exact_error_max{};
  std::array<double, kNumErrorModes> exact_error_avg{};
  double collision_rate = 0.0;
};

// Exact probabilities of the three pairwise events for one
// (g, g_tilde, subset) triple, maximized over the transmitted messages.
struct EventProbability {
  CodeIndexVector g;
  CodeIndexVector g_tilde;
  UserSet subset = 0;
  ExponentKind kind = ExponentKind::WrongMessage;
  double p_message = -1.0;    // valid for in-region competitors
  double p_threshold = -1.0;  // valid for out-of-region competitors
  double p_misdetect = -1.0;  // valid for out-of-region competitors
};

struct SimulationReport {
  int block_length = 1;
  std::uint64_t seed = 0;
  ErrorMode mode = ErrorMode::DecodeSetThreeZone;
  UserSet decode_set = 0;
  long long trials_per_vector = 0;
  bool exact = false;
  // Monte Carlo estimates average the per-message error probability by
  // sampling messages uniformly; the exact oracle also reports the
  // worst-message value, which is what the weighted error sums use.
  bool message_average = true;
  bool covers_universe = true;
  std::vector<VectorStats> per_vector;
  double weighted_error_sum = 0.0;  // sum of p_error * exp(-N alpha)
  std::optional<double> analytic_decoder_bound;
  std::vector<TrialRecord> records;
  std::vector<EventProbability> events;
};

struct MonteCarloOptions {
  long long trials = 1000;
  std::uint64_t seed = 1;
  ErrorMode mode = ErrorMode::DecodeSetThreeZone;
  // When set, only these vectors are simulated and the weighted error
  // sum covers just them.
  std::optional<std::vector<CodeIndexVector>> vectors;
  bool keep_records = false;
  bool attach_bound = true;
  int threads = 1;
  long long max_codewords = 1000000;
};

SimulationReport run_monte_carlo(const ChannelModel& channel,
                                 const CodeEnsemble& ensemble,
                                 const OperationConfig& config,
                                 const ThresholdPolicy& policy,
                                 const WeightAssignment& weights,
                                 const MonteCarloOptions& options);

struct OracleOptions {
  std::uint64_t seed = 1;  // codebook realization, same derivation as MC
  ErrorMode mode = ErrorMode::DecodeSetThreeZone;
  long long term_cap = 10000000;
  bool events = false;
  bool attach_bound = true;
  long long max_codewords = 1000000;
};

// Full enumeration of every message tuple and every output block for one
// fixed codebook realization: exact per-vector error probabilities (both
// worst-message and message-averaged), exact weighted error sum, and
// optionally the exact pairwise event probabilities. Throws when the
// instance needs more than term_cap enumeration terms.
SimulationReport exact_oracle(const ChannelModel& channel,
                              const CodeEnsemble& ensemble,
                              const OperationConfig& config,
                              const ThresholdPolicy& policy,
                              const WeightAssignment& weights,
                              const OracleOptions& options);

struct EventRateEstimate {
  long long message_trials = 0, message_hits = 0;
  long long threshold_trials = 0, threshold_hits = 0;
  long long misdetect_trials = 0, misdetect_hits = 0;

  double p_message() const {
    return message_trials ? double(message_hits) / message_trials : -1.0;
  }
  double p_threshold() const {
    return threshold_trials ? double(threshold_hits) / threshold_trials : -1.0;
  }
  double p_misdetect() const {
    return misdetect_trials ? double(misdetect_hits) / misdetect_trials : -1.0;
  }
};

// Replays recorded trials through the event probes: trials transmitted
// under g feed the message/threshold events, trials under g_tilde feed
// the misdetection event.
EventRateEstimate estimate_event_rates(
    const Decoder& decoder, std::span<const TrialRecord> records,
    const CodeIndexVector& g, const CodeIndexVector& g_tilde, UserSet subset);

struct TuneOptions {
  std::uint64_t seed = 1;
  long long calibration_trials = 2000;  // per side of each pair
  int offset_grid = 201;
  // exact enumeration is used instead of sampling when the pair costs
  // at most this many terms
  long long exact_term_cap = 200000;
};

// Picks each (g, g_tilde, subset) offset by sweeping a grid of values
// and minimizing the weighted sum of the two failure modes the test
// trades off: the true candidate failing (weighted by exp(-N alpha_g))
// and a mis-detection passing (weighted by exp(-N alpha_tilde)). Uses
// exact enumeration for small pairs, otherwise calibration sampling.
// Deterministic given the seed and codebooks.
ThresholdPolicy tune_policy(const ChannelModel& channel,
                            const CodeEnsemble& ensemble,
                            const OperationConfig& config,
                            const WeightAssignment& weights,
                            const CodebookSet& codebooks,
                            const TuneOptions& options = {});

}  // namespace dmac

#endif
