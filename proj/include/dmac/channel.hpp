#ifndef DMAC_CHANNEL_HPP
#define DMAC_CHANNEL_HPP

#include <random>
#include <span>
#include <string>
#include <vector>

#include "dmac/common.hpp"

namespace dmac {

// Discrete memoryless multiple access channel over finite alphabets.
// The transition law may additionally depend on the code option of an
// interfering user that the receiver never decodes; a channel without
// interference simply has one interferer option.
struct ChannelModel {
  int num_users = 0;
  std::vector<int> input_alphabet_sizes;  // one entry per user
  int output_alphabet_size = 0;
  // Labels for the interferer's options; size >= 1. Only the count is
  // load-bearing, labels are for reports.
  std::vector<std::string> interferer_options = {"none"};
  // Dense transition tensor. Row (g0, x) holds P(. | x, g0) over the
  // output alphabet. Rows are laid out row-major with g0 slowest, then
  // the input vector x in mixed-radix order with user 0 slowest.
  std::vector<double> transition;

  int num_interferer_options() const {
    return static_cast<int>(interferer_options.size());
  }
  MixedRadix input_radix() const { return MixedRadix(input_alphabet_sizes); }
  long long num_input_vectors() const { return input_radix().size(); }
  long long num_rows() const {
    return num_input_vectors() * num_interferer_options();
  }

  // P(y | x, g0) with x given as a flat mixed-radix index. Bounds are
  // checked; validity of the distribution itself is validate()'s job.
  double emission_prob_indexed(int g0, long long x_index, int y) const;
  double emission_prob(int g0, std::span<const int> x, int y) const;
  const double* row(int g0, long long x_index) const;
};

struct ValidationIssue {
  std::string what;
};

struct ValidationResult {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

// Structural and stochasticity checks: positive alphabet sizes, a dense
// tensor of exactly num_rows()*|Y| entries, entries in [0,1], and every
// row summing to 1 within 1e-9. At most the first 10 offending rows are
// reported, each with its row sum.
ValidationResult validate(const ChannelModel& channel);

// Throws std::invalid_argument with the first issue if invalid.
void require_valid(const ChannelModel& channel);

// Draws one output symbol from row (g0, x) by inverse-CDF walk, so the
// result depends only on the generator state, not on the platform's
// distribution implementations.
int sample_output(const ChannelModel& channel, int g0, long long x_index,
                  std::mt19937_64& rng);

}  // namespace dmac

#endif
