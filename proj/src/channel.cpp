#include "dmac/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace dmac {

const double* ChannelModel::row(int g0, long long x_index) const {
  if (g0 < 0 || g0 >= num_interferer_options())
    throw std::out_of_range("interferer option out of range");
  long long nx = num_input_vectors();
  if (x_index < 0 || x_index >= nx)
    throw std::out_of_range("input vector index out of range");
  return transition.data() +
         (static_cast<long long>(g0) * nx + x_index) * output_alphabet_size;
}

double ChannelModel::emission_prob_indexed(int g0, long long x_index,
                                           int y) const {
  if (y < 0 || y >= output_alphabet_size)
    throw std::out_of_range("output symbol out of range");
  return row(g0, x_index)[y];
}

double ChannelModel::emission_prob(int g0, std::span<const int> x,
                                   int y) const {
  return emission_prob_indexed(g0, input_radix().index(x), y);
}

ValidationResult validate(const ChannelModel& channel) {
  ValidationResult res;
  auto issue = [&res](std::string what) {
    res.issues.push_back({std::move(what)});
  };

  if (channel.num_users <= 0) issue("user count must be positive");
  if (channel.num_users > kMaxUsers)
    issue("user count exceeds the supported maximum of 16");
  if (static_cast<int>(channel.input_alphabet_sizes.size()) !=
      channel.num_users)
    issue("input alphabet list length must equal the user count");
  for (size_t k = 0; k < channel.input_alphabet_sizes.size(); ++k) {
    if (channel.input_alphabet_sizes[k] <= 0)
      issue("input alphabet size for user " + std::to_string(k) +
            " must be positive");
  }
  if (channel.output_alphabet_size <= 0)
    issue("output alphabet size must be positive");
  if (channel.interferer_options.empty())
    issue("at least one interferer option is required");
  if (!res.ok()) return res;

  long long rows = channel.num_rows();
  long long expected = rows * channel.output_alphabet_size;
  if (static_cast<long long>(channel.transition.size()) != expected) {
    issue("dense tensor required: expected " + std::to_string(expected) +
          " transition entries, got " +
          std::to_string(channel.transition.size()));
    return res;
  }

  int reported = 0;
  for (long long r = 0; r < rows && reported < 10; ++r) {
    const double* p = channel.transition.data() +
                      r * channel.output_alphabet_size;
    double sum = 0.0;
    bool entry_bad = false;
    for (int y = 0; y < channel.output_alphabet_size; ++y) {
      if (!(p[y] >= 0.0 && p[y] <= 1.0)) entry_bad = true;
      sum += p[y];
    }
    if (entry_bad) {
      issue("row " + std::to_string(r) + " has entries outside [0,1]");
      ++reported;
    } else if (std::abs(sum - 1.0) > 1e-9) {
      issue("row " + std::to_string(r) + " sums to " + std::to_string(sum) +
            ", expected 1 within 1e-9");
      ++reported;
    }
  }
  return res;
}

void require_valid(const ChannelModel& channel) {
  ValidationResult res = validate(channel);
  if (!res.ok()) throw std::invalid_argument(res.issues.front().what);
}

int sample_output(const ChannelModel& channel, int g0, long long x_index,
                  std::mt19937_64& rng) {
  const double* p = channel.row(g0, x_index);
  double u = uniform01(rng);
  double acc = 0.0;
  int last = channel.output_alphabet_size - 1;
  for (int y = 0; y < last; ++y) {
    acc += p[y];
    if (u < acc) return y;
  }
  return last;  // absorbs rounding slack in the row sum
}

}  // namespace dmac
