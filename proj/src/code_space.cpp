#include "dmac/code_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dmac {

ValidationResult validate(const CodeEnsemble& ensemble,
                          const ChannelModel* channel) {
  ValidationResult res;
  auto issue = [&res](std::string what) {
    res.issues.push_back({std::move(what)});
  };

  if (ensemble.num_users() <= 0) issue("ensemble has no users");
  if (ensemble.num_users() > kMaxUsers)
    issue("user count exceeds the supported maximum of 16");
  if (ensemble.num_interferer_options <= 0)
    issue("interferer option count must be positive");
  if (channel) {
    if (channel->num_users != ensemble.num_users())
      issue("ensemble user count " + std::to_string(ensemble.num_users()) +
            " does not match channel user count " +
            std::to_string(channel->num_users));
    if (channel->num_interferer_options() != ensemble.num_interferer_options)
      issue("ensemble interferer option count does not match channel");
  }

  for (int k = 0; k < ensemble.num_users(); ++k) {
    const auto& opts = ensemble.user_options[k];
    if (opts.empty()) {
      issue("user " + std::to_string(k) + " has no code options");
      continue;
    }
    for (size_t m = 0; m < opts.size(); ++m) {
      std::string tag =
          "user " + std::to_string(k) + " option " + std::to_string(m);
      if (!(opts[m].rate_nats >= 0.0)) issue(tag + ": rate must be >= 0");
      const auto& dist = opts[m].input_dist;
      if (channel && k < static_cast<int>(channel->input_alphabet_sizes.size()) &&
          static_cast<int>(dist.size()) != channel->input_alphabet_sizes[k]) {
        issue(tag + ": input distribution length " +
              std::to_string(dist.size()) + " does not match alphabet size " +
              std::to_string(channel->input_alphabet_sizes[k]));
        continue;
      }
      if (dist.empty()) {
        issue(tag + ": input distribution is empty");
        continue;
      }
      double sum = 0.0;
      bool bad_entry = false;
      for (double p : dist) {
        if (!(p >= 0.0 && p <= 1.0)) bad_entry = true;
        sum += p;
      }
      if (bad_entry) issue(tag + ": distribution entries outside [0,1]");
      else if (std::abs(sum - 1.0) > 1e-9)
        issue(tag + ": distribution sums to " + std::to_string(sum));
    }
  }
  return res;
}

void require_valid(const CodeEnsemble& ensemble, const ChannelModel* channel) {
  ValidationResult res = validate(ensemble, channel);
  if (!res.ok()) throw std::invalid_argument(res.issues.front().what);
}

std::string CodeIndexVector::to_string() const {
  std::string out;
  for (size_t k = 0; k < options.size(); ++k) {
    if (k) out += ",";
    out += std::to_string(options[k]);
  }
  out += "|";
  out += std::to_string(interferer);
  return out;
}

bool options_match_on(const CodeIndexVector& a, const CodeIndexVector& b,
                      UserSet s) {
  for (int k : set_members(s)) {
    if (a.options.at(k) != b.options.at(k)) return false;
  }
  return true;
}

std::vector<CodeIndexVector> enumerate_vectors(const CodeEnsemble& ensemble) {
  long long total = 1;
  for (int k = 0; k < ensemble.num_users(); ++k) {
    int m = ensemble.num_options(k);
    if (m <= 0) throw std::invalid_argument("user has no code options");
    if (total > std::numeric_limits<long long>::max() / m)
      throw std::overflow_error(
          "code vector count overflows after " + std::to_string(total) +
          " partial combinations");
    total *= m;
  }
  int ni = ensemble.num_interferer_options;
  if (total > std::numeric_limits<long long>::max() / ni)
    throw std::overflow_error("code vector count overflows with interferer");
  total *= ni;

  std::vector<CodeIndexVector> out;
  out.reserve(static_cast<size_t>(total));
  CodeIndexVector g;
  g.options.assign(ensemble.num_users(), 0);
  g.interferer = 0;
  for (long long i = 0; i < total; ++i) {
    out.push_back(g);
    // advance like an odometer, interferer fastest
    int pos = ensemble.num_users();
    while (pos >= 0) {
      if (pos == ensemble.num_users()) {
        if (++g.interferer < ni) break;
        g.interferer = 0;
        --pos;
      } else {
        if (++g.options[pos] < ensemble.num_options(pos)) break;
        g.options[pos] = 0;
        --pos;
      }
    }
  }
  return out;
}

void require_vector_in_ensemble(const CodeEnsemble& ensemble,
                                const CodeIndexVector& g) {
  if (static_cast<int>(g.options.size()) != ensemble.num_users())
    throw std::invalid_argument("code index vector has wrong user count");
  for (int k = 0; k < ensemble.num_users(); ++k) {
    if (g.options[k] < 0 || g.options[k] >= ensemble.num_options(k))
      throw std::out_of_range("option index out of range for user " +
                              std::to_string(k));
  }
  if (g.interferer < 0 || g.interferer >= ensemble.num_interferer_options)
    throw std::out_of_range("interferer option index out of range");
}

VectorSet::VectorSet(std::vector<CodeIndexVector> vectors)
    : items_(std::move(vectors)) {
  std::sort(items_.begin(), items_.end());
  items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
}

bool VectorSet::contains(const CodeIndexVector& g) const {
  return std::binary_search(items_.begin(), items_.end(), g);
}

bool sets_disjoint(const VectorSet& a, const VectorSet& b) {
  for (const auto& g : a) {
    if (b.contains(g)) return false;
  }
  return true;
}

OperationConfig::OperationConfig(VectorSet region_in, VectorSet margin_in,
                                 UserSet decode_in)
    : region(std::move(region_in)),
      margin(std::move(margin_in)),
      decode_set(decode_in) {
  if (decode_set == 0) throw std::invalid_argument("decode set is empty");
  if (!sets_disjoint(region, margin))
    throw std::invalid_argument("region and margin overlap");
}

double WeightAssignment::alpha_of(const CodeIndexVector& g) const {
  auto it = alpha.find(g);
  if (it == alpha.end())
    throw std::out_of_range("no weight for code vector " + g.to_string());
  return it->second;
}

double WeightAssignment::constraint_sum() const {
  double sum = 0.0;
  for (const auto& [g, a] : alpha) sum += std::exp(-blocklength * a);
  return sum;
}

WeightAssignment uniform_weights(std::span<const CodeIndexVector> vectors,
                                 int blocklength) {
  if (vectors.empty())
    throw std::invalid_argument("cannot weight an empty vector list");
  if (blocklength <= 0)
    throw std::invalid_argument("blocklength must be positive");
  WeightAssignment w;
  w.blocklength = blocklength;
  double a = std::log(static_cast<double>(vectors.size())) / blocklength;
  for (const auto& g : vectors) {
    if (!w.alpha.emplace(g, a).second)
      throw std::invalid_argument("duplicate vector in weight list: " +
                                  g.to_string());
  }
  return w;
}

void check_weight_constraint(const WeightAssignment& weights, double tol) {
  if (weights.blocklength <= 0)
    throw std::invalid_argument("blocklength must be positive");
  for (const auto& [g, a] : weights.alpha) {
    if (!(a >= 0.0))
      throw std::invalid_argument("negative weight exponent for " +
                                  g.to_string());
  }
  double sum = weights.constraint_sum();
  if (std::abs(sum - 1.0) > tol)
    throw std::invalid_argument(
        "weight normalization sums to " + std::to_string(sum) +
        ", expected 1");
}

}  // namespace dmac
