#include "dmac/gep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <stdexcept>

namespace dmac {

namespace {

std::string hex_double(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", x);
  return buf;
}

}  // namespace

std::string to_string(GepTermKind kind) {
  switch (kind) {
    case GepTermKind::MessageInRegion: return "message";
    case GepTermKind::BoundaryMismatch: return "boundary";
    case GepTermKind::StrictMismatch: return "strict";
  }
  return "unknown";
}

std::string ExponentCache::key(const ExponentQuery& query,
                               const MaximizeOptions& options) {
  std::string k = to_string(query.kind);
  k += "|D" + format_set(query.decode_set);
  k += "|S" + format_set(query.subset);
  k += "|g" + query.g.to_string();
  k += "|t" + query.g_tilde.to_string();
  k += "|a" + hex_double(query.alpha_g);
  k += "|b" + hex_double(query.alpha_g_tilde);
  k += "|n" + std::to_string(options.grid_points);
  k += "|r" + std::to_string(options.refine_rounds);
  k += "|f" + hex_double(options.rho_floor);
  return k;
}

ExponentReport ExponentCache::get_or_compute(const ExponentQuery& query,
                                             const MaximizeOptions& options) {
  std::string k = key(query, options);
  {
    std::shared_lock lock(mu_);
    auto it = map_.find(k);
    if (it != map_.end()) {
      ++hits_;
      return it->second;
    }
  }
  ExponentReport report = maximize(query, options);
  {
    std::unique_lock lock(mu_);
    ++misses_;
    map_.emplace(k, report);
  }
  return report;
}

size_t ExponentCache::size() const {
  std::shared_lock lock(mu_);
  return map_.size();
}

std::vector<std::pair<std::string, ExponentReport>> ExponentCache::entries()
    const {
  std::shared_lock lock(mu_);
  std::vector<std::pair<std::string, ExponentReport>> out(map_.begin(),
                                                          map_.end());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

void ExponentCache::insert(const std::string& key,
                           const ExponentReport& report) {
  std::unique_lock lock(mu_);
  map_.insert_or_assign(key, report);
}

namespace {

// Proper subsets of d (including the empty set), ascending bitmask order.
std::vector<UserSet> proper_subsets(UserSet d) {
  std::vector<UserSet> out;
  std::vector<int> members = set_members(d);
  int bits = static_cast<int>(members.size());
  for (UserSet c = 0; c + 1 < (UserSet{1} << bits); ++c) {
    UserSet t = 0;
    for (int i = 0; i < bits; ++i)
      if ((c >> i) & 1u) t = set_with(t, members[i]);
    out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

ExponentReport solve(const ExponentQuery& query, ExponentCache* cache,
                     const MaximizeOptions& options) {
  if (cache) return cache->get_or_compute(query, options);
  return maximize(query, options);
}

}  // namespace

GepBoundReport decoder_gep_bound(const ChannelModel& channel,
                                 const CodeEnsemble& ensemble,
                                 UserSet decode_set, const VectorSet& region,
                                 const VectorSet& margin,
                                 const WeightAssignment& weights,
                                 ExponentCache* cache,
                                 const MaximizeOptions& options) {
  UserSet full = full_set(channel.num_users);
  if (decode_set == 0 || !set_subset_of(decode_set, full))
    throw std::invalid_argument("decode set must be a nonempty user subset");
  if (!sets_disjoint(region, margin))
    throw std::invalid_argument("region and margin overlap");

  std::vector<CodeIndexVector> universe = enumerate_vectors(ensemble);
  for (const auto& g : universe) weights.alpha_of(g);  // surfaces gaps early
  check_weight_constraint(weights);
  int n = weights.blocklength;

  GepBoundReport report;
  report.decode_set = decode_set;
  report.blocklength = n;

  std::vector<UserSet> subsets = proper_subsets(decode_set);
  for (const auto& g : region) {
    require_vector_in_ensemble(ensemble, g);
    GepVectorBreakdown breakdown;
    breakdown.g = g;
    double alpha_g = weights.alpha_of(g);

    for (UserSet s : subsets) {
      for (const auto& gt : universe) {
        if (!options_match_on(g, gt, s)) continue;
        ExponentQuery query;
        query.channel = &channel;
        query.ensemble = &ensemble;
        query.decode_set = decode_set;
        query.subset = s;
        query.g = g;
        query.g_tilde = gt;
        query.alpha_g = alpha_g;
        query.alpha_g_tilde = weights.alpha_of(gt);

        GepTerm term;
        term.g_tilde = gt;
        term.subset = s;
        if (region.contains(gt)) {
          query.kind = ExponentKind::WrongMessage;
          term.kind = GepTermKind::MessageInRegion;
          term.exponent = solve(query, cache, options).value;
          term.contribution = std::exp(-n * term.exponent);
          breakdown.message_sum += term.contribution;
        } else {
          query.kind = ExponentKind::MisdetectSubset;
          term.kind = GepTermKind::BoundaryMismatch;
          term.exponent = solve(query, cache, options).value;
          term.contribution = 2.0 * std::exp(-n * term.exponent);
          breakdown.boundary_sum += term.contribution;
        }
        breakdown.terms.push_back(std::move(term));
      }
    }

    for (const auto& gt : universe) {
      if (region.contains(gt) || margin.contains(gt)) continue;
      if (!options_match_on(g, gt, decode_set)) continue;
      ExponentQuery query;
      query.channel = &channel;
      query.ensemble = &ensemble;
      query.decode_set = decode_set;
      query.subset = decode_set;
      query.g = g;
      query.g_tilde = gt;
      query.alpha_g = alpha_g;
      query.alpha_g_tilde = weights.alpha_of(gt);
      query.kind = ExponentKind::MisdetectFull;

      GepTerm term;
      term.g_tilde = gt;
      term.subset = decode_set;
      term.kind = GepTermKind::StrictMismatch;
      term.exponent = solve(query, cache, options).value;
      term.contribution = 2.0 * std::exp(-n * term.exponent);
      breakdown.strict_sum += term.contribution;
      breakdown.terms.push_back(std::move(term));
    }

    breakdown.total =
        breakdown.message_sum + breakdown.boundary_sum + breakdown.strict_sum;
    report.total += breakdown.total;
    report.per_vector.push_back(std::move(breakdown));
  }
  return report;
}

namespace {

struct PartitionEvaluator {
  const ChannelModel& channel;
  const CodeEnsemble& ensemble;
  const std::vector<CodeIndexVector>& region_items;
  const VectorSet& region;
  const VectorSet& margin;
  const WeightAssignment& weights;
  const std::vector<UserSet>& decode_sets;
  ExponentCache* cache;
  const MaximizeOptions& options;

  // choice[i] picks decode_sets[choice[i]] for region_items[i]
  double evaluate(const std::vector<int>& choice,
                  std::map<UserSet, GepBoundReport>* reports = nullptr) const {
    std::map<UserSet, std::vector<CodeIndexVector>> parts;
    for (size_t i = 0; i < choice.size(); ++i)
      parts[decode_sets[choice[i]]].push_back(region_items[i]);

    // shared tolerated set: everything decodable somewhere
    std::vector<CodeIndexVector> tolerated = region.items();
    tolerated.insert(tolerated.end(), margin.items().begin(),
                     margin.items().end());

    double total = 0.0;
    for (const auto& [d, vectors] : parts) {
      VectorSet part_region{vectors};
      std::vector<CodeIndexVector> part_margin_items;
      for (const auto& g : tolerated)
        if (!part_region.contains(g)) part_margin_items.push_back(g);
      VectorSet part_margin{std::move(part_margin_items)};
      GepBoundReport r = decoder_gep_bound(channel, ensemble, d, part_region,
                                           part_margin, weights, cache,
                                           options);
      total += r.total;
      if (reports) reports->emplace(d, std::move(r));
    }
    return total;
  }
};

}  // namespace

SingleUserGepBound single_user_gep_bound(
    const ChannelModel& channel, const CodeEnsemble& ensemble,
    const VectorSet& region, const VectorSet& margin,
    const WeightAssignment& weights, PartitionStrategy strategy,
    ExponentCache* cache, const MaximizeOptions& options,
    long long exhaustive_cap, int max_passes) {
  if (!sets_disjoint(region, margin))
    throw std::invalid_argument("region and margin overlap");

  SingleUserGepBound result;
  result.strategy = strategy;
  if (region.empty()) return result;  // nothing to decode, bound is zero

  std::vector<UserSet> decode_sets =
      subsets_containing(channel.num_users, set_with(0, 0));
  const std::vector<CodeIndexVector>& items = region.items();
  PartitionEvaluator eval{channel, ensemble, items,  region,
                          margin,  weights,  decode_sets, cache, options};

  std::vector<int> best_choice;
  double best_total = 0.0;

  if (strategy == PartitionStrategy::Exhaustive) {
    long long count = 1;
    for (size_t i = 0; i < items.size(); ++i) {
      count *= static_cast<long long>(decode_sets.size());
      if (count > exhaustive_cap)
        throw std::invalid_argument(
            "exhaustive partition search needs more than " +
            std::to_string(exhaustive_cap) + " assignments; use greedy");
    }
    std::vector<int> choice(items.size(), 0);
    bool done = false;
    while (!done) {
      double total = eval.evaluate(choice);
      ++result.assignments_examined;
      if (best_choice.empty() || total < best_total) {
        best_total = total;
        best_choice = choice;
      }
      // odometer over choices, last vector fastest
      done = true;
      for (int i = static_cast<int>(choice.size()) - 1; i >= 0; --i) {
        if (++choice[i] < static_cast<int>(decode_sets.size())) {
          done = false;
          break;
        }
        choice[i] = 0;
      }
    }
  } else {
    int full_idx = 0;
    for (size_t i = 0; i < decode_sets.size(); ++i)
      if (decode_sets[i] == full_set(channel.num_users))
        full_idx = static_cast<int>(i);
    std::vector<int> choice(items.size(), full_idx);
    best_choice = choice;
    best_total = eval.evaluate(choice);
    ++result.assignments_examined;

    for (int pass = 0; pass < max_passes; ++pass) {
      bool improved = false;
      for (size_t i = 0; i < items.size(); ++i) {
        int keep = best_choice[i];
        for (size_t d = 0; d < decode_sets.size(); ++d) {
          if (static_cast<int>(d) == keep) continue;
          std::vector<int> trial = best_choice;
          trial[i] = static_cast<int>(d);
          double total = eval.evaluate(trial);
          ++result.assignments_examined;
          if (total < best_total) {
            best_total = total;
            best_choice = trial;
            keep = static_cast<int>(d);
            improved = true;
          }
        }
      }
      if (!improved) break;
    }
  }

  result.total = eval.evaluate(best_choice, &result.per_decoder);
  for (size_t i = 0; i < items.size(); ++i)
    result.assignment.decode_set_of[items[i]] = decode_sets[best_choice[i]];
  return result;
}

}  // namespace dmac
