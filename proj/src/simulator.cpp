#include "dmac/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>
#include <utility>

#include "dmac/gep.hpp"

namespace dmac {

namespace {

constexpr std::uint64_t kBookStream = 0x626f6f6b;   // codebook draws
constexpr std::uint64_t kTrialStream = 0x74726961;  // per-trial noise
constexpr std::uint64_t kTuneStream = 0x74756e65;   // calibration draws

constexpr double kPosInf = std::numeric_limits<double>::infinity();

std::vector<UserSet> submasks_ascending(UserSet d) {
  std::vector<UserSet> out;
  UserSet s = 0;
  while (true) {
    out.push_back(s);
    if (s == d) break;
    s = (s - d) & d;
  }
  return out;
}

long long draw_index(std::mt19937_64& rng, long long count) {
  long long idx = static_cast<long long>(uniform01(rng) * static_cast<double>(count));
  return idx >= count ? count - 1 : idx;
}

bool advance_block(std::vector<int>& y, int ny) {
  for (int j = static_cast<int>(y.size()) - 1; j >= 0; --j) {
    if (++y[j] < ny) return true;
    y[j] = 0;
  }
  return false;
}

std::vector<int> codeword_counts(const CodebookSet& books,
                                 const CodeIndexVector& g) {
  std::vector<int> counts;
  counts.reserve(g.options.size());
  for (size_t k = 0; k < g.options.size(); ++k) {
    long long c = books.book(static_cast<int>(k), g.options[k]).num_codewords;
    counts.push_back(static_cast<int>(c));
  }
  return counts;
}

// Walks every (message tuple, output block) pair for a transmitted
// vector, calling visit(w, y, pr) with the exact block probability.
// Returns the number of message tuples.
template <class Visit>
long long for_each_block(const ChannelModel& channel, const CodebookSet& books,
                         const CodeIndexVector& g, int block_length,
                         Visit&& visit) {
  const int num_users = channel.num_users;
  const int ny = channel.output_alphabet_size;
  MixedRadix xradix = channel.input_radix();
  MixedRadix wradix(codeword_counts(books, g));
  std::vector<int> w(num_users), digits(num_users), y(block_length);
  std::vector<long long> xseq(block_length);
  for (long long wi = 0; wi < wradix.size(); ++wi) {
    wradix.decode(wi, w);
    for (int j = 0; j < block_length; ++j) {
      for (int k = 0; k < num_users; ++k) {
        digits[k] = books.book(k, g.options[k]).symbol(w[k], j);
      }
      xseq[j] = xradix.index(digits);
    }
    std::fill(y.begin(), y.end(), 0);
    do {
      double pr = 1.0;
      for (int j = 0; j < block_length && pr > 0.0; ++j) {
        pr *= channel.emission_prob_indexed(g.interferer, xseq[j], y[j]);
      }
      visit(w, y, pr);
    } while (advance_block(y, ny));
  }
  return wradix.size();
}

void wilson_interval(double phat, long long n, double* lo, double* hi) {
  const double z = 1.959963984540054;
  if (n <= 0) {
    *lo = 0.0;
    *hi = 1.0;
    return;
  }
  const double nn = static_cast<double>(n);
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (phat + z2 / (2.0 * nn)) / denom;
  const double half =
      z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  *lo = std::max(0.0, center - half);
  *hi = std::min(1.0, center + half);
}

std::string describe_key(const CodeIndexVector& g, const CodeIndexVector& gt,
                         UserSet subset) {
  return "g=" + g.to_string() + " g_tilde=" + gt.to_string() +
         " subset=" + format_set(subset);
}

}  // namespace

long long codeword_count(double rate_nats, int block_length,
                         long long max_codewords) {
  if (block_length < 1) {
    throw std::invalid_argument("block length must be at least 1");
  }
  if (!(rate_nats >= 0.0)) {
    throw std::invalid_argument("code rate must be nonnegative");
  }
  // A hair of relative slack so exp(N*r) landing epsilon under an
  // integer count still rounds to it.
  double x = std::exp(static_cast<double>(block_length) * rate_nats) *
             (1.0 + 1e-9);
  if (!(x < 9.0e18)) {
    throw std::invalid_argument("codeword count overflows at rate " +
                                std::to_string(rate_nats) + ", block length " +
                                std::to_string(block_length));
  }
  long long count = static_cast<long long>(std::floor(x));
  if (count < 1) count = 1;
  if (count > max_codewords) {
    throw std::invalid_argument(
        "codebook needs " + std::to_string(count) + " codewords, cap is " +
        std::to_string(max_codewords));
  }
  return count;
}

CodebookSet generate_codebooks(const CodeEnsemble& ensemble, int block_length,
                               std::uint64_t seed, long long max_codewords) {
  require_valid(ensemble);
  if (block_length < 1) {
    throw std::invalid_argument("block length must be at least 1");
  }
  CodebookSet out;
  out.block_length = block_length;
  out.seed = seed;
  out.books.resize(ensemble.num_users());
  for (int u = 0; u < ensemble.num_users(); ++u) {
    for (int m = 0; m < ensemble.num_options(u); ++m) {
      const CodeOption& opt = ensemble.option(u, m);
      if (opt.input_dist.size() > 256) {
        throw std::invalid_argument(
            "input alphabets above 256 symbols are not supported by the "
            "codebook storage");
      }
      Codebook book;
      book.block_length = block_length;
      book.num_codewords = codeword_count(opt.rate_nats, block_length,
                                          max_codewords);
      if (static_cast<double>(book.num_codewords) * block_length > 2.5e8) {
        throw std::invalid_argument(
            "codebook for user " + std::to_string(u) + " option " +
            std::to_string(m) + " would exceed the symbol storage cap");
      }
      book.symbols.resize(static_cast<size_t>(book.num_codewords) *
                          block_length);
      std::mt19937_64 rng(derive_seed(
          seed, {kBookStream, static_cast<std::uint64_t>(u),
                 static_cast<std::uint64_t>(m)}));
      const int na = static_cast<int>(opt.input_dist.size());
      for (size_t i = 0; i < book.symbols.size(); ++i) {
        double u01 = uniform01(rng);
        double acc = 0.0;
        int sym = na - 1;
        for (int a = 0; a + 1 < na; ++a) {
          acc += opt.input_dist[a];
          if (u01 < acc) {
            sym = a;
            break;
          }
        }
        book.symbols[i] = static_cast<std::uint8_t>(sym);
      }
      out.books[u].push_back(std::move(book));
    }
  }
  return out;
}

double ThresholdPolicy::offset_of(const CodeIndexVector& g,
                                  const CodeIndexVector& g_tilde,
                                  UserSet subset) const {
  auto it = offsets.find(ThresholdKey{g, g_tilde, subset});
  if (it == offsets.end()) {
    throw std::out_of_range("threshold policy has no offset for " +
                            describe_key(g, g_tilde, subset));
  }
  return it->second;
}

void ThresholdPolicy::set(const CodeIndexVector& g,
                          const CodeIndexVector& g_tilde, UserSet subset,
                          double offset) {
  offsets[ThresholdKey{g, g_tilde, subset}] = offset;
}

std::vector<ThresholdKey> enumerate_threshold_tests(
    const CodeEnsemble& ensemble, const OperationConfig& config) {
  std::vector<CodeIndexVector> universe = enumerate_vectors(ensemble);
  const UserSet d = config.decode_set;
  std::vector<UserSet> subs = submasks_ascending(d);
  std::vector<ThresholdKey> keys;
  for (const CodeIndexVector& g : config.region) {
    require_vector_in_ensemble(ensemble, g);
    for (UserSet s : subs) {
      for (const CodeIndexVector& t : universe) {
        if (config.region.contains(t)) continue;
        if (!options_match_on(g, t, s)) continue;
        if (s == d && config.margin.contains(t)) continue;
        keys.push_back(ThresholdKey{g, t, s});
      }
    }
  }
  return keys;
}

double log_weighted_likelihood(const ChannelModel& channel,
                               const CodeEnsemble& ensemble,
                               const CodeIndexVector& g, UserSet decode_set,
                               const std::vector<std::vector<int>>& x_decode,
                               std::span<const int> y, double alpha_g) {
  MarginalChannel marg = make_decode_marginal(channel, ensemble, g, decode_set);
  const int nd = static_cast<int>(marg.decode_users.size());
  const int n = static_cast<int>(y.size());
  if (static_cast<int>(x_decode.size()) != nd) {
    throw std::invalid_argument("x_decode needs one symbol row per decoded "
                                "user, in ascending user order");
  }
  for (const auto& row : x_decode) {
    if (static_cast<int>(row.size()) != n) {
      throw std::invalid_argument("x_decode rows must match the block length");
    }
  }
  MixedRadix radix = marg.radix();
  std::vector<int> digits(nd);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    if (y[j] < 0 || y[j] >= marg.output_size) {
      throw std::invalid_argument("output symbol out of range");
    }
    for (int i = 0; i < nd; ++i) {
      if (x_decode[i][j] < 0 || x_decode[i][j] >= marg.sizes[i]) {
        throw std::invalid_argument("input symbol out of range");
      }
      digits[i] = x_decode[i][j];
    }
    double p = marg.prob(radix.index(digits), y[j]);
    sum += p > 0.0 ? std::log(p) : kNegInf;
  }
  return sum - static_cast<double>(n) * alpha_g;
}

struct Decoder::Impl {
  ChannelModel channel;
  CodeEnsemble ensemble;
  CodebookSet books;
  OperationConfig config;
  ThresholdPolicy policy;
  WeightAssignment weights;

  int num_users = 0;
  int block_length = 0;
  int ny = 0;
  UserSet dset = 0;
  std::vector<int> d_users;
  std::vector<int> d_sizes;
  std::vector<long long> d_strides;
  long long nxd = 1;

  std::vector<CodeIndexVector> universe;
  std::map<CodeIndexVector, int> uindex;
  enum class Zone { kRegion, kMargin, kOutside };
  std::vector<Zone> zone;
  std::vector<double> alpha;
  std::vector<MarginalChannel> marg;
  std::vector<std::vector<double>> log_marg;

  struct ReducedTable {
    long long nxs = 1;
    std::vector<long long> s_strides;  // per subset member, ascending users
    std::vector<double> logt;          // [xs * ny + y]
  };
  // keyed by (competitor universe index, subset); node-based so the
  // pointers stored in tests stay valid
  std::map<std::pair<int, UserSet>, ReducedTable> tables;

  struct Test {
    int t_uidx = 0;
    const ReducedTable* table = nullptr;
    double offset = 0.0;
    double rhs_const = 0.0;  // -N * (offset + alpha_tilde)
  };
  struct TestGroup {
    UserSet subset = 0;
    std::vector<int> s_pos;  // positions of subset members within d_users
    MixedRadix ws_radix;     // codeword counts at those positions
    std::vector<Test> tests;
  };
  struct RegionEntry {
    int uidx = 0;
    std::vector<const Codebook*> book;  // per decoded user
    std::vector<int> counts;
    MixedRadix wradix;
    double alpha_term = 0.0;  // N * alpha(g)
    std::vector<int> output_options;
    std::vector<TestGroup> groups;
  };
  std::vector<RegionEntry> entries;
  std::map<CodeIndexVector, int> entry_index;

  Impl(const ChannelModel& channel_in, const CodeEnsemble& ensemble_in,
       const CodebookSet& books_in, const OperationConfig& config_in,
       const ThresholdPolicy& policy_in, const WeightAssignment& weights_in)
      : channel(channel_in),
        ensemble(ensemble_in),
        books(books_in),
        config(config_in),
        policy(policy_in),
        weights(weights_in) {
    build();
  }

  void build() {
    require_valid(channel);
    require_valid(ensemble, &channel);
    check_weight_constraint(weights);
    num_users = channel.num_users;
    ny = channel.output_alphabet_size;
    block_length = weights.blocklength;
    if (books.block_length != block_length) {
      throw std::invalid_argument(
          "codebook block length " + std::to_string(books.block_length) +
          " does not match the weight normalization length " +
          std::to_string(block_length));
    }
    if (static_cast<int>(books.books.size()) != num_users) {
      throw std::invalid_argument("codebook set has the wrong user count");
    }
    for (int u = 0; u < num_users; ++u) {
      if (static_cast<int>(books.books[u].size()) != ensemble.num_options(u)) {
        throw std::invalid_argument("codebook set is missing options for user " +
                                    std::to_string(u));
      }
    }
    if (ensemble.num_interferer_options > channel.num_interferer_options()) {
      throw std::invalid_argument(
          "ensemble assumes more interferer options than the channel has");
    }
    dset = config.decode_set;
    if (dset == 0 || !set_subset_of(dset, full_set(num_users))) {
      throw std::invalid_argument("decode set out of range for " +
                                  std::to_string(num_users) + " users");
    }
    d_users = set_members(dset);
    for (int k : d_users) d_sizes.push_back(channel.input_alphabet_sizes[k]);
    d_strides.assign(d_users.size(), 1);
    for (int i = static_cast<int>(d_users.size()) - 2; i >= 0; --i) {
      d_strides[i] = d_strides[i + 1] * d_sizes[i + 1];
    }
    nxd = d_strides[0] * d_sizes[0];

    universe = enumerate_vectors(ensemble);
    for (int i = 0; i < static_cast<int>(universe.size()); ++i) {
      uindex.emplace(universe[i], i);
    }
    for (const CodeIndexVector& g : config.region) {
      require_vector_in_ensemble(ensemble, g);
    }
    for (const CodeIndexVector& g : config.margin) {
      require_vector_in_ensemble(ensemble, g);
    }
    zone.resize(universe.size());
    alpha.resize(universe.size());
    marg.resize(universe.size());
    log_marg.resize(universe.size());
    for (size_t i = 0; i < universe.size(); ++i) {
      const CodeIndexVector& v = universe[i];
      zone[i] = config.region.contains(v)   ? Zone::kRegion
                : config.margin.contains(v) ? Zone::kMargin
                                            : Zone::kOutside;
      alpha[i] = weights.alpha_of(v);
      marg[i] = make_decode_marginal(channel, ensemble, v, dset);
      log_marg[i].resize(marg[i].table.size());
      for (size_t j = 0; j < marg[i].table.size(); ++j) {
        double p = marg[i].table[j];
        log_marg[i][j] = p > 0.0 ? std::log(p) : kNegInf;
      }
    }

    long long total_candidates = 0;
    for (const CodeIndexVector& g : config.region) {
      RegionEntry e;
      e.uidx = uindex.at(g);
      for (int k : d_users) {
        const Codebook& b = books.book(k, g.options[k]);
        e.book.push_back(&b);
        e.counts.push_back(static_cast<int>(b.num_codewords));
        e.output_options.push_back(g.options[k]);
      }
      e.wradix = MixedRadix(e.counts);
      total_candidates += e.wradix.size();
      e.alpha_term = static_cast<double>(block_length) * alpha[e.uidx];
      entry_index.emplace(g, static_cast<int>(entries.size()));
      entries.push_back(std::move(e));
    }
    if (total_candidates > 2000000) {
      throw std::invalid_argument(
          "decoder candidate list has " + std::to_string(total_candidates) +
          " entries, over the 2000000 cap");
    }

    for (const ThresholdKey& key : enumerate_threshold_tests(ensemble, config)) {
      RegionEntry& e = entries[entry_index.at(key.g)];
      if (e.groups.empty() || e.groups.back().subset != key.subset) {
        TestGroup grp;
        grp.subset = key.subset;
        std::vector<int> ws_counts;
        for (int i = 0; i < static_cast<int>(d_users.size()); ++i) {
          if (set_contains(key.subset, d_users[i])) {
            grp.s_pos.push_back(i);
            ws_counts.push_back(e.counts[i]);
          }
        }
        grp.ws_radix = MixedRadix(ws_counts);
        e.groups.push_back(std::move(grp));
      }
      Test t;
      t.t_uidx = uindex.at(key.g_tilde);
      t.table = &reduced(t.t_uidx, key.subset);
      t.offset = policy.offset_of(key.g, key.g_tilde, key.subset);
      t.rhs_const = -static_cast<double>(block_length) *
                    (t.offset + alpha[t.t_uidx]);
      e.groups.back().tests.push_back(t);
    }
  }

  const ReducedTable& reduced(int t_uidx, UserSet s) {
    auto it = tables.find({t_uidx, s});
    if (it != tables.end()) return it->second;

    std::vector<int> s_sizes, rest_sizes, rest_users;
    std::vector<long long> s_dstride, rest_dstride;
    for (int i = 0; i < static_cast<int>(d_users.size()); ++i) {
      if (set_contains(s, d_users[i])) {
        s_sizes.push_back(d_sizes[i]);
        s_dstride.push_back(d_strides[i]);
      } else {
        rest_users.push_back(d_users[i]);
        rest_sizes.push_back(d_sizes[i]);
        rest_dstride.push_back(d_strides[i]);
      }
    }
    ReducedTable tab;
    tab.s_strides.assign(s_sizes.size(), 1);
    for (int i = static_cast<int>(s_sizes.size()) - 2; i >= 0; --i) {
      tab.s_strides[i] = tab.s_strides[i + 1] * s_sizes[i + 1];
    }
    tab.nxs = s_sizes.empty() ? 1 : tab.s_strides[0] * s_sizes[0];

    long long nxr = 1;
    for (int sz : rest_sizes) nxr *= sz;
    std::vector<long long> s_base(tab.nxs, 0), rest_base(nxr, 0);
    for (long long xs = 0; xs < tab.nxs; ++xs) {
      for (size_t i = 0; i < s_sizes.size(); ++i) {
        s_base[xs] += ((xs / tab.s_strides[i]) % s_sizes[i]) * s_dstride[i];
      }
    }
    std::vector<double> w_rest(nxr, 1.0);
    {
      std::vector<long long> rstrides(rest_sizes.size(), 1);
      for (int i = static_cast<int>(rest_sizes.size()) - 2; i >= 0; --i) {
        rstrides[i] = rstrides[i + 1] * rest_sizes[i + 1];
      }
      const CodeIndexVector& gt = universe[t_uidx];
      for (long long xr = 0; xr < nxr; ++xr) {
        for (size_t i = 0; i < rest_sizes.size(); ++i) {
          long long digit = (xr / rstrides[i]) % rest_sizes[i];
          rest_base[xr] += digit * rest_dstride[i];
          w_rest[xr] *= ensemble.option(rest_users[i], gt.options[rest_users[i]])
                            .input_dist[digit];
        }
      }
    }
    const MarginalChannel& m = marg[t_uidx];
    tab.logt.assign(static_cast<size_t>(tab.nxs) * ny, kNegInf);
    for (long long xs = 0; xs < tab.nxs; ++xs) {
      for (int y = 0; y < ny; ++y) {
        double acc = 0.0;
        for (long long xr = 0; xr < nxr; ++xr) {
          acc += w_rest[xr] * m.prob(s_base[xs] + rest_base[xr], y);
        }
        tab.logt[xs * ny + y] = acc > 0.0 ? std::log(acc) : kNegInf;
      }
    }
    return tables.emplace(std::make_pair(t_uidx, s), std::move(tab))
        .first->second;
  }

  double cand_log_lik(const RegionEntry& e, std::span<const int> wd,
                      std::span<const int> y) const {
    const std::vector<double>& lm = log_marg[e.uidx];
    const int nd = static_cast<int>(d_users.size());
    double sum = 0.0;
    for (int j = 0; j < static_cast<int>(y.size()); ++j) {
      long long xd = 0;
      for (int i = 0; i < nd; ++i) {
        xd += d_strides[i] * e.book[i]->symbol(wd[i], j);
      }
      double v = lm[xd * ny + y[j]];
      if (v == kNegInf) return kNegInf;
      sum += v;
    }
    return sum - e.alpha_term;
  }

  // sum_j log T(x_S,j, y_j) for one reduced table; the subset symbols
  // come from the entry's codebooks at the given positions
  double base_sum(const ReducedTable& tab, const RegionEntry& e,
                  const std::vector<int>& s_pos, std::span<const int> ws,
                  std::span<const int> y) const {
    double sum = 0.0;
    for (int j = 0; j < static_cast<int>(y.size()); ++j) {
      long long xs = 0;
      for (size_t i = 0; i < s_pos.size(); ++i) {
        xs += tab.s_strides[i] * e.book[s_pos[i]]->symbol(ws[i], j);
      }
      double v = tab.logt[xs * ny + y[j]];
      if (v == kNegInf) return kNegInf;
      sum += v;
    }
    return sum;
  }

  void check_block(std::span<const int> y) const {
    if (static_cast<int>(y.size()) != block_length) {
      throw std::invalid_argument("output block has the wrong length");
    }
    for (int v : y) {
      if (v < 0 || v >= ny) {
        throw std::invalid_argument("output symbol out of range");
      }
    }
  }

  const RegionEntry& entry_for(const CodeIndexVector& g) const {
    auto it = entry_index.find(g);
    if (it == entry_index.end()) {
      throw std::invalid_argument("vector " + g.to_string() +
                                  " is not in the decode region");
    }
    return entries[it->second];
  }

  int uidx_for(const CodeIndexVector& v) const {
    auto it = uindex.find(v);
    if (it == uindex.end()) {
      throw std::invalid_argument("vector " + v.to_string() +
                                  " is not in the ensemble universe");
    }
    return it->second;
  }

  std::vector<int> decode_messages(std::span<const int> w_full,
                                   const RegionEntry& e) const {
    if (static_cast<int>(w_full.size()) != num_users) {
      throw std::invalid_argument("message tuple needs one entry per user");
    }
    std::vector<int> wd(d_users.size());
    for (size_t i = 0; i < d_users.size(); ++i) {
      wd[i] = w_full[d_users[i]];
      if (wd[i] < 0 || wd[i] >= e.counts[i]) {
        throw std::invalid_argument("message index out of range for user " +
                                    std::to_string(d_users[i]));
      }
    }
    return wd;
  }

  void check_competitor(const CodeIndexVector& g, const CodeIndexVector& gt,
                        UserSet subset) const {
    if (!set_subset_of(subset, dset)) {
      throw std::invalid_argument("subset must lie inside the decode set");
    }
    if (!options_match_on(g, gt, subset)) {
      throw std::invalid_argument(
          "vectors must pick identical options on the matched subset");
    }
    Zone z = zone[uidx_for(gt)];
    if (z == Zone::kRegion) {
      throw std::invalid_argument("competitor " + gt.to_string() +
                                  " is inside the region");
    }
    if (subset == dset && z == Zone::kMargin) {
      throw std::invalid_argument(
          "margin vectors have no full-agreement threshold test");
    }
  }

  const ReducedTable& table_for(int t_uidx, UserSet subset) const {
    return tables.at({t_uidx, subset});
  }

  std::vector<int> subset_positions(UserSet subset) const {
    std::vector<int> pos;
    for (int i = 0; i < static_cast<int>(d_users.size()); ++i) {
      if (set_contains(subset, d_users[i])) pos.push_back(i);
    }
    return pos;
  }

  static double combine_statistic(double log_lik, double base_sum_value,
                                  double alpha_term_tilde) {
    if (log_lik == kNegInf) return kNegInf;
    if (base_sum_value == kNegInf) return kPosInf;
    return log_lik - (base_sum_value - alpha_term_tilde);
  }

  double threshold_statistic(const CodeIndexVector& g,
                             const CodeIndexVector& gt, UserSet subset,
                             std::span<const int> w_full,
                             std::span<const int> y) const {
    check_block(y);
    const RegionEntry& e = entry_for(g);
    check_competitor(g, gt, subset);
    const int t_uidx = uidx_for(gt);
    const ReducedTable& tab = table_for(t_uidx, subset);
    std::vector<int> wd = decode_messages(w_full, e);
    std::vector<int> s_pos = subset_positions(subset);
    std::vector<int> ws(s_pos.size());
    for (size_t i = 0; i < s_pos.size(); ++i) ws[i] = wd[s_pos[i]];
    double ll = cand_log_lik(e, wd, y);
    double bs = base_sum(tab, e, s_pos, ws, y);
    return combine_statistic(ll, bs,
                             static_cast<double>(block_length) * alpha[t_uidx]);
  }

  // Maximum candidate log likelihood over the candidates under g that
  // match w_ref exactly on the subset positions and differ pairwise
  // from (w_ref, g_ref) on the remaining decoded users. -inf when the
  // pattern set is empty or every candidate has zero likelihood.
  double best_pattern_log_lik(const RegionEntry& e,
                              const CodeIndexVector& g_ref,
                              std::span<const int> w_ref, UserSet subset,
                              std::span<const int> y) const {
    const CodeIndexVector& ge = universe[e.uidx];
    const int nd = static_cast<int>(d_users.size());
    std::vector<std::vector<int>> choices(nd);
    for (int i = 0; i < nd; ++i) {
      const int k = d_users[i];
      if (set_contains(subset, k)) {
        choices[i] = {static_cast<int>(w_ref[k])};
      } else if (ge.options[k] != g_ref.options[k]) {
        choices[i].resize(e.counts[i]);
        for (int w = 0; w < e.counts[i]; ++w) choices[i][w] = w;
      } else {
        for (int w = 0; w < e.counts[i]; ++w) {
          if (w != w_ref[k]) choices[i].push_back(w);
        }
        if (choices[i].empty()) return kNegInf;
      }
    }
    std::vector<int> pick(nd, 0), wd(nd);
    double best = kNegInf;
    while (true) {
      for (int i = 0; i < nd; ++i) wd[i] = choices[i][pick[i]];
      best = std::max(best, cand_log_lik(e, wd, y));
      int i = nd - 1;
      while (i >= 0) {
        if (++pick[i] < static_cast<int>(choices[i].size())) break;
        pick[i] = 0;
        --i;
      }
      if (i < 0) break;
    }
    return best;
  }

  double misdetect_statistic(const CodeIndexVector& gt,
                             std::span<const int> w_full,
                             const CodeIndexVector& g, UserSet subset,
                             std::span<const int> y) const {
    check_block(y);
    const RegionEntry& e = entry_for(g);
    check_competitor(g, gt, subset);
    const int t_uidx = uidx_for(gt);
    const ReducedTable& tab = table_for(t_uidx, subset);
    if (static_cast<int>(w_full.size()) != num_users) {
      throw std::invalid_argument("message tuple needs one entry per user");
    }
    std::vector<int> s_pos = subset_positions(subset);
    std::vector<int> ws(s_pos.size());
    for (size_t i = 0; i < s_pos.size(); ++i) {
      const int k = d_users[s_pos[i]];
      ws[i] = w_full[k];
      if (ws[i] < 0 || ws[i] >= e.counts[s_pos[i]]) {
        throw std::invalid_argument("message index out of range for user " +
                                    std::to_string(k));
      }
    }
    double mll = best_pattern_log_lik(e, gt, w_full, subset, y);
    double bs = base_sum(tab, e, s_pos, ws, y);
    return combine_statistic(mll, bs,
                             static_cast<double>(block_length) * alpha[t_uidx]);
  }

  bool message_event(const CodeIndexVector& g, std::span<const int> w_full,
                     const CodeIndexVector& gt, UserSet subset,
                     std::span<const int> y) const {
    check_block(y);
    const RegionEntry& e = entry_for(g);
    const RegionEntry& et = entry_for(gt);
    if (subset == dset) {
      throw std::invalid_argument(
          "full-agreement message events are vacuous; use a proper subset");
    }
    if (!set_subset_of(subset, dset)) {
      throw std::invalid_argument("subset must lie inside the decode set");
    }
    if (!options_match_on(g, gt, subset)) {
      throw std::invalid_argument(
          "vectors must pick identical options on the matched subset");
    }
    std::vector<int> wd = decode_messages(w_full, e);
    double true_ll = cand_log_lik(e, wd, y);
    double rival = best_pattern_log_lik(et, g, w_full, subset, y);
    return rival >= true_ll;
  }

  DecodeOutcome run_decode(std::span<const int> y) const {
    check_block(y);
    double best = kNegInf;
    std::vector<std::pair<std::vector<int>, std::vector<int>>> outputs;
    std::vector<int> wd(d_users.size());
    std::vector<int> ws;
    for (const RegionEntry& e : entries) {
      // Collapse each test group to one bar per subset-message index:
      // a candidate passes the group iff it exceeds the largest rival
      // threshold.
      std::vector<std::vector<double>> group_rhs(e.groups.size());
      for (size_t gi = 0; gi < e.groups.size(); ++gi) {
        const TestGroup& grp = e.groups[gi];
        const long long nws = grp.ws_radix.size();
        group_rhs[gi].assign(nws, kNegInf);
        ws.resize(grp.s_pos.size());
        for (long long wsi = 0; wsi < nws; ++wsi) {
          grp.ws_radix.decode(wsi, ws);
          double bar = kNegInf;
          for (const Test& t : grp.tests) {
            double b = base_sum(*t.table, e, grp.s_pos, ws, y);
            if (b == kNegInf) continue;
            bar = std::max(bar, t.rhs_const + b);
          }
          group_rhs[gi][wsi] = bar;
        }
      }
      for (long long wi = 0; wi < e.wradix.size(); ++wi) {
        e.wradix.decode(wi, wd);
        double ll = cand_log_lik(e, wd, y);
        if (ll == kNegInf || ll < best) continue;
        bool pass = true;
        for (size_t gi = 0; gi < e.groups.size() && pass; ++gi) {
          const TestGroup& grp = e.groups[gi];
          ws.resize(grp.s_pos.size());
          for (size_t i = 0; i < grp.s_pos.size(); ++i) {
            ws[i] = wd[grp.s_pos[i]];
          }
          if (!(ll > group_rhs[gi][grp.ws_radix.index(ws)])) pass = false;
        }
        if (!pass) continue;
        if (ll > best) {
          best = ll;
          outputs.clear();
          outputs.emplace_back(wd, e.output_options);
        } else {
          // exact tie; distinct outputs collide, identical ones merge
          std::pair<std::vector<int>, std::vector<int>> proj(wd,
                                                             e.output_options);
          if (std::find(outputs.begin(), outputs.end(), proj) ==
              outputs.end()) {
            outputs.push_back(std::move(proj));
          }
        }
      }
    }
    DecodeOutcome out;
    if (outputs.size() == 1) {
      out.collision = false;
      out.messages = std::move(outputs.front().first);
      out.options = std::move(outputs.front().second);
    }
    return out;
  }
};

Decoder::Decoder(const ChannelModel& channel, const CodeEnsemble& ensemble,
                 const CodebookSet& codebooks, const OperationConfig& config,
                 const ThresholdPolicy& policy, const WeightAssignment& weights)
    : impl_(std::make_unique<Impl>(channel, ensemble, codebooks, config,
                                   policy, weights)) {}

Decoder::~Decoder() = default;

const Decoder::Impl& Decoder::impl() const { return *impl_; }

DecodeOutcome Decoder::decode(std::span<const int> y) const {
  return impl_->run_decode(y);
}

double Decoder::threshold_statistic(const CodeIndexVector& g_actual,
                                    const CodeIndexVector& g_tilde,
                                    UserSet subset,
                                    std::span<const int> w_actual,
                                    std::span<const int> y) const {
  return impl_->threshold_statistic(g_actual, g_tilde, subset, w_actual, y);
}

double Decoder::misdetect_statistic(const CodeIndexVector& g_tilde_actual,
                                    std::span<const int> w_actual,
                                    const CodeIndexVector& g_region,
                                    UserSet subset,
                                    std::span<const int> y) const {
  return impl_->misdetect_statistic(g_tilde_actual, w_actual, g_region, subset,
                                    y);
}

bool Decoder::message_event(const CodeIndexVector& g_actual,
                            std::span<const int> w_actual,
                            const CodeIndexVector& g_tilde, UserSet subset,
                            std::span<const int> y) const {
  return impl_->message_event(g_actual, w_actual, g_tilde, subset, y);
}

bool Decoder::threshold_event(const CodeIndexVector& g_actual,
                              std::span<const int> w_actual,
                              const CodeIndexVector& g_tilde, UserSet subset,
                              std::span<const int> y) const {
  double stat = impl_->threshold_statistic(g_actual, g_tilde, subset, w_actual,
                                           y);
  double t = impl_->policy.offset_of(g_actual, g_tilde, subset);
  return stat <= -static_cast<double>(impl_->block_length) * t;
}

bool Decoder::misdetect_event(const CodeIndexVector& g_tilde_actual,
                              std::span<const int> w_actual,
                              const CodeIndexVector& g_region, UserSet subset,
                              std::span<const int> y) const {
  double stat = impl_->misdetect_statistic(g_tilde_actual, w_actual, g_region,
                                           subset, y);
  double t = impl_->policy.offset_of(g_region, g_tilde_actual, subset);
  return stat > -static_cast<double>(impl_->block_length) * t;
}

ErrorMode parse_error_mode(const std::string& token) {
  if (token == "eq1") return ErrorMode::LenientTwoZone;
  if (token == "eq6") return ErrorMode::StrictTwoZone;
  if (token == "eq10") return ErrorMode::DecodeSetThreeZone;
  if (token == "eq12") return ErrorMode::AnchorThreeZone;
  throw std::invalid_argument("unknown error mode '" + token +
                              "', expected eq1, eq6, eq10 or eq12");
}

std::string to_string(ErrorMode mode) {
  switch (mode) {
    case ErrorMode::LenientTwoZone:
      return "eq1";
    case ErrorMode::StrictTwoZone:
      return "eq6";
    case ErrorMode::DecodeSetThreeZone:
      return "eq10";
    case ErrorMode::AnchorThreeZone:
      return "eq12";
  }
  throw std::invalid_argument("bad error mode value");
}

int mode_index(ErrorMode mode) { return static_cast<int>(mode); }

bool classify_trial(const std::vector<int>& w, const CodeIndexVector& g,
                    const DecodeOutcome& outcome,
                    const OperationConfig& config, ErrorMode mode) {
  const std::vector<int> d_users = set_members(config.decode_set);
  if (mode != ErrorMode::DecodeSetThreeZone &&
      !set_contains(config.decode_set, 0)) {
    throw std::invalid_argument(
        "anchor-based error accounting needs user 0 in the decode set");
  }
  const bool in_region = config.region.contains(g);
  const bool in_margin = config.margin.contains(g);
  const bool decoded = outcome.decoded();
  bool exact = false;
  bool anchor_ok = false;
  if (decoded) {
    if (outcome.messages.size() != d_users.size() ||
        outcome.options.size() != d_users.size()) {
      throw std::invalid_argument("outcome arity does not match the decode set");
    }
    exact = true;
    for (size_t i = 0; i < d_users.size(); ++i) {
      if (w.at(d_users[i]) != outcome.messages[i] ||
          g.options.at(d_users[i]) != outcome.options[i]) {
        exact = false;
        break;
      }
    }
    anchor_ok = !d_users.empty() && d_users[0] == 0 &&
                outcome.messages[0] == w.at(0) &&
                outcome.options[0] == g.options.at(0);
  }
  switch (mode) {
    case ErrorMode::DecodeSetThreeZone:
      if (in_region) return !exact;
      if (in_margin) return decoded && !exact;
      return decoded;
    case ErrorMode::AnchorThreeZone:
      if (in_region) return !anchor_ok;
      if (in_margin) return decoded && !anchor_ok;
      return decoded;
    case ErrorMode::LenientTwoZone:
      if (in_region) return !anchor_ok;
      return decoded && !anchor_ok;
    case ErrorMode::StrictTwoZone:
      if (in_region) return !anchor_ok;
      return decoded;
  }
  throw std::invalid_argument("bad error mode value");
}

SimulationReport run_monte_carlo(const ChannelModel& channel,
                                 const CodeEnsemble& ensemble,
                                 const OperationConfig& config,
                                 const ThresholdPolicy& policy,
                                 const WeightAssignment& weights,
                                 const MonteCarloOptions& options) {
  if (options.trials < 1) {
    throw std::invalid_argument("trial count must be positive");
  }
  CodebookSet books = generate_codebooks(ensemble, weights.blocklength,
                                         options.seed, options.max_codewords);
  Decoder dec(channel, ensemble, books, config, policy, weights);
  std::vector<CodeIndexVector> universe = enumerate_vectors(ensemble);
  std::map<CodeIndexVector, int> uindex;
  for (int i = 0; i < static_cast<int>(universe.size()); ++i) {
    uindex.emplace(universe[i], i);
  }
  std::vector<CodeIndexVector> selected =
      options.vectors ? *options.vectors : universe;
  for (const CodeIndexVector& g : selected) {
    if (!uindex.count(g)) {
      throw std::invalid_argument("vector " + g.to_string() +
                                  " is not in the ensemble universe");
    }
  }
  const int num_users = channel.num_users;
  const int n = weights.blocklength;
  const bool have_anchor = set_contains(config.decode_set, 0);
  std::array<bool, kNumErrorModes> computable{};
  for (int m = 0; m < kNumErrorModes; ++m) {
    ErrorMode em = static_cast<ErrorMode>(m);
    computable[m] = em == ErrorMode::DecodeSetThreeZone || have_anchor;
  }
  if (!computable[mode_index(options.mode)]) {
    throw std::invalid_argument(
        "selected error mode needs user 0 in the decode set");
  }

  SimulationReport report;
  report.block_length = n;
  report.seed = options.seed;
  report.mode = options.mode;
  report.decode_set = config.decode_set;
  report.trials_per_vector = options.trials;
  report.exact = false;
  report.message_average = true;
  report.covers_universe = VectorSet(selected).items() == universe;

  MixedRadix xradix = channel.input_radix();
  const int threads = std::max(1, options.threads);

  struct Tally {
    std::array<long long, kNumErrorModes> mode_errors{};
    long long collisions = 0;
  };

  for (const CodeIndexVector& g : selected) {
    const int uidx = uindex.at(g);
    std::vector<long long> counts(num_users);
    for (int k = 0; k < num_users; ++k) {
      counts[k] = books.book(k, g.options[k]).num_codewords;
    }
    std::vector<TrialRecord> vec_records(
        options.keep_records ? static_cast<size_t>(options.trials) : 0);

    auto worker = [&](long long t0, long long t1, Tally* tally) {
      std::vector<int> w(num_users), digits(num_users), y(n);
      for (long long t = t0; t < t1; ++t) {
        std::mt19937_64 rng(derive_seed(
            options.seed, {kTrialStream, static_cast<std::uint64_t>(uidx),
                           static_cast<std::uint64_t>(t)}));
        for (int k = 0; k < num_users; ++k) {
          w[k] = static_cast<int>(draw_index(rng, counts[k]));
        }
        for (int j = 0; j < n; ++j) {
          for (int k = 0; k < num_users; ++k) {
            digits[k] = books.book(k, g.options[k]).symbol(w[k], j);
          }
          y[j] = sample_output(channel, g.interferer, xradix.index(digits), rng);
        }
        DecodeOutcome out = dec.decode(y);
        for (int m = 0; m < kNumErrorModes; ++m) {
          if (computable[m] &&
              classify_trial(w, g, out, config, static_cast<ErrorMode>(m))) {
            ++tally->mode_errors[m];
          }
        }
        if (out.collision) ++tally->collisions;
        if (options.keep_records) {
          vec_records[t] = TrialRecord{g, w, y, out};
        }
      }
    };

    Tally total;
    if (threads == 1) {
      worker(0, options.trials, &total);
    } else {
      std::vector<Tally> partial(threads);
      std::vector<std::thread> pool;
      const long long q = options.trials / threads;
      const long long r = options.trials % threads;
      long long start = 0;
      for (int i = 0; i < threads; ++i) {
        long long len = q + (i < r ? 1 : 0);
        pool.emplace_back(worker, start, start + len, &partial[i]);
        start += len;
      }
      for (auto& th : pool) th.join();
      for (const Tally& p : partial) {
        for (int m = 0; m < kNumErrorModes; ++m) {
          total.mode_errors[m] += p.mode_errors[m];
        }
        total.collisions += p.collisions;
      }
    }

    VectorStats st;
    st.g = g;
    st.zone = config.region.contains(g)   ? "region"
              : config.margin.contains(g) ? "margin"
                                          : "outside";
    st.alpha = weights.alpha_of(g);
    st.trials = options.trials;
    for (int m = 0; m < kNumErrorModes; ++m) {
      st.mode_errors[m] = computable[m] ? total.mode_errors[m] : -1;
    }
    st.collisions = total.collisions;
    st.collision_rate =
        static_cast<double>(total.collisions) / options.trials;
    st.p_error = static_cast<double>(total.mode_errors[mode_index(options.mode)]) /
                 options.trials;
    wilson_interval(st.p_error, options.trials, &st.ci_low, &st.ci_high);
    st.exact_error_max.fill(-1.0);
    st.exact_error_avg.fill(-1.0);
    report.per_vector.push_back(st);
    report.weighted_error_sum +=
        st.p_error * std::exp(-static_cast<double>(n) * st.alpha);
    if (options.keep_records) {
      for (auto& rec : vec_records) report.records.push_back(std::move(rec));
    }
  }

  if (options.attach_bound) {
    report.analytic_decoder_bound =
        decoder_gep_bound(channel, ensemble, config.decode_set, config.region,
                          config.margin, weights)
            .total;
  }
  return report;
}

SimulationReport exact_oracle(const ChannelModel& channel,
                              const CodeEnsemble& ensemble,
                              const OperationConfig& config,
                              const ThresholdPolicy& policy,
                              const WeightAssignment& weights,
                              const OracleOptions& options) {
  CodebookSet books = generate_codebooks(ensemble, weights.blocklength,
                                         options.seed, options.max_codewords);
  Decoder dec(channel, ensemble, books, config, policy, weights);
  std::vector<CodeIndexVector> universe = enumerate_vectors(ensemble);
  const int num_users = channel.num_users;
  const int n = weights.blocklength;
  const int ny = channel.output_alphabet_size;
  const bool have_anchor = set_contains(config.decode_set, 0);
  std::array<bool, kNumErrorModes> computable{};
  for (int m = 0; m < kNumErrorModes; ++m) {
    ErrorMode em = static_cast<ErrorMode>(m);
    computable[m] = em == ErrorMode::DecodeSetThreeZone || have_anchor;
  }
  if (!computable[mode_index(options.mode)]) {
    throw std::invalid_argument(
        "selected error mode needs user 0 in the decode set");
  }

  double y_count_d = 1.0;
  for (int j = 0; j < n; ++j) y_count_d *= ny;
  auto tuple_count = [&](const CodeIndexVector& g) {
    double tuples = 1.0;
    for (int k = 0; k < num_users; ++k) {
      tuples *= static_cast<double>(books.book(k, g.options[k]).num_codewords);
    }
    return tuples;
  };
  double main_terms = 0.0;
  for (const CodeIndexVector& g : universe) {
    main_terms += tuple_count(g) * y_count_d;
  }
  double event_terms = 0.0;
  const UserSet d = config.decode_set;
  std::vector<UserSet> subs = submasks_ascending(d);
  if (options.events) {
    for (const CodeIndexVector& g : config.region) {
      for (UserSet s : subs) {
        for (const CodeIndexVector& t : universe) {
          if (!options_match_on(g, t, s)) continue;
          if (config.region.contains(t)) {
            if (s != d) event_terms += tuple_count(g) * y_count_d;
          } else if (!(s == d && config.margin.contains(t))) {
            event_terms += (tuple_count(g) + tuple_count(t)) * y_count_d;
          }
        }
      }
    }
  }
  if (main_terms + event_terms > static_cast<double>(options.term_cap)) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "exact enumeration needs %.3g terms, cap is %lld",
                  main_terms + event_terms,
                  static_cast<long long>(options.term_cap));
    throw std::invalid_argument(buf);
  }
  const long long y_count = static_cast<long long>(y_count_d);

  // decode each output block exactly once; blocks map to compact
  // outcome ids (0 is the collision report)
  std::vector<int> ids(y_count);
  std::vector<DecodeOutcome> outcome_list(1);
  std::map<std::pair<std::vector<int>, std::vector<int>>, int> outcome_id;
  {
    std::vector<int> y(n, 0);
    long long yi = 0;
    do {
      DecodeOutcome out = dec.decode(y);
      if (out.collision) {
        ids[yi] = 0;
      } else {
        auto key = std::make_pair(out.messages, out.options);
        auto it = outcome_id.find(key);
        if (it == outcome_id.end()) {
          it = outcome_id.emplace(key, static_cast<int>(outcome_list.size()))
                   .first;
          outcome_list.push_back(out);
        }
        ids[yi] = it->second;
      }
      ++yi;
    } while (advance_block(y, ny));
  }

  SimulationReport report;
  report.block_length = n;
  report.seed = options.seed;
  report.mode = options.mode;
  report.decode_set = config.decode_set;
  report.trials_per_vector = 0;
  report.exact = true;
  report.message_average = false;
  report.covers_universe = true;

  MixedRadix xradix = channel.input_radix();
  for (const CodeIndexVector& g : universe) {
    std::vector<int> counts(num_users);
    for (int k = 0; k < num_users; ++k) {
      counts[k] = static_cast<int>(books.book(k, g.options[k]).num_codewords);
    }
    MixedRadix wradix(counts);
    std::array<double, kNumErrorModes> best{}, sum{};
    double coll_sum = 0.0;
    std::vector<int> w(num_users), digits(num_users), y(n);
    std::vector<long long> xseq(n);
    // error flags per outcome id, rebuilt for each message tuple:
    // bit m set when mode m calls it an error, bit 6 when cached
    std::vector<unsigned char> flag_cache;
    for (long long wi = 0; wi < wradix.size(); ++wi) {
      wradix.decode(wi, w);
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < num_users; ++k) {
          digits[k] = books.book(k, g.options[k]).symbol(w[k], j);
        }
        xseq[j] = xradix.index(digits);
      }
      flag_cache.assign(outcome_list.size(), 0);
      std::array<double, kNumErrorModes> acc{};
      double coll = 0.0;
      std::fill(y.begin(), y.end(), 0);
      long long yi = 0;
      do {
        double pr = 1.0;
        for (int j = 0; j < n && pr > 0.0; ++j) {
          pr *= channel.emission_prob_indexed(g.interferer, xseq[j], y[j]);
        }
        if (pr > 0.0) {
          const int id = ids[yi];
          unsigned char f = flag_cache[id];
          if (!(f & 0x40)) {
            f = 0x40;
            for (int m = 0; m < kNumErrorModes; ++m) {
              if (computable[m] &&
                  classify_trial(w, g, outcome_list[id], config,
                                 static_cast<ErrorMode>(m))) {
                f = static_cast<unsigned char>(f | (1u << m));
              }
            }
            flag_cache[id] = f;
          }
          for (int m = 0; m < kNumErrorModes; ++m) {
            if (f & (1u << m)) acc[m] += pr;
          }
          if (outcome_list[id].collision) coll += pr;
        }
        ++yi;
      } while (advance_block(y, ny));
      for (int m = 0; m < kNumErrorModes; ++m) {
        sum[m] += acc[m];
        best[m] = std::max(best[m], acc[m]);
      }
      coll_sum += coll;
    }
    VectorStats st;
    st.g = g;
    st.zone = config.region.contains(g)   ? "region"
              : config.margin.contains(g) ? "margin"
                                          : "outside";
    st.alpha = weights.alpha_of(g);
    st.trials = 0;
    st.mode_errors.fill(-1);
    st.collisions = -1;
    const double tuples = static_cast<double>(wradix.size());
    for (int m = 0; m < kNumErrorModes; ++m) {
      st.exact_error_max[m] = computable[m] ? best[m] : -1.0;
      st.exact_error_avg[m] = computable[m] ? sum[m] / tuples : -1.0;
    }
    st.collision_rate = coll_sum / tuples;
    st.p_error = st.exact_error_max[mode_index(options.mode)];
    st.ci_low = st.p_error;
    st.ci_high = st.p_error;
    report.per_vector.push_back(st);
    report.weighted_error_sum +=
        st.p_error * std::exp(-static_cast<double>(n) * st.alpha);
  }

  if (options.events) {
    for (const CodeIndexVector& g : config.region) {
      for (UserSet s : subs) {
        for (const CodeIndexVector& t : universe) {
          if (!options_match_on(g, t, s)) continue;
          if (config.region.contains(t)) {
            if (s == d) continue;
            EventProbability ev;
            ev.g = g;
            ev.g_tilde = t;
            ev.subset = s;
            ev.kind = ExponentKind::WrongMessage;
            double hit = 0.0;
            long long tuples = for_each_block(
                channel, books, g, n,
                [&](const std::vector<int>& w, const std::vector<int>& y,
                    double pr) {
                  if (pr > 0.0 && dec.message_event(g, w, t, s, y)) hit += pr;
                });
            ev.p_message = hit / static_cast<double>(tuples);
            report.events.push_back(ev);
          } else {
            if (s == d && config.margin.contains(t)) continue;
            EventProbability ev;
            ev.g = g;
            ev.g_tilde = t;
            ev.subset = s;
            ev.kind = s == d ? ExponentKind::MisdetectFull
                             : ExponentKind::MisdetectSubset;
            double hit_t = 0.0;
            long long tuples_g = for_each_block(
                channel, books, g, n,
                [&](const std::vector<int>& w, const std::vector<int>& y,
                    double pr) {
                  if (pr > 0.0 && dec.threshold_event(g, w, t, s, y)) {
                    hit_t += pr;
                  }
                });
            ev.p_threshold = hit_t / static_cast<double>(tuples_g);
            double hit_i = 0.0;
            long long tuples_t = for_each_block(
                channel, books, t, n,
                [&](const std::vector<int>& w, const std::vector<int>& y,
                    double pr) {
                  if (pr > 0.0 && dec.misdetect_event(t, w, g, s, y)) {
                    hit_i += pr;
                  }
                });
            ev.p_misdetect = hit_i / static_cast<double>(tuples_t);
            report.events.push_back(ev);
          }
        }
      }
    }
  }

  if (options.attach_bound) {
    report.analytic_decoder_bound =
        decoder_gep_bound(channel, ensemble, config.decode_set, config.region,
                          config.margin, weights)
            .total;
  }
  return report;
}

EventRateEstimate estimate_event_rates(const Decoder& decoder,
                                       std::span<const TrialRecord> records,
                                       const CodeIndexVector& g,
                                       const CodeIndexVector& g_tilde,
                                       UserSet subset) {
  const Decoder::Impl& im = decoder.impl();
  const bool rival_in_region =
      im.zone[im.uidx_for(g_tilde)] == Decoder::Impl::Zone::kRegion;
  EventRateEstimate out;
  for (const TrialRecord& rec : records) {
    if (rec.g == g) {
      if (rival_in_region) {
        ++out.message_trials;
        if (decoder.message_event(g, rec.w, g_tilde, subset, rec.y)) {
          ++out.message_hits;
        }
      } else {
        ++out.threshold_trials;
        if (decoder.threshold_event(g, rec.w, g_tilde, subset, rec.y)) {
          ++out.threshold_hits;
        }
      }
    }
    if (!rival_in_region && rec.g == g_tilde) {
      ++out.misdetect_trials;
      if (decoder.misdetect_event(g_tilde, rec.w, g, subset, rec.y)) {
        ++out.misdetect_hits;
      }
    }
  }
  return out;
}

ThresholdPolicy tune_policy(const ChannelModel& channel,
                            const CodeEnsemble& ensemble,
                            const OperationConfig& config,
                            const WeightAssignment& weights,
                            const CodebookSet& codebooks,
                            const TuneOptions& options) {
  std::vector<ThresholdKey> keys = enumerate_threshold_tests(ensemble, config);
  ThresholdPolicy zero;
  for (const ThresholdKey& key : keys) {
    zero.set(key.g, key.g_tilde, key.subset, 0.0);
  }
  Decoder dec(channel, ensemble, codebooks, config, zero, weights);
  const int num_users = channel.num_users;
  const int n = weights.blocklength;
  const int ny = channel.output_alphabet_size;
  MixedRadix xradix = channel.input_radix();
  double y_count_d = 1.0;
  for (int j = 0; j < n; ++j) y_count_d *= ny;
  auto tuple_count = [&](const CodeIndexVector& g) {
    double tuples = 1.0;
    for (int k = 0; k < num_users; ++k) {
      tuples *=
          static_cast<double>(codebooks.book(k, g.options[k]).num_codewords);
    }
    return tuples;
  };

  ThresholdPolicy out;
  using Sample = std::pair<double, double>;  // (statistic value, weight)
  std::vector<Sample> fail_side, pass_side;
  for (size_t ki = 0; ki < keys.size(); ++ki) {
    const ThresholdKey& key = keys[ki];
    const double alpha_g = weights.alpha_of(key.g);
    const double alpha_t = weights.alpha_of(key.g_tilde);
    const double weight_g = std::exp(-static_cast<double>(n) * alpha_g);
    const double weight_t = std::exp(-static_cast<double>(n) * alpha_t);
    fail_side.clear();
    pass_side.clear();

    const double exact_cost =
        (tuple_count(key.g) + tuple_count(key.g_tilde)) * y_count_d;
    if (exact_cost <= static_cast<double>(options.exact_term_cap)) {
      long long tuples_g = for_each_block(
          channel, codebooks, key.g, n,
          [&](const std::vector<int>& w, const std::vector<int>& y,
              double pr) {
            if (pr <= 0.0) return;
            fail_side.emplace_back(
                dec.threshold_statistic(key.g, key.g_tilde, key.subset, w, y),
                pr);
          });
      for (Sample& s : fail_side) s.second /= static_cast<double>(tuples_g);
      long long tuples_t = for_each_block(
          channel, codebooks, key.g_tilde, n,
          [&](const std::vector<int>& w, const std::vector<int>& y,
              double pr) {
            if (pr <= 0.0) return;
            pass_side.emplace_back(
                dec.misdetect_statistic(key.g_tilde, w, key.g, key.subset, y),
                pr);
          });
      for (Sample& s : pass_side) s.second /= static_cast<double>(tuples_t);
    } else {
      for (int side = 0; side < 2; ++side) {
        const CodeIndexVector& actual = side ? key.g_tilde : key.g;
        std::vector<long long> counts(num_users);
        for (int k = 0; k < num_users; ++k) {
          counts[k] = codebooks.book(k, actual.options[k]).num_codewords;
        }
        std::vector<int> w(num_users), digits(num_users), y(n);
        const double wt = 1.0 / static_cast<double>(options.calibration_trials);
        for (long long t = 0; t < options.calibration_trials; ++t) {
          std::mt19937_64 rng(derive_seed(
              options.seed,
              {kTuneStream, static_cast<std::uint64_t>(ki),
               static_cast<std::uint64_t>(side), static_cast<std::uint64_t>(t)}));
          for (int k = 0; k < num_users; ++k) {
            w[k] = static_cast<int>(draw_index(rng, counts[k]));
          }
          for (int j = 0; j < n; ++j) {
            for (int k = 0; k < num_users; ++k) {
              digits[k] = codebooks.book(k, actual.options[k]).symbol(w[k], j);
            }
            y[j] = sample_output(channel, actual.interferer,
                                 xradix.index(digits), rng);
          }
          if (side == 0) {
            fail_side.emplace_back(
                dec.threshold_statistic(key.g, key.g_tilde, key.subset, w, y),
                wt);
          } else {
            pass_side.emplace_back(
                dec.misdetect_statistic(key.g_tilde, w, key.g, key.subset, y),
                wt);
          }
        }
      }
    }

    double lo = kPosInf, hi = -kPosInf;
    for (const Sample& s : fail_side) {
      if (std::isfinite(s.first)) {
        lo = std::min(lo, s.first);
        hi = std::max(hi, s.first);
      }
    }
    for (const Sample& s : pass_side) {
      if (std::isfinite(s.first)) {
        lo = std::min(lo, s.first);
        hi = std::max(hi, s.first);
      }
    }
    if (!(lo <= hi)) {
      out.set(key.g, key.g_tilde, key.subset, 0.0);
      continue;
    }
    lo -= 1.0;
    hi += 1.0;
    const int grid = std::max(2, options.offset_grid);
    double best_theta = lo;
    double best_obj = kPosInf;
    for (int i = 0; i < grid; ++i) {
      const double theta = lo + (hi - lo) * i / (grid - 1);
      double obj = 0.0;
      for (const Sample& s : fail_side) {
        if (s.first <= theta) obj += weight_g * s.second;
      }
      for (const Sample& s : pass_side) {
        if (s.first > theta) obj += weight_t * s.second;
      }
      if (obj < best_obj) {
        best_obj = obj;
        best_theta = theta;
      }
    }
    // the decoder's test passes iff statistic > -N * offset
    out.set(key.g, key.g_tilde, key.subset,
            -best_theta / static_cast<double>(n));
  }
  return out;
}

}  // namespace dmac
