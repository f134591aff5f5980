#include "dmac/exponents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dmac {

std::string to_string(ExponentKind kind) {
  switch (kind) {
    case ExponentKind::WrongMessage: return "wrong-message";
    case ExponentKind::MisdetectSubset: return "misdetect-subset";
    case ExponentKind::MisdetectFull: return "misdetect-full";
  }
  return "unknown";
}

MarginalChannel make_decode_marginal(const ChannelModel& channel,
                                     const CodeEnsemble& ensemble,
                                     const CodeIndexVector& g,
                                     UserSet decode_set) {
  require_vector_in_ensemble(ensemble, g);
  UserSet full = full_set(channel.num_users);
  if (decode_set == 0 || !set_subset_of(decode_set, full))
    throw std::invalid_argument("decode set must be a nonempty user subset");

  MarginalChannel out;
  out.decode_users = set_members(decode_set);
  for (int k : out.decode_users)
    out.sizes.push_back(channel.input_alphabet_sizes[k]);
  out.output_size = channel.output_alphabet_size;

  MixedRadix full_radix = channel.input_radix();
  MixedRadix d_radix(out.sizes);
  out.table.assign(d_radix.size() * out.output_size, 0.0);

  std::vector<int> digits(channel.num_users);
  std::vector<int> d_digits(out.decode_users.size());
  for (long long x = 0; x < full_radix.size(); ++x) {
    full_radix.decode(x, digits);
    double w = 1.0;
    for (int k = 0; k < channel.num_users; ++k) {
      if (set_contains(decode_set, k)) continue;
      w *= ensemble.option(k, g.options[k]).input_dist[digits[k]];
    }
    if (w == 0.0) continue;
    for (size_t i = 0; i < out.decode_users.size(); ++i)
      d_digits[i] = digits[out.decode_users[i]];
    long long xd = d_radix.index(d_digits);
    const double* row = channel.row(g.interferer, x);
    for (int y = 0; y < out.output_size; ++y)
      out.table[xd * out.output_size + y] += w * row[y];
  }
  return out;
}

void validate_query(const ExponentQuery& query) {
  if (!query.channel || !query.ensemble)
    throw std::invalid_argument("query needs a channel and an ensemble");
  const ChannelModel& ch = *query.channel;
  const CodeEnsemble& en = *query.ensemble;
  if (ch.num_users != en.num_users())
    throw std::invalid_argument("channel and ensemble user counts differ");
  UserSet full = full_set(ch.num_users);
  if (query.decode_set == 0 || !set_subset_of(query.decode_set, full))
    throw std::invalid_argument("decode set must be a nonempty user subset");
  if (!set_subset_of(query.subset, query.decode_set))
    throw std::invalid_argument("subset must lie inside the decode set");
  if (query.kind == ExponentKind::MisdetectFull) {
    if (query.subset != query.decode_set)
      throw std::invalid_argument(
          "full-match misdetection requires subset == decode set");
  } else {
    if (query.subset == query.decode_set)
      throw std::invalid_argument(
          "subset must be a proper subset of the decode set");
  }
  require_vector_in_ensemble(en, query.g);
  require_vector_in_ensemble(en, query.g_tilde);
  if (!options_match_on(query.g, query.g_tilde, query.subset))
    throw std::invalid_argument(
        "vectors must pick identical options on the matched subset");
  if (!(query.alpha_g >= 0.0) || !(query.alpha_g_tilde >= 0.0))
    throw std::invalid_argument("weight exponents must be nonnegative");
}

namespace {

// Per-query tables shared by all objective evaluations. The decoded-user
// inputs are split into the matched part (x_S) and the free part
// (x_{D minus S}); both marginal channels are indexed by the combined
// decode input.
class Evaluator {
 public:
  explicit Evaluator(const ExponentQuery& q) : query_(q) {
    validate_query(q);
    const ChannelModel& ch = *q.channel;
    const CodeEnsemble& en = *q.ensemble;

    MarginalChannel marg_g =
        make_decode_marginal(ch, en, q.g, q.decode_set);
    MarginalChannel marg_gt =
        make_decode_marginal(ch, en, q.g_tilde, q.decode_set);
    ny_ = marg_g.output_size;

    std::vector<int> d_users = set_members(q.decode_set);
    std::vector<long long> d_strides(d_users.size());
    {
      long long stride = 1;
      for (int i = static_cast<int>(d_users.size()) - 1; i >= 0; --i) {
        d_strides[i] = stride;
        stride *= ch.input_alphabet_sizes[d_users[i]];
      }
    }

    std::vector<int> s_users, rest_users;
    std::vector<long long> s_strides, rest_strides;
    for (size_t i = 0; i < d_users.size(); ++i) {
      if (set_contains(q.subset, d_users[i])) {
        s_users.push_back(d_users[i]);
        s_strides.push_back(d_strides[i]);
      } else {
        rest_users.push_back(d_users[i]);
        rest_strides.push_back(d_strides[i]);
      }
    }

    auto part_tables = [&ch](const std::vector<int>& users,
                             const std::vector<long long>& strides,
                             const CodeIndexVector& g, const CodeEnsemble& en,
                             std::vector<long long>* base,
                             std::vector<double>* weight) {
      std::vector<int> sizes;
      for (int k : users) sizes.push_back(ch.input_alphabet_sizes[k]);
      MixedRadix radix(sizes);
      base->assign(radix.size(), 0);
      weight->assign(radix.size(), 1.0);
      std::vector<int> digits(users.size());
      for (long long i = 0; i < radix.size(); ++i) {
        radix.decode(i, digits);
        long long b = 0;
        double w = 1.0;
        for (size_t j = 0; j < users.size(); ++j) {
          b += strides[j] * digits[j];
          w *= en.option(users[j], g.options[users[j]]).input_dist[digits[j]];
        }
        (*base)[i] = b;
        (*weight)[i] = w;
      }
    };

    part_tables(s_users, s_strides, q.g, en, &s_base_, &w_s_);
    part_tables(rest_users, rest_strides, q.g, en, &rest_base_, &w_rest_g_);
    part_tables(rest_users, rest_strides, q.g_tilde, en, &rest_base_,
                &w_rest_gt_);

    log_w_rest_g_ = to_log(w_rest_g_);
    log_w_rest_gt_ = to_log(w_rest_gt_);

    long long nd = marg_g.num_inputs();
    logbase_g_.assign(nd * ny_, kNegInf);
    logbase_gt_.assign(nd * ny_, kNegInf);
    for (long long xd = 0; xd < nd; ++xd) {
      for (int y = 0; y < ny_; ++y) {
        double pg = marg_g.prob(xd, y);
        double pt = marg_gt.prob(xd, y);
        if (pg > 0.0) logbase_g_[xd * ny_ + y] = std::log(pg) - q.alpha_g;
        if (pt > 0.0)
          logbase_gt_[xd * ny_ + y] = std::log(pt) - q.alpha_g_tilde;
      }
    }

    rate_rest_g_ = rate_rest_gt_ = 0.0;
    for (int k : rest_users) {
      rate_rest_g_ += en.option(k, q.g.options[k]).rate_nats;
      rate_rest_gt_ += en.option(k, q.g_tilde.options[k]).rate_nats;
    }
  }

  // -rho * sum of competing rates + the tilted log-sum term. The inner
  // bracket over the free decoded inputs runs in log domain; exponent 0
  // against a zero base counts as 1 (the 0^0 = 1 convention).
  double wrong_message(double rho, double s) const {
    check_rho_s(rho, s, 1.0);
    double sum = 0.0;
    for (int y = 0; y < ny_; ++y) {
      for (size_t xs = 0; xs < w_s_.size(); ++xs) {
        if (w_s_[xs] == 0.0) continue;
        double f1 = bracket(logbase_g_, log_w_rest_g_, s_base_[xs], y, 1.0 - s);
        double f2 =
            bracket(logbase_gt_, log_w_rest_gt_, s_base_[xs], y, s / rho);
        if (f1 == kNegInf || f2 == kNegInf) continue;
        sum += w_s_[xs] * std::exp(f1 + rho * f2);
      }
    }
    return -rho * rate_rest_gt_ - std::log(sum);
  }

  double misdetect_subset(double rho, double s) const {
    check_rho_s(rho, s, 1.0 - rho);
    double sum = 0.0;
    for (int y = 0; y < ny_; ++y) {
      for (size_t xs = 0; xs < w_s_.size(); ++xs) {
        if (w_s_[xs] == 0.0) continue;
        double f1 = bracket(logbase_g_, log_w_rest_g_, s_base_[xs], y,
                            s / (s + rho));
        double f2 = bracket(logbase_gt_, log_w_rest_gt_, s_base_[xs], y, 1.0);
        if (f1 == kNegInf || f2 == kNegInf) continue;
        sum += w_s_[xs] * std::exp((s + rho) * f1 + (1.0 - s) * f2);
      }
    }
    return -rho * rate_rest_g_ - std::log(sum);
  }

  double misdetect_full(double s) const {
    if (!(s >= 0.0 && s <= 1.0))
      throw std::domain_error("s must lie in [0,1]");
    double sum = 0.0;
    for (int y = 0; y < ny_; ++y) {
      for (size_t xs = 0; xs < w_s_.size(); ++xs) {
        if (w_s_[xs] == 0.0) continue;
        double lg = logbase_g_[s_base_[xs] * ny_ + y];
        double lt = logbase_gt_[s_base_[xs] * ny_ + y];
        double e = powed(lg, s) + powed(lt, 1.0 - s);
        if (e == kNegInf) continue;
        sum += w_s_[xs] * std::exp(e);
      }
    }
    return -std::log(sum);
  }

 private:
  static std::vector<double> to_log(const std::vector<double>& xs) {
    std::vector<double> out(xs.size(), kNegInf);
    for (size_t i = 0; i < xs.size(); ++i)
      if (xs[i] > 0.0) out[i] = std::log(xs[i]);
    return out;
  }

  static double powed(double log_base, double exponent) {
    if (exponent == 0.0) return 0.0;  // base^0 = 1 even at base 0
    return exponent * log_base;       // -inf propagates as intended
  }

  static void check_rho_s(double rho, double s, double s_max) {
    if (!(rho > 0.0 && rho <= 1.0))
      throw std::domain_error("rho must lie in (0,1]");
    if (!(s >= 0.0 && s <= s_max))
      throw std::domain_error("s outside the admissible range");
  }

  // log of sum over the free decoded inputs of base^exponent * weight.
  double bracket(const std::vector<double>& logbase,
                 const std::vector<double>& log_w, long long s_base, int y,
                 double exponent) const {
    LogSumExp acc;
    for (size_t xr = 0; xr < rest_base_.size(); ++xr) {
      double lw = log_w[xr];
      if (lw == kNegInf) continue;
      double lb = logbase[(s_base + rest_base_[xr]) * ny_ + y];
      double term = powed(lb, exponent);
      if (term == kNegInf) continue;
      acc.add(term + lw);
    }
    return acc.value();
  }

  ExponentQuery query_;
  int ny_ = 0;
  std::vector<long long> s_base_, rest_base_;
  std::vector<double> w_s_, w_rest_g_, w_rest_gt_;
  std::vector<double> log_w_rest_g_, log_w_rest_gt_;
  std::vector<double> logbase_g_, logbase_gt_;
  double rate_rest_g_ = 0.0, rate_rest_gt_ = 0.0;
};

constexpr double kInvPhi = 0.6180339887498949;

// Golden-section maximization on [lo, hi]; returns the best point seen
// including both endpoints. Probe points are clamped back into the
// interval since the section arithmetic can overshoot by an ulp.
template <class F>
void golden_max(F f, double lo, double hi, int iters, double* best_x,
                double* best_val, long long* evals) {
  auto consider = [&](double x) {
    x = std::min(std::max(x, lo), hi);
    double v = f(x);
    ++*evals;
    if (v > *best_val) {
      *best_val = v;
      *best_x = x;
    }
    return v;
  };
  consider(lo);
  consider(hi);
  if (hi - lo <= 0.0) return;
  double a = lo, b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = consider(x1);
  double f2 = consider(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = consider(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = consider(x1);
    }
  }
}

}  // namespace

double wrong_message_objective(const ExponentQuery& query, double rho,
                               double s) {
  if (query.kind != ExponentKind::WrongMessage)
    throw std::invalid_argument("query kind mismatch");
  return Evaluator(query).wrong_message(rho, s);
}

double misdetect_subset_objective(const ExponentQuery& query, double rho,
                                  double s) {
  if (query.kind != ExponentKind::MisdetectSubset)
    throw std::invalid_argument("query kind mismatch");
  return Evaluator(query).misdetect_subset(rho, s);
}

double misdetect_full_objective(const ExponentQuery& query, double s) {
  if (query.kind != ExponentKind::MisdetectFull)
    throw std::invalid_argument("query kind mismatch");
  return Evaluator(query).misdetect_full(s);
}

ExponentReport maximize(const ExponentQuery& query,
                        const MaximizeOptions& options) {
  validate_query(query);
  if (options.grid_points < 2)
    throw std::invalid_argument("grid needs at least two points");
  Evaluator ev(query);

  ExponentReport report;
  report.refine_rounds = options.refine_rounds;
  long long evals = 0;

  if (query.kind == ExponentKind::MisdetectFull) {
    auto f = [&ev](double s) { return ev.misdetect_full(s); };
    int n = options.grid_points;
    double best_s = 0.0, best_val = kNegInf;
    for (int j = 0; j < n; ++j) {
      double s = static_cast<double>(j) / (n - 1);
      double v = f(s);
      ++evals;
      if (v > best_val) {
        best_val = v;
        best_s = s;
      }
    }
    double step = 1.0 / (n - 1);
    for (int round = 0; round < options.refine_rounds; ++round) {
      double lo = std::max(0.0, best_s - step);
      double hi = std::min(1.0, best_s + step);
      golden_max(f, lo, hi, 40, &best_s, &best_val, &evals);
      step *= 0.5;
    }
    report.value = f(best_s);
    ++evals;
    report.has_rho = false;
    report.arg_s = best_s;
    report.evaluations = evals;
    return report;
  }

  bool wrong_message = query.kind == ExponentKind::WrongMessage;
  auto f = [&](double rho, double s) {
    return wrong_message ? ev.wrong_message(rho, s)
                         : ev.misdetect_subset(rho, s);
  };
  auto s_cap = [&](double rho) { return wrong_message ? 1.0 : 1.0 - rho; };

  int n = options.grid_points;
  double floor = options.rho_floor;
  double best_rho = floor, best_s = 0.0, best_val = kNegInf;
  for (int i = 0; i < n; ++i) {
    // the products can creep an ulp past the admissible edge
    double rho = std::min(1.0, floor + (1.0 - floor) * i / (n - 1));
    double cap = s_cap(rho);
    for (int j = 0; j < n; ++j) {
      double s = std::min(cap, cap * j / (n - 1));
      double v = f(rho, s);
      ++evals;
      if (v > best_val) {
        best_val = v;
        best_rho = rho;
        best_s = s;
      }
    }
  }

  double rho_step = (1.0 - floor) / (n - 1);
  for (int round = 0; round < options.refine_rounds; ++round) {
    {
      // hold s, slide rho within the admissible strip. At the strip edge
      // 1 - (1 - s) can land below s by an ulp, so s is pulled back under
      // the cap at every probe.
      double hi_cap = wrong_message ? 1.0 : 1.0 - best_s;
      double lo = std::max(floor, best_rho - rho_step);
      double hi = std::min(hi_cap, best_rho + rho_step);
      if (hi >= lo) {
        double val = best_val;
        double x = best_rho;
        auto g = [&](double rho) { return f(rho, std::min(best_s, s_cap(rho))); };
        golden_max(g, lo, hi, 40, &x, &val, &evals);
        if (val > best_val) {
          best_val = val;
          best_rho = x;
          best_s = std::min(best_s, s_cap(best_rho));
        }
      }
    }
    {
      double cap = s_cap(best_rho);
      double s_step = cap / (n - 1);
      double lo = std::max(0.0, best_s - s_step);
      double hi = std::min(cap, best_s + s_step);
      if (hi >= lo) {
        double val = best_val;
        double x = best_s;
        auto g = [&](double s) { return f(best_rho, s); };
        golden_max(g, lo, hi, 40, &x, &val, &evals);
        if (val > best_val) {
          best_val = val;
          best_s = x;
        }
      }
    }
    rho_step *= 0.5;
  }

  report.value = f(best_rho, best_s);
  ++evals;
  report.has_rho = true;
  report.arg_rho = best_rho;
  report.arg_s = best_s;
  report.evaluations = evals;
  report.rho_at_floor = best_rho <= floor + 1e-12;
  return report;
}

}  // namespace dmac
