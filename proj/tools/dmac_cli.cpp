// Command line front end: loads JSON inputs, dispatches to the library,
// emits JSON/CSV results, and optionally writes a run manifest that
// references every emitted file by digest. Exit status is 0 on success,
// 1 on domain errors and 2 on usage errors (bad flags, malformed input).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "dmac/channel.hpp"
#include "dmac/code_space.hpp"
#include "dmac/common.hpp"
#include "dmac/exponents.hpp"
#include "dmac/gep.hpp"
#include "dmac/infotheory.hpp"
#include "dmac/io.hpp"
#include "dmac/report_json.hpp"
#include "dmac/simulator.hpp"

namespace {

namespace io = dmac::io;
using io::json;

constexpr const char* kArtifactVersion = "0.1.0";

// validate keeps going after a failed check so it can report the issues
// as JSON; the nonzero status is delivered through this.
int g_exit_status = 0;

std::string iso_utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Everything one run emits, so the manifest can reference each artifact
// by digest. Wall clock time only ever lands in the manifest itself,
// keeping the result files byte-stable across reruns.
struct RunContext {
  std::string command;
  std::vector<std::string> argv;
  std::string manifest_path;
  json config = json::object();
  json seeds = json::object();
  json outputs = json::array();

  void record(const std::string& path, const std::string& bytes) {
    outputs.push_back(
        json{{"path", path}, {"digest", io::digest_hex(bytes)}});
  }

  // Empty path means stdout; the digest covers the same bytes either way.
  void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
      std::cout << text;
      record("-", text);
    } else {
      io::write_text_file(out_path, text);
      record(out_path, text);
    }
  }

  void finish() {
    if (manifest_path.empty()) return;
    json m;
    m["artifact"] = "dmac";
    m["version"] = kArtifactVersion;
    m["command"] = command;
    m["argv"] = argv;
    m["config"] = config;
    m["seeds"] = seeds;
    m["wall_clock_utc"] = iso_utc_now();
    m["outputs"] = outputs;
    io::write_text_file(manifest_path, m.dump(2) + "\n");
  }
};

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t comma = text.find(',', pos);
    out.push_back(text.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const char* flag) {
  std::vector<int> out;
  if (text.empty()) return out;
  for (const std::string& tok : split_csv(text)) {
    size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (used != tok.size() || tok.empty())
      throw io::UsageError(std::string(flag) + ": '" + tok +
                           "' is not an integer");
    out.push_back(v);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text,
                                      const char* flag) {
  std::vector<double> out;
  if (text.empty()) return out;
  for (const std::string& tok : split_csv(text)) {
    size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (used != tok.size() || tok.empty())
      throw io::UsageError(std::string(flag) + ": '" + tok +
                           "' is not a number");
    out.push_back(v);
  }
  return out;
}

dmac::UserSet subset_from_flag(const std::string& text, int num_users,
                               const char* flag) {
  auto users = parse_int_list(text, flag);
  for (int u : users)
    if (u < 0 || u >= num_users)
      throw io::UsageError(std::string(flag) + ": user " + std::to_string(u) +
                           " out of range for " + std::to_string(num_users) +
                           " users");
  return dmac::make_set(users);
}

dmac::CodeIndexVector vector_from_flags(const std::string& options_csv, int g0,
                                        int num_users, const char* flag) {
  dmac::CodeIndexVector g;
  if (options_csv.empty())
    g.options.assign(num_users, 0);
  else
    g.options = parse_int_list(options_csv, flag);
  if (static_cast<int>(g.options.size()) != num_users)
    throw io::UsageError(std::string(flag) +
                         " needs one option index per user (" +
                         std::to_string(num_users) + ")");
  g.interferer = g0;
  return g;
}

// Command line rates may arrive in bits; everything internal is nats.
double rate_scale(const std::string& units) {
  return units == "bits" ? std::log(2.0) : 1.0;
}

json issues_to_json(const dmac::ValidationResult& res) {
  json arr = json::array();
  for (const auto& issue : res.issues) arr.push_back(issue.what);
  return arr;
}

std::string cache_file_path() {
  const char* dir = std::getenv("DMAC_CACHE_DIR");
  if (dir == nullptr || *dir == '\0') return "";
  return std::string(dir) + "/exponent_cache.json";
}

void load_exponent_cache(dmac::ExponentCache& cache) {
  std::string path = cache_file_path();
  if (path.empty()) return;
  std::string text;
  try {
    text = io::read_text_file(path);
  } catch (const std::exception&) {
    return;  // no cache yet
  }
  try {
    json j = io::parse_json_text(text, path);
    const json& entries = j.at("entries");
    for (auto it = entries.begin(); it != entries.end(); ++it)
      cache.insert(it.key(), io::exponent_report_from_json(it.value()));
  } catch (const std::exception& e) {
    // a stale or corrupt cache must never take down a run; recompute
    std::cerr << "ignoring unreadable exponent cache " << path << ": "
              << e.what() << "\n";
  }
}

void save_exponent_cache(const dmac::ExponentCache& cache) {
  std::string path = cache_file_path();
  if (path.empty() || cache.size() == 0) return;
  auto entries = cache.entries();
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  json obj = json::object();
  for (const auto& [key, report] : entries)
    obj[key] = io::exponent_report_to_json(report);
  json j{{"entries", std::move(obj)}};
  try {
    io::write_text_file(path, j.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "could not write exponent cache " << path << ": " << e.what()
              << "\n";
  }
}

// Per vector summary table. The g column is quoted because the vector
// rendering contains commas.
std::string per_vector_csv(
    const dmac::SimulationReport& r,
    const std::map<dmac::CodeIndexVector, double>* bound_per_g,
    const std::map<dmac::CodeIndexVector, double>* oracle_per_g) {
  std::string csv =
      "g,zone,alpha,trials,p_error,ci_low,ci_high,analytic_bound,oracle_value"
      "\n";
  for (const auto& v : r.per_vector) {
    csv += '"' + v.g.to_string() + '"';
    csv += ',' + v.zone;
    csv += ',' + io::format_sig(v.alpha);
    csv += ',' + std::to_string(v.trials);
    csv += ',' + io::format_sig(v.p_error);
    csv += ',' + io::format_sig(v.ci_low);
    csv += ',' + io::format_sig(v.ci_high);
    csv += ',';
    if (bound_per_g != nullptr && bound_per_g->count(v.g))
      csv += io::format_sig(bound_per_g->at(v.g));
    csv += ',';
    if (oracle_per_g != nullptr && oracle_per_g->count(v.g))
      csv += io::format_sig(oracle_per_g->at(v.g));
    csv += '\n';
  }
  return csv;
}

dmac::ExponentKind parse_exponent_kind(const std::string& token) {
  if (token == "wrong-message") return dmac::ExponentKind::WrongMessage;
  if (token == "misdetect-subset") return dmac::ExponentKind::MisdetectSubset;
  if (token == "misdetect-full") return dmac::ExponentKind::MisdetectFull;
  throw io::UsageError("unknown exponent kind '" + token + "'");
}

dmac::ChannelModel load_channel_strict(const std::string& path) {
  auto channel = io::load_channel(path);
  dmac::require_valid(channel);
  return channel;
}

dmac::CodeEnsemble load_ensemble_strict(const std::string& path,
                                        const dmac::ChannelModel& channel) {
  auto ensemble = io::load_ensemble(path);
  dmac::require_valid(ensemble, &channel);
  return ensemble;
}

// ---------------------------------------------------------------- validate

struct ValidateOpts {
  std::string channel, ensemble, out, manifest;
};

void run_validate(const ValidateOpts& o, RunContext& ctx) {
  if (o.channel.empty() && o.ensemble.empty())
    throw io::UsageError("validate needs --channel and/or --ensemble");
  json out = json::object();
  std::optional<dmac::ChannelModel> channel;
  bool all_ok = true;
  if (!o.channel.empty()) {
    channel = io::load_channel(o.channel);
    auto res = dmac::validate(*channel);
    all_ok = all_ok && res.ok();
    out["channel"] = json{{"path", o.channel},
                          {"ok", res.ok()},
                          {"issues", issues_to_json(res)}};
  }
  if (!o.ensemble.empty()) {
    auto ensemble = io::load_ensemble(o.ensemble);
    auto res = dmac::validate(ensemble, channel ? &*channel : nullptr);
    all_ok = all_ok && res.ok();
    out["ensemble"] = json{{"path", o.ensemble},
                           {"ok", res.ok()},
                           {"issues", issues_to_json(res)}};
  }
  out["ok"] = all_ok;
  if (!all_ok) g_exit_status = 1;
  ctx.config = json{{"channel", o.channel}, {"ensemble", o.ensemble}};
  ctx.emit(out.dump(2) + "\n", o.out);
  ctx.finish();
}

// ------------------------------------------------------------ region check

struct RegionCheckOpts {
  std::string channel, ensemble, out, manifest;
  std::string scope = "all";
  int user = 0;
  std::string subset;
  std::string g_options;
  int g0 = 0;
  std::string rates;
  std::string units = "nats";
  double slack = 0.0;
};

// Optional per user rate override for the options picked by g, so a
// fixture ensemble can be probed at several rate points without editing
// files. Values follow --units.
void apply_rate_override(dmac::CodeEnsemble& ensemble,
                         const dmac::CodeIndexVector& g,
                         const std::string& rates_csv,
                         const std::string& units) {
  if (rates_csv.empty()) return;
  auto rates = parse_double_list(rates_csv, "--r");
  if (static_cast<int>(rates.size()) != ensemble.num_users())
    throw io::UsageError("--r needs one rate per user (" +
                         std::to_string(ensemble.num_users()) + ")");
  double scale = rate_scale(units);
  for (int k = 0; k < ensemble.num_users(); ++k)
    ensemble.user_options.at(k).at(g.options.at(k)).rate_nats =
        rates[k] * scale;
}

dmac::RegionVerdict dispatch_region_scope(const dmac::ChannelModel& channel,
                                          const dmac::CodeEnsemble& ensemble,
                                          const dmac::CodeIndexVector& g,
                                          const std::string& scope, int user,
                                          dmac::UserSet s0, double slack) {
  if (scope == "user") return dmac::in_cd_user(channel, ensemble, g, user, slack);
  if (scope == "subset")
    return dmac::in_cd_subset(channel, ensemble, g, s0, slack);
  return dmac::in_cd_all(channel, ensemble, g, slack);
}

void run_region_check(const RegionCheckOpts& o, RunContext& ctx) {
  auto channel = load_channel_strict(o.channel);
  auto ensemble = load_ensemble_strict(o.ensemble, channel);
  auto g = vector_from_flags(o.g_options, o.g0, ensemble.num_users(), "--g");
  apply_rate_override(ensemble, g, o.rates, o.units);
  dmac::UserSet s0 = 0;
  if (o.scope == "subset") {
    s0 = subset_from_flag(o.subset, ensemble.num_users(), "--subset");
    if (s0 == 0) throw io::UsageError("--subset must name at least one user");
  }
  auto verdict =
      dispatch_region_scope(channel, ensemble, g, o.scope, o.user, s0, o.slack);
  json out;
  out["scope"] = o.scope;
  if (o.scope == "user") out["user"] = o.user;
  if (o.scope == "subset") out["subset"] = io::subset_to_json(s0);
  out["g"] = io::vector_to_json(g);
  out["slack"] = o.slack;
  json v = io::verdict_to_json(verdict);
  out["member"] = v["member"];
  out["witnesses"] = std::move(v["witnesses"]);
  ctx.config = json{{"channel", o.channel}, {"ensemble", o.ensemble},
                    {"scope", o.scope},     {"user", o.user},
                    {"subset", o.subset},   {"g", io::vector_to_json(g)},
                    {"r", o.rates},         {"units", o.units},
                    {"slack", o.slack}};
  ctx.emit(out.dump(2) + "\n", o.out);
  ctx.finish();
}

// ------------------------------------------------------------ region sweep

struct RegionSweepOpts {
  std::string channel, ensemble, out, manifest;
  std::string scope = "all";
  int user = 0;
  std::string subset;
  std::string g_options;
  int g0 = 0;
  std::string units = "nats";
  double slack = 0.0;
  int axis_user = 0;
  int axis_option = 0;
  double start = 0.0, stop = 0.0;
  int steps = 0;
};

void run_region_sweep(const RegionSweepOpts& o, RunContext& ctx) {
  if (o.steps <= 0) throw io::UsageError("--steps must be positive");
  auto channel = load_channel_strict(o.channel);
  auto ensemble = load_ensemble_strict(o.ensemble, channel);
  auto g = vector_from_flags(o.g_options, o.g0, ensemble.num_users(), "--g");
  if (o.axis_user < 0 || o.axis_user >= ensemble.num_users())
    throw io::UsageError("--axis-user out of range");
  if (o.axis_option < 0 || o.axis_option >= ensemble.num_options(o.axis_user))
    throw io::UsageError("--axis-option out of range");
  dmac::UserSet s0 = 0;
  if (o.scope == "subset") {
    s0 = subset_from_flag(o.subset, ensemble.num_users(), "--subset");
    if (s0 == 0) throw io::UsageError("--subset must name at least one user");
  }
  double scale = rate_scale(o.units);
  std::string csv = "index,rate_nats,member\n";
  for (int i = 0; i < o.steps; ++i) {
    double v = o.steps == 1
                   ? o.start
                   : o.start + (o.stop - o.start) * i / (o.steps - 1);
    double nats = v * scale;
    ensemble.user_options[o.axis_user][o.axis_option].rate_nats = nats;
    auto verdict = dispatch_region_scope(channel, ensemble, g, o.scope, o.user,
                                         s0, o.slack);
    csv += std::to_string(i);
    csv += ',' + io::format_sig(nats);
    csv += ',';
    csv += verdict.member ? '1' : '0';
    csv += '\n';
  }
  ctx.config = json{{"channel", o.channel},
                    {"ensemble", o.ensemble},
                    {"scope", o.scope},
                    {"user", o.user},
                    {"subset", o.subset},
                    {"g", io::vector_to_json(g)},
                    {"units", o.units},
                    {"slack", o.slack},
                    {"axis_user", o.axis_user},
                    {"axis_option", o.axis_option},
                    {"start", o.start},
                    {"stop", o.stop},
                    {"steps", o.steps}};
  ctx.emit(csv, o.out);
  ctx.finish();
}

// --------------------------------------------------------------- exponent

struct ExponentOpts {
  std::string channel, ensemble, out, manifest;
  std::string decode_set;
  std::string subset;
  std::string g_options, gt_options;
  int g0 = 0, gt0 = 0;
  double alpha_g = 0.0, alpha_gt = 0.0;
  std::string weights;
  std::string kind = "wrong-message";
  int grid_points = 101;
  int refine_rounds = 3;
};

void run_exponent(const ExponentOpts& o, RunContext& ctx) {
  auto channel = load_channel_strict(o.channel);
  auto ensemble = load_ensemble_strict(o.ensemble, channel);
  dmac::ExponentQuery query;
  query.channel = &channel;
  query.ensemble = &ensemble;
  query.decode_set =
      subset_from_flag(o.decode_set, ensemble.num_users(), "--D");
  query.subset = subset_from_flag(o.subset, ensemble.num_users(), "--S");
  query.g = vector_from_flags(o.g_options, o.g0, ensemble.num_users(), "--g");
  query.g_tilde =
      vector_from_flags(o.gt_options, o.gt0, ensemble.num_users(), "--gt");
  query.kind = parse_exponent_kind(o.kind);
  if (!o.weights.empty()) {
    auto w = io::load_weights(o.weights);
    query.alpha_g = w.alpha_of(query.g);
    query.alpha_g_tilde = w.alpha_of(query.g_tilde);
  } else {
    query.alpha_g = o.alpha_g;
    query.alpha_g_tilde = o.alpha_gt;
  }
  dmac::MaximizeOptions options;
  options.grid_points = o.grid_points;
  options.refine_rounds = o.refine_rounds;
  dmac::ExponentCache cache;
  load_exponent_cache(cache);
  auto report = cache.get_or_compute(query, options);
  save_exponent_cache(cache);
  json out;
  out["kind"] = dmac::to_string(query.kind);
  out["decode_set"] = io::subset_to_json(query.decode_set);
  out["subset"] = io::subset_to_json(query.subset);
  out["g"] = io::vector_to_json(query.g);
  out["g_tilde"] = io::vector_to_json(query.g_tilde);
  out["alpha_g"] = query.alpha_g;
  out["alpha_g_tilde"] = query.alpha_g_tilde;
  out["grid_points"] = options.grid_points;
  out["refine_rounds"] = options.refine_rounds;
  out["report"] = io::exponent_report_to_json(report);
  ctx.config = json{{"channel", o.channel},
                    {"ensemble", o.ensemble},
                    {"kind", o.kind},
                    {"D", o.decode_set},
                    {"S", o.subset},
                    {"g", io::vector_to_json(query.g)},
                    {"g_tilde", io::vector_to_json(query.g_tilde)},
                    {"alpha_g", query.alpha_g},
                    {"alpha_g_tilde", query.alpha_g_tilde},
                    {"weights", o.weights},
                    {"grid_points", o.grid_points},
                    {"refine_rounds", o.refine_rounds}};
  ctx.emit(out.dump(2) + "\n", o.out);
  ctx.finish();
}

// -------------------------------------------------------------------- gep

struct GepOpts {
  std::string channel, ensemble, region, margin, weights, out, csv, manifest;
  std::string decode_set;
  std::string strategy = "greedy";
  int blocklength = 0;
  int grid_points = 101;
  int refine_rounds = 3;
  int sweep_start = 0, sweep_stop = 0, sweep_steps = -1;
};

// Blocklength comes from the weights file when one is given; a --N that
// disagrees with it is rejected rather than silently ignored.
int resolve_blocklength(int flag_n, const dmac::WeightAssignment* weights) {
  if (weights != nullptr) {
    if (flag_n > 0 && flag_n != weights->blocklength)
      throw io::UsageError("--N disagrees with the weights file blocklength");
    return weights->blocklength;
  }
  if (flag_n <= 0) throw io::UsageError("--N is required (positive)");
  return flag_n;
}

void run_gep(const GepOpts& o, RunContext& ctx) {
  auto channel = load_channel_strict(o.channel);
  auto ensemble = load_ensemble_strict(o.ensemble, channel);
  dmac::VectorSet region(io::load_vector_list(o.region));
  dmac::VectorSet margin(
      o.margin.empty() ? std::vector<dmac::CodeIndexVector>{}
                       : io::load_vector_list(o.margin));
  std::optional<dmac::WeightAssignment> weights_file;
  if (!o.weights.empty()) weights_file = io::load_weights(o.weights);
  int n = resolve_blocklength(o.blocklength,
                              weights_file ? &*weights_file : nullptr);
  auto universe = dmac::enumerate_vectors(ensemble);
  dmac::WeightAssignment weights =
      weights_file ? *weights_file : dmac::uniform_weights(universe, n);
  dmac::MaximizeOptions options;
  options.grid_points = o.grid_points;
  options.refine_rounds = o.refine_rounds;
  dmac::ExponentCache cache;
  load_exponent_cache(cache);

  json out;
  if (!o.decode_set.empty()) {
    auto d = subset_from_flag(o.decode_set, ensemble.num_users(), "--D");
    auto report = dmac::decoder_gep_bound(channel, ensemble, d, region, margin,
                                          weights, &cache, options);
    out["mode"] = "single-decoder";
    out["bound"] = io::gep_report_to_json(report);
    out["total"] = report.total;
  } else {
    auto strategy = o.strategy == "exhaustive"
                        ? dmac::PartitionStrategy::Exhaustive
                        : dmac::PartitionStrategy::Greedy;
    auto result =
        dmac::single_user_gep_bound(channel, ensemble, region, margin, weights,
                                    strategy, &cache, options);
    out["mode"] = "partition";
    out.update(io::partition_result_to_json(result));
  }
  ctx.config = json{{"channel", o.channel},
                    {"ensemble", o.ensemble},
                    {"region", o.region},
                    {"margin", o.margin},
                    {"weights", o.weights},
                    {"N", n},
                    {"D", o.decode_set},
                    {"strategy", o.strategy},
                    {"grid_points", o.grid_points},
                    {"refine_rounds", o.refine_rounds}};
  ctx.emit(out.dump(2) + "\n", o.out);

  // Bound versus blocklength sweep, recomputing the uniform weights at
  // each N. Explicit weight files are tied to one blocklength, so the
  // sweep only supports uniform weights.
  if (o.sweep_steps >= 0 || !o.csv.empty()) {
    if (o.csv.empty())
      throw io::UsageError("a blocklength sweep needs --csv FILE");
    if (o.sweep_steps <= 0)
      throw io::UsageError("--sweep-steps must be positive");
    if (weights_file)
      throw io::UsageError("blocklength sweeps require uniform weights");
    std::string csv = "N,total\n";
    for (int i = 0; i < o.sweep_steps; ++i) {
      double nd = o.sweep_steps == 1
                      ? o.sweep_start
                      : o.sweep_start + double(o.sweep_stop - o.sweep_start) *
                                            i / (o.sweep_steps - 1);
      int ni = static_cast<int>(std::llround(nd));
      if (ni < 1) throw io::UsageError("swept blocklengths must be positive");
      auto wn = dmac::uniform_weights(universe, ni);
      double total;
      if (!o.decode_set.empty()) {
        auto d = subset_from_flag(o.decode_set, ensemble.num_users(), "--D");
        total = dmac::decoder_gep_bound(channel, ensemble, d, region, margin,
                                        wn, &cache, options)
                    .total;
      } else {
        auto strategy = o.strategy == "exhaustive"
                            ? dmac::PartitionStrategy::Exhaustive
                            : dmac::PartitionStrategy::Greedy;
        total = dmac::single_user_gep_bound(channel, ensemble, region, margin,
                                            wn, strategy, &cache, options)
                    .total;
      }
      csv += std::to_string(ni) + ',' + io::format_sig(total) + '\n';
    }
    io::write_text_file(o.csv, csv);
    ctx.record(o.csv, csv);
  }
  save_exponent_cache(cache);
  ctx.finish();
}

// --------------------------------------------------------- simulate/oracle

struct SimulateOpts {
  std::string channel, ensemble, region, margin, weights, policy, policy_out;
  std::string vectors, out, csv, manifest;
  std::string decode_set;
  std::string mode = "eq10";
  int blocklength = 0;
  long long trials = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  long long max_codewords = 1000000;
  long long term_cap = 10000000;
  bool with_oracle = false;
  bool events = false;  // oracle only
};

struct SimSetup {
  dmac::ChannelModel channel;
  dmac::CodeEnsemble ensemble;
  dmac::OperationConfig config;
  dmac::WeightAssignment weights;
  dmac::ThresholdPolicy policy;
  int blocklength = 0;
  dmac::UserSet decode_set = 0;
};

// Shared ingestion for simulate and oracle: loads the instance, resolves
// the decode set (defaults to every user), and either loads the
// threshold policy or tunes one on the run's codebook realization.
SimSetup prepare_simulation(const SimulateOpts& o, RunContext& ctx) {
  SimSetup s;
  s.channel = load_channel_strict(o.channel);
  s.ensemble = load_ensemble_strict(o.ensemble, s.channel);
  dmac::VectorSet region(io::load_vector_list(o.region));
  dmac::VectorSet margin(
      o.margin.empty() ? std::vector<dmac::CodeIndexVector>{}
                       : io::load_vector_list(o.margin));
  s.decode_set = o.decode_set.empty()
                     ? dmac::full_set(s.channel.num_users)
                     : subset_from_flag(o.decode_set, s.ensemble.num_users(),
                                        "--D");
  s.config = dmac::OperationConfig(region, margin, s.decode_set);
  std::optional<dmac::WeightAssignment> weights_file;
  if (!o.weights.empty()) weights_file = io::load_weights(o.weights);
  s.blocklength = resolve_blocklength(o.blocklength,
                                      weights_file ? &*weights_file : nullptr);
  s.weights = weights_file
                  ? *weights_file
                  : dmac::uniform_weights(dmac::enumerate_vectors(s.ensemble),
                                          s.blocklength);
  if (!o.policy.empty()) {
    s.policy = io::load_policy(o.policy);
  } else {
    auto books = dmac::generate_codebooks(s.ensemble, s.blocklength, o.seed,
                                          o.max_codewords);
    dmac::TuneOptions tune;
    tune.seed = o.seed;
    s.policy = dmac::tune_policy(s.channel, s.ensemble, s.config, s.weights,
                                 books, tune);
  }
  if (!o.policy_out.empty()) {
    std::string text = io::policy_to_json(s.policy).dump(2) + "\n";
    io::write_text_file(o.policy_out, text);
    ctx.record(o.policy_out, text);
  }
  return s;
}

json simulate_config_json(const SimulateOpts& o, const SimSetup& s) {
  return json{{"channel", o.channel},
              {"ensemble", o.ensemble},
              {"region", o.region},
              {"margin", o.margin},
              {"weights", o.weights},
              {"policy", o.policy},
              {"vectors", o.vectors},
              {"D", io::subset_to_json(s.decode_set)},
              {"mode", o.mode},
              {"N", s.blocklength},
              {"trials", o.trials},
              {"threads", o.threads},
              {"max_codewords", o.max_codewords},
              {"term_cap", o.term_cap}};
}

// Per region vector analytic bounds for the CSV table.
std::map<dmac::CodeIndexVector, double> per_vector_bounds(
    const SimSetup& s, dmac::ExponentCache* cache) {
  std::map<dmac::CodeIndexVector, double> out;
  auto report = dmac::decoder_gep_bound(s.channel, s.ensemble, s.decode_set,
                                        s.config.region, s.config.margin,
                                        s.weights, cache);
  for (const auto& v : report.per_vector) out[v.g] = v.total;
  return out;
}

void run_simulate(const SimulateOpts& o, RunContext& ctx) {
  auto s = prepare_simulation(o, ctx);
  dmac::MonteCarloOptions mc;
  mc.trials = o.trials;
  mc.seed = o.seed;
  mc.mode = dmac::parse_error_mode(o.mode);
  if (!o.vectors.empty()) mc.vectors = io::load_vector_list(o.vectors);
  mc.threads = o.threads;
  mc.max_codewords = o.max_codewords;
  auto report = dmac::run_monte_carlo(s.channel, s.ensemble, s.config,
                                      s.policy, s.weights, mc);
  ctx.config = simulate_config_json(o, s);
  ctx.seeds = json{{"seed", o.seed}};
  json doc = io::sim_report_to_json(report);
  doc["policy"] = io::policy_to_json(s.policy);
  ctx.emit(doc.dump(2) + "\n", o.out);
  if (!o.csv.empty()) {
    dmac::ExponentCache cache;
    load_exponent_cache(cache);
    auto bounds = per_vector_bounds(s, &cache);
    save_exponent_cache(cache);
    std::map<dmac::CodeIndexVector, double> oracle_values;
    if (o.with_oracle) {
      dmac::OracleOptions oo;
      oo.seed = o.seed;
      oo.mode = mc.mode;
      oo.term_cap = o.term_cap;
      oo.attach_bound = false;
      oo.max_codewords = o.max_codewords;
      auto exact = dmac::exact_oracle(s.channel, s.ensemble, s.config,
                                      s.policy, s.weights, oo);
      // the Monte Carlo column estimates the message averaged error, so
      // the oracle column reports the matching exact average
      for (const auto& v : exact.per_vector)
        oracle_values[v.g] = v.exact_error_avg[dmac::mode_index(oo.mode)];
    }
    std::string csv = per_vector_csv(report, &bounds,
                                     o.with_oracle ? &oracle_values : nullptr);
    io::write_text_file(o.csv, csv);
    ctx.record(o.csv, csv);
  }
  ctx.finish();
}

void run_oracle(const SimulateOpts& o, RunContext& ctx) {
  auto s = prepare_simulation(o, ctx);
  dmac::OracleOptions oo;
  oo.seed = o.seed;
  oo.mode = dmac::parse_error_mode(o.mode);
  oo.term_cap = o.term_cap;
  oo.events = o.events;
  oo.max_codewords = o.max_codewords;
  auto report = dmac::exact_oracle(s.channel, s.ensemble, s.config, s.policy,
                                   s.weights, oo);
  ctx.config = simulate_config_json(o, s);
  ctx.seeds = json{{"seed", o.seed}};
  json doc = io::sim_report_to_json(report);
  doc["policy"] = io::policy_to_json(s.policy);
  ctx.emit(doc.dump(2) + "\n", o.out);
  if (!o.csv.empty()) {
    dmac::ExponentCache cache;
    load_exponent_cache(cache);
    auto bounds = per_vector_bounds(s, &cache);
    save_exponent_cache(cache);
    // p_error is the worst message value; the oracle column carries the
    // message averaged one for comparison against Monte Carlo tables
    std::map<dmac::CodeIndexVector, double> oracle_values;
    for (const auto& v : report.per_vector)
      oracle_values[v.g] = v.exact_error_avg[dmac::mode_index(oo.mode)];
    std::string csv = per_vector_csv(report, &bounds, &oracle_values);
    io::write_text_file(o.csv, csv);
    ctx.record(o.csv, csv);
  }
  ctx.finish();
}

// ---------------------------------------------------------------- gaussian

struct GaussianOpts {
  std::string out, manifest;
  int num_users = 0;
  std::string powers, rates;
  double noise_variance = 1.0;
  std::string units = "nats";
};

void run_gaussian(const GaussianOpts& o, RunContext& ctx) {
  auto powers = parse_double_list(o.powers, "--P");
  auto rates = parse_double_list(o.rates, "--r");
  if (powers.empty()) throw io::UsageError("--P needs at least one power");
  if (rates.size() != powers.size())
    throw io::UsageError("--r needs one rate per power");
  if (o.num_users != 0 && o.num_users != static_cast<int>(powers.size()))
    throw io::UsageError("--K disagrees with the --P list length");
  double scale = rate_scale(o.units);
  for (double& r : rates) r *= scale;
  bool member = dmac::gaussian_region_check(powers, o.noise_variance, rates);
  json out{{"powers", powers},
           {"noise_variance", o.noise_variance},
           {"rates_nats", rates},
           {"member", member}};
  ctx.config = json{{"K", static_cast<int>(powers.size())},
                    {"P", o.powers},
                    {"N0", o.noise_variance},
                    {"r", o.rates},
                    {"units", o.units}};
  ctx.emit(out.dump(2) + "\n", o.out);
  ctx.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "distributed multiple access channel toolkit: capacity regions, "
      "error exponents, finite blocklength error bounds, and decoder "
      "simulation"};
  app.set_version_flag("--version", std::string("dmac ") + kArtifactVersion);
  app.require_subcommand(1);

  RunContext ctx;
  ctx.argv.assign(argv, argv + argc);

  auto add_manifest = [](CLI::App* cmd, std::string& path) {
    cmd->add_option("--manifest", path,
                    "write a run manifest (config, seeds, output digests)");
  };

  // validate
  ValidateOpts vo;
  auto* validate = app.add_subcommand(
      "validate", "check channel and ensemble files for structural errors");
  validate->add_option("--channel", vo.channel, "channel JSON file");
  validate->add_option("--ensemble", vo.ensemble, "ensemble JSON file");
  validate->add_option("--out", vo.out, "write the JSON verdict here");
  add_manifest(validate, vo.manifest);
  validate->callback([&] {
    ctx.command = "validate";
    ctx.manifest_path = vo.manifest;
    run_validate(vo, ctx);
  });

  // region check / region sweep
  auto* region = app.add_subcommand(
      "region", "capacity region membership of a code index vector");
  region->require_subcommand(1);

  RegionCheckOpts rco;
  auto* check = region->add_subcommand(
      "check", "membership verdict with per subset witnesses");
  check->add_option("--channel", rco.channel, "channel JSON file")
      ->required();
  check->add_option("--ensemble", rco.ensemble, "ensemble JSON file")
      ->required();
  check
      ->add_option("--scope", rco.scope,
                   "which region: one user, a user subset, or everyone")
      ->check(CLI::IsMember({"user", "subset", "all"}));
  check->add_option("--user", rco.user, "decoded user for --scope user");
  check->add_option("--subset", rco.subset,
                    "comma separated users for --scope subset");
  check->add_option("--g", rco.g_options,
                    "option index per user, comma separated (default all 0)");
  check->add_option("--g0", rco.g0, "interferer option index");
  check->add_option("--r", rco.rates,
                    "override the rate of each user's picked option");
  check->add_option("--units", rco.units, "unit of --r rates")
      ->check(CLI::IsMember({"nats", "bits"}));
  check->add_option("--slack", rco.slack,
                    "require every inequality to hold with this margin");
  check->add_option("--out", rco.out, "write the JSON verdict here");
  add_manifest(check, rco.manifest);
  check->callback([&] {
    ctx.command = "region check";
    ctx.manifest_path = rco.manifest;
    run_region_check(rco, ctx);
  });

  RegionSweepOpts rso;
  auto* sweep = region->add_subcommand(
      "sweep", "membership along a rate grid, emitted as CSV");
  sweep->add_option("--channel", rso.channel, "channel JSON file")
      ->required();
  sweep->add_option("--ensemble", rso.ensemble, "ensemble JSON file")
      ->required();
  sweep
      ->add_option("--scope", rso.scope,
                   "which region: one user, a user subset, or everyone")
      ->check(CLI::IsMember({"user", "subset", "all"}));
  sweep->add_option("--user", rso.user, "decoded user for --scope user");
  sweep->add_option("--subset", rso.subset,
                    "comma separated users for --scope subset");
  sweep->add_option("--g", rso.g_options,
                    "option index per user, comma separated (default all 0)");
  sweep->add_option("--g0", rso.g0, "interferer option index");
  sweep->add_option("--units", rso.units, "unit of the grid rates")
      ->check(CLI::IsMember({"nats", "bits"}));
  sweep->add_option("--slack", rso.slack,
                    "require every inequality to hold with this margin");
  sweep->add_option("--axis-user", rso.axis_user, "user whose rate varies");
  sweep->add_option("--axis-option", rso.axis_option,
                    "option of that user whose rate varies");
  sweep->add_option("--start", rso.start, "first grid rate")->required();
  sweep->add_option("--stop", rso.stop, "last grid rate")->required();
  sweep->add_option("--steps", rso.steps, "number of grid points")
      ->required();
  sweep->add_option("--out", rso.out, "write the CSV here");
  add_manifest(sweep, rso.manifest);
  sweep->callback([&] {
    ctx.command = "region sweep";
    ctx.manifest_path = rso.manifest;
    run_region_sweep(rso, ctx);
  });

  // exponent
  ExponentOpts eo;
  auto* exponent = app.add_subcommand(
      "exponent", "maximize one pairwise error exponent");
  exponent->add_option("--channel", eo.channel, "channel JSON file")
      ->required();
  exponent->add_option("--ensemble", eo.ensemble, "ensemble JSON file")
      ->required();
  exponent
      ->add_option("--kind", eo.kind,
                   "which pairwise event the exponent bounds")
      ->check(CLI::IsMember({"wrong-message", "misdetect-subset",
                             "misdetect-full"}));
  exponent->add_option("--D", eo.decode_set, "decoded users, comma separated")
      ->required();
  exponent->add_option("--S", eo.subset,
                       "agreement subset, comma separated (default empty)");
  exponent->add_option("--g", eo.g_options,
                       "true vector options (default all 0)");
  exponent->add_option("--g0", eo.g0, "true vector interferer option");
  exponent->add_option("--gt", eo.gt_options,
                       "competitor options (default all 0)");
  exponent->add_option("--gt0", eo.gt0, "competitor interferer option");
  exponent->add_option("--alpha-g", eo.alpha_g, "weight exponent of g");
  exponent->add_option("--alpha-gt", eo.alpha_gt,
                       "weight exponent of the competitor");
  exponent->add_option("--weights", eo.weights,
                       "weight file supplying both alphas instead");
  exponent->add_option("--grid-points", eo.grid_points,
                       "grid resolution per parameter");
  exponent->add_option("--refine-rounds", eo.refine_rounds,
                       "golden section refinement rounds");
  exponent->add_option("--out", eo.out, "write the JSON report here");
  add_manifest(exponent, eo.manifest);
  exponent->callback([&] {
    ctx.command = "exponent";
    ctx.manifest_path = eo.manifest;
    run_exponent(eo, ctx);
  });

  // gep
  GepOpts go;
  auto* gep = app.add_subcommand(
      "gep", "analytic generalized error performance bound");
  gep->add_option("--channel", go.channel, "channel JSON file")->required();
  gep->add_option("--ensemble", go.ensemble, "ensemble JSON file")
      ->required();
  gep->add_option("--region", go.region, "region vector list JSON")
      ->required();
  gep->add_option("--margin", go.margin, "margin vector list JSON");
  gep->add_option("--weights", go.weights,
                  "weight file (default uniform over the ensemble)");
  gep->add_option("--N", go.blocklength, "blocklength for uniform weights");
  gep->add_option("--D", go.decode_set,
                  "bound one decoder for this decode set instead of "
                  "partitioning");
  gep->add_option("--strategy", go.strategy, "partition search strategy")
      ->check(CLI::IsMember({"exhaustive", "greedy"}));
  gep->add_option("--grid-points", go.grid_points,
                  "grid resolution per exponent parameter");
  gep->add_option("--refine-rounds", go.refine_rounds,
                  "golden section refinement rounds");
  gep->add_option("--sweep-start", go.sweep_start,
                  "first blocklength of the bound sweep");
  gep->add_option("--sweep-stop", go.sweep_stop,
                  "last blocklength of the bound sweep");
  gep->add_option("--sweep-steps", go.sweep_steps,
                  "number of sweep blocklengths");
  gep->add_option("--csv", go.csv, "write the bound versus N sweep here");
  gep->add_option("--out", go.out, "write the JSON report here");
  add_manifest(gep, go.manifest);
  gep->callback([&] {
    ctx.command = "gep";
    ctx.manifest_path = go.manifest;
    run_gep(go, ctx);
  });

  // simulate / oracle share an option set
  SimulateOpts so;
  auto add_sim_options = [&](CLI::App* cmd, bool monte_carlo) {
    cmd->add_option("--channel", so.channel, "channel JSON file")->required();
    cmd->add_option("--ensemble", so.ensemble, "ensemble JSON file")
        ->required();
    cmd->add_option("--region", so.region, "region vector list JSON")
        ->required();
    cmd->add_option("--margin", so.margin, "margin vector list JSON");
    cmd->add_option("--weights", so.weights,
                    "weight file (default uniform over the ensemble)");
    cmd->add_option("--policy", so.policy,
                    "threshold policy JSON (default: tuned on the run's "
                    "codebooks)");
    cmd->add_option("--policy-out", so.policy_out,
                    "write the policy actually used here");
    cmd->add_option("--D", so.decode_set,
                    "decoded users, comma separated (default everyone)");
    cmd->add_option("--mode", so.mode, "error accounting mode")
        ->check(CLI::IsMember({"eq1", "eq6", "eq10", "eq12"}));
    cmd->add_option("--N", so.blocklength, "blocklength");
    cmd->add_option("--seed", so.seed, "codebook and trial seed");
    cmd->add_option("--max-codewords", so.max_codewords,
                    "refuse codebooks larger than this");
    cmd->add_option("--csv", so.csv, "write the per vector table here");
    cmd->add_option("--out", so.out, "write the JSON report here");
    if (monte_carlo) {
      cmd->add_option("--trials", so.trials, "trials per vector");
      cmd->add_option("--threads", so.threads, "worker threads");
      cmd->add_option("--vectors", so.vectors,
                      "simulate only the vectors in this list");
      cmd->add_flag("--with-oracle", so.with_oracle,
                    "add exact oracle values to the CSV table");
      cmd->add_option("--term-cap", so.term_cap,
                      "enumeration budget for --with-oracle");
    } else {
      cmd->add_option("--term-cap", so.term_cap, "enumeration budget");
      cmd->add_flag("--events", so.events,
                    "include exact pairwise event probabilities");
    }
    add_manifest(cmd, so.manifest);
  };

  auto* simulate = app.add_subcommand(
      "simulate", "Monte Carlo run of the threshold decoder");
  add_sim_options(simulate, true);
  simulate->callback([&] {
    ctx.command = "simulate";
    ctx.manifest_path = so.manifest;
    run_simulate(so, ctx);
  });

  auto* oracle = app.add_subcommand(
      "oracle", "exact enumeration of the threshold decoder");
  add_sim_options(oracle, false);
  oracle->callback([&] {
    ctx.command = "oracle";
    ctx.manifest_path = so.manifest;
    run_oracle(so, ctx);
  });

  // gaussian
  GaussianOpts gao;
  auto* gaussian = app.add_subcommand(
      "gaussian", "closed form scalar Gaussian adder region check");
  gaussian->add_option("--K", gao.num_users,
                       "number of users (checked against --P)");
  gaussian->add_option("--P", gao.powers, "per user powers, comma separated")
      ->required();
  gaussian->add_option("--N0", gao.noise_variance, "noise variance");
  gaussian->add_option("--r", gao.rates, "per user rates, comma separated")
      ->required();
  gaussian->add_option("--units", gao.units, "unit of --r rates")
      ->check(CLI::IsMember({"nats", "bits"}));
  gaussian->add_option("--out", gao.out, "write the JSON verdict here");
  add_manifest(gaussian, gao.manifest);
  gaussian->callback([&] {
    ctx.command = "gaussian";
    ctx.manifest_path = gao.manifest;
    run_gaussian(gao, ctx);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const io::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return g_exit_status;
}
