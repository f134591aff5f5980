#include "dmac/report_json.hpp"

#include <array>
#include <utility>

namespace dmac::io {

namespace {

json inequality_to_json(const RateInequality& q) {
  return json{{"tilde", subset_to_json(q.tilde)},
              {"rate_sum", q.rate_sum},
              {"mutual_info", q.mutual_info},
              {"slack", q.slack},
              {"holds", q.holds}};
}

json mode_keyed(const std::array<long long, kNumErrorModes>& a) {
  json obj = json::object();
  for (int i = 0; i < kNumErrorModes; ++i)
    obj[to_string(static_cast<ErrorMode>(i))] = a[i];
  return obj;
}

json mode_keyed(const std::array<double, kNumErrorModes>& a) {
  json obj = json::object();
  for (int i = 0; i < kNumErrorModes; ++i)
    obj[to_string(static_cast<ErrorMode>(i))] = a[i];
  return obj;
}

}  // namespace

json verdict_to_json(const RegionVerdict& verdict) {
  json witnesses = json::array();
  for (const auto& w : verdict.witnesses) {
    json item{{"subset", subset_to_json(w.subset)},
              {"satisfied", w.satisfied}};
    if (w.satisfied) {
      item["chosen"] = inequality_to_json(w.chosen);
    } else {
      json rejected = json::array();
      for (const auto& r : w.rejected)
        rejected.push_back(inequality_to_json(r));
      item["rejected"] = std::move(rejected);
    }
    witnesses.push_back(std::move(item));
  }
  return json{{"member", verdict.member},
              {"witnesses", std::move(witnesses)}};
}

json exponent_report_to_json(const ExponentReport& r) {
  return json{{"value", r.value},
              {"has_rho", r.has_rho},
              {"arg_rho", r.arg_rho},
              {"arg_s", r.arg_s},
              {"evaluations", r.evaluations},
              {"refine_rounds", r.refine_rounds},
              {"rho_at_floor", r.rho_at_floor}};
}

ExponentReport exponent_report_from_json(const json& j) {
  ExponentReport r;
  r.value = j.at("value").get<double>();
  r.has_rho = j.at("has_rho").get<bool>();
  r.arg_rho = j.at("arg_rho").get<double>();
  r.arg_s = j.at("arg_s").get<double>();
  r.evaluations = j.at("evaluations").get<long long>();
  r.refine_rounds = j.at("refine_rounds").get<int>();
  r.rho_at_floor = j.at("rho_at_floor").get<bool>();
  return r;
}

json gep_report_to_json(const GepBoundReport& report) {
  json per_vector = json::array();
  for (const auto& v : report.per_vector) {
    json terms = json::array();
    for (const auto& t : v.terms)
      terms.push_back(json{{"g_tilde", vector_to_json(t.g_tilde)},
                           {"subset", subset_to_json(t.subset)},
                           {"kind", to_string(t.kind)},
                           {"exponent", t.exponent},
                           {"contribution", t.contribution}});
    per_vector.push_back(json{{"g", vector_to_json(v.g)},
                              {"message_sum", v.message_sum},
                              {"boundary_sum", v.boundary_sum},
                              {"strict_sum", v.strict_sum},
                              {"total", v.total},
                              {"terms", std::move(terms)}});
  }
  return json{{"decode_set", subset_to_json(report.decode_set)},
              {"blocklength", report.blocklength},
              {"total", report.total},
              {"per_vector", std::move(per_vector)}};
}

json partition_result_to_json(const SingleUserGepBound& result) {
  json out;
  out["strategy"] = result.strategy == PartitionStrategy::Exhaustive
                        ? "exhaustive"
                        : "greedy";
  out["total"] = result.total;
  out["assignments_examined"] = result.assignments_examined;
  json assignment = json::array();
  for (const auto& [g, d] : result.assignment.decode_set_of)
    assignment.push_back(
        json{{"g", vector_to_json(g)}, {"decode_set", subset_to_json(d)}});
  out["assignment"] = std::move(assignment);
  json decoders = json::array();
  for (const auto& [d, report] : result.per_decoder)
    decoders.push_back(gep_report_to_json(report));
  out["per_decoder"] = std::move(decoders);
  return out;
}

json sim_report_to_json(const SimulationReport& r) {
  json per_vector = json::array();
  for (const auto& v : r.per_vector) {
    json item{{"g", vector_to_json(v.g)},
              {"zone", v.zone},
              {"alpha", v.alpha},
              {"trials", v.trials},
              {"mode_errors", mode_keyed(v.mode_errors)},
              {"collisions", v.collisions},
              {"p_error", v.p_error},
              {"ci_low", v.ci_low},
              {"ci_high", v.ci_high},
              {"collision_rate", v.collision_rate}};
    if (r.exact) {
      item["exact_error_max"] = mode_keyed(v.exact_error_max);
      item["exact_error_avg"] = mode_keyed(v.exact_error_avg);
    }
    per_vector.push_back(std::move(item));
  }
  json out{{"block_length", r.block_length},
           {"seed", r.seed},
           {"mode", to_string(r.mode)},
           {"decode_set", subset_to_json(r.decode_set)},
           {"trials_per_vector", r.trials_per_vector},
           {"exact", r.exact},
           {"message_average", r.message_average},
           {"covers_universe", r.covers_universe},
           {"weighted_error_sum", r.weighted_error_sum}};
  if (r.analytic_decoder_bound)
    out["analytic_decoder_bound"] = *r.analytic_decoder_bound;
  else
    out["analytic_decoder_bound"] = nullptr;
  out["per_vector"] = std::move(per_vector);
  if (!r.events.empty()) {
    json events = json::array();
    for (const auto& e : r.events)
      events.push_back(json{{"g", vector_to_json(e.g)},
                            {"g_tilde", vector_to_json(e.g_tilde)},
                            {"subset", subset_to_json(e.subset)},
                            {"kind", to_string(e.kind)},
                            {"p_message", e.p_message},
                            {"p_threshold", e.p_threshold},
                            {"p_misdetect", e.p_misdetect}});
    out["events"] = std::move(events);
  }
  return out;
}

}  // namespace dmac::io
