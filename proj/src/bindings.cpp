// Python module exposing the main library operations. Structured inputs
// and results cross the boundary as plain dicts/lists in the same shapes
// the JSON file formats and the command line tool use.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmac/channel.hpp"
#include "dmac/code_space.hpp"
#include "dmac/common.hpp"
#include "dmac/exponents.hpp"
#include "dmac/gep.hpp"
#include "dmac/infotheory.hpp"
#include "dmac/io.hpp"
#include "dmac/report_json.hpp"
#include "dmac/simulator.hpp"

namespace py = pybind11;

namespace {

namespace io = dmac::io;
using io::json;

py::object json_to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null:
      return py::none();
    case json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case json::value_t::number_integer:
      return py::int_(j.get<long long>());
    case json::value_t::number_unsigned:
      return py::int_(j.get<unsigned long long>());
    case json::value_t::number_float:
      return py::float_(j.get<double>());
    case json::value_t::string:
      return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list out;
      for (const auto& item : j) out.append(json_to_py(item));
      return out;
    }
    case json::value_t::object: {
      py::dict out;
      for (auto it = j.begin(); it != j.end(); ++it)
        out[py::str(it.key())] = json_to_py(it.value());
      return out;
    }
    default:
      throw std::runtime_error("unsupported json payload");
  }
}

json py_to_json(py::handle h) {
  if (h.is_none()) return nullptr;
  if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
  if (py::isinstance<py::int_>(h)) return h.cast<long long>();
  if (py::isinstance<py::float_>(h)) return h.cast<double>();
  if (py::isinstance<py::str>(h)) return h.cast<std::string>();
  if (py::isinstance<py::dict>(h)) {
    json obj = json::object();
    for (auto item : h.cast<py::dict>())
      obj[item.first.cast<std::string>()] = py_to_json(item.second);
    return obj;
  }
  if (py::isinstance<py::list>(h) || py::isinstance<py::tuple>(h)) {
    json arr = json::array();
    for (auto item : h.cast<py::sequence>()) arr.push_back(py_to_json(item));
    return arr;
  }
  throw std::runtime_error("cannot convert this python object to json");
}

struct PyChannel {
  dmac::ChannelModel model;
};

struct PyEnsemble {
  dmac::CodeEnsemble ensemble;
};

dmac::CodeIndexVector vec_arg(py::handle h) {
  return io::vector_from_json(py_to_json(h));
}

dmac::UserSet set_arg(py::handle h) {
  auto users = h.cast<std::vector<int>>();
  return dmac::make_set(users);
}

dmac::VectorSet vector_set_arg(py::handle h) {
  if (h.is_none()) return dmac::VectorSet{};
  return dmac::VectorSet(io::vector_list_from_json(py_to_json(h)));
}

dmac::WeightAssignment weights_arg(py::handle h) {
  return io::weights_from_json(py_to_json(h));
}

dmac::ExponentKind kind_arg(const std::string& token) {
  if (token == "wrong-message") return dmac::ExponentKind::WrongMessage;
  if (token == "misdetect-subset") return dmac::ExponentKind::MisdetectSubset;
  if (token == "misdetect-full") return dmac::ExponentKind::MisdetectFull;
  throw std::invalid_argument("unknown exponent kind '" + token + "'");
}

// The decode set defaults to every user when the caller passes None.
dmac::UserSet decode_set_arg(py::handle h, int num_users) {
  if (h.is_none()) return dmac::full_set(num_users);
  auto s = set_arg(h);
  return s == 0 ? dmac::full_set(num_users) : s;
}

dmac::ThresholdPolicy resolve_policy(
    const PyChannel& channel, const PyEnsemble& ensemble,
    const dmac::OperationConfig& config, const dmac::WeightAssignment& weights,
    py::handle policy, std::uint64_t seed, long long max_codewords) {
  if (!policy.is_none()) return io::policy_from_json(py_to_json(policy));
  auto books = dmac::generate_codebooks(ensemble.ensemble,
                                        weights.blocklength, seed,
                                        max_codewords);
  dmac::TuneOptions tune;
  tune.seed = seed;
  return dmac::tune_policy(channel.model, ensemble.ensemble, config, weights,
                           books, tune);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "distributed multiple access channel toolkit: capacity regions, "
      "error exponents, finite blocklength bounds, decoder simulation";

  py::register_exception<io::UsageError>(m, "UsageError", PyExc_ValueError);

  py::class_<PyChannel>(m, "Channel")
      .def_property_readonly(
          "num_users", [](const PyChannel& c) { return c.model.num_users; })
      .def_property_readonly("output_alphabet",
                             [](const PyChannel& c) {
                               return c.model.output_alphabet_size;
                             })
      .def_property_readonly("num_interferer_options",
                             [](const PyChannel& c) {
                               return c.model.num_interferer_options();
                             })
      .def("to_json",
           [](const PyChannel& c) {
             return json_to_py(io::channel_to_json(c.model));
           })
      .def("__repr__", [](const PyChannel& c) {
        return "<dmac.Channel users=" + std::to_string(c.model.num_users) +
               " outputs=" + std::to_string(c.model.output_alphabet_size) +
               ">";
      });

  py::class_<PyEnsemble>(m, "Ensemble")
      .def_property_readonly(
          "num_users",
          [](const PyEnsemble& e) { return e.ensemble.num_users(); })
      .def("num_options", [](const PyEnsemble& e,
                             int user) { return e.ensemble.num_options(user); })
      .def("to_json",
           [](const PyEnsemble& e) {
             return json_to_py(io::ensemble_to_json(e.ensemble));
           })
      .def("__repr__", [](const PyEnsemble& e) {
        return "<dmac.Ensemble users=" +
               std::to_string(e.ensemble.num_users()) + ">";
      });

  m.def(
      "load_channel",
      [](const std::string& path) {
        PyChannel c{io::load_channel(path)};
        dmac::require_valid(c.model);
        return c;
      },
      py::arg("path"), "Load and validate a channel JSON file.");

  m.def(
      "channel_from_json",
      [](py::handle obj) {
        PyChannel c{io::channel_from_json(py_to_json(obj))};
        dmac::require_valid(c.model);
        return c;
      },
      py::arg("obj"), "Build a channel from a dict in the file format.");

  m.def(
      "load_ensemble",
      [](const std::string& path, const PyChannel* channel) {
        PyEnsemble e{io::load_ensemble(path)};
        dmac::require_valid(e.ensemble,
                            channel != nullptr ? &channel->model : nullptr);
        return e;
      },
      py::arg("path"), py::arg("channel") = nullptr,
      "Load and validate an ensemble JSON file, optionally against a "
      "channel.");

  m.def(
      "ensemble_from_json",
      [](py::handle obj, const PyChannel* channel) {
        PyEnsemble e{io::ensemble_from_json(py_to_json(obj))};
        dmac::require_valid(e.ensemble,
                            channel != nullptr ? &channel->model : nullptr);
        return e;
      },
      py::arg("obj"), py::arg("channel") = nullptr,
      "Build an ensemble from a dict in the file format.");

  m.def(
      "enumerate_vectors",
      [](const PyEnsemble& ensemble) {
        json arr = json::array();
        for (const auto& g : dmac::enumerate_vectors(ensemble.ensemble))
          arr.push_back(io::vector_to_json(g));
        return json_to_py(arr);
      },
      py::arg("ensemble"),
      "Every code index vector of the ensemble, user 0's option slowest.");

  m.def(
      "mutual_information",
      [](const PyChannel& channel, const PyEnsemble& ensemble, py::handle g,
         py::handle a, py::handle c) {
        auto joint = dmac::build_joint(channel.model, ensemble.ensemble,
                                       vec_arg(g));
        return dmac::conditional_mi(joint, set_arg(a),
                                    c.is_none() ? 0 : set_arg(c));
      },
      py::arg("channel"), py::arg("ensemble"), py::arg("g"), py::arg("a"),
      py::arg("c") = py::none(),
      "I(X_a; Y | X_c) in nats under the option picks in g.");

  m.def(
      "in_cd_user",
      [](const PyChannel& channel, const PyEnsemble& ensemble, py::handle g,
         int user, double slack) {
        return json_to_py(io::verdict_to_json(dmac::in_cd_user(
            channel.model, ensemble.ensemble, vec_arg(g), user, slack)));
      },
      py::arg("channel"), py::arg("ensemble"), py::arg("g"), py::arg("user"),
      py::arg("slack") = 0.0,
      "Membership of g in the region where one user is decodable.");

  m.def(
      "in_cd_subset",
      [](const PyChannel& channel, const PyEnsemble& ensemble, py::handle g,
         py::handle subset, double slack) {
        return json_to_py(io::verdict_to_json(
            dmac::in_cd_subset(channel.model, ensemble.ensemble, vec_arg(g),
                               set_arg(subset), slack)));
      },
      py::arg("channel"), py::arg("ensemble"), py::arg("g"), py::arg("subset"),
      py::arg("slack") = 0.0,
      "Membership of g in the region where a user group is decodable.");

  m.def(
      "in_cd_all",
      [](const PyChannel& channel, const PyEnsemble& ensemble, py::handle g,
         double slack) {
        return json_to_py(io::verdict_to_json(dmac::in_cd_all(
            channel.model, ensemble.ensemble, vec_arg(g), slack)));
      },
      py::arg("channel"), py::arg("ensemble"), py::arg("g"),
      py::arg("slack") = 0.0,
      "Membership of g in the region where every user is decodable.");

  m.def(
      "shannon_polymatroid_check",
      [](const PyChannel& channel, int g0,
         const std::vector<std::vector<double>>& input_dists,
         const std::vector<double>& rates, double slack) {
        return dmac::shannon_polymatroid_check(channel.model, g0, input_dists,
                                               rates, slack);
      },
      py::arg("channel"), py::arg("g0"), py::arg("input_dists"),
      py::arg("rates"), py::arg("slack") = 0.0,
      "Coordinated capacity region check at a fixed input distribution.");

  m.def(
      "gaussian_region_check",
      [](const std::vector<double>& powers, double noise_variance,
         const std::vector<double>& rates) {
        return dmac::gaussian_region_check(powers, noise_variance, rates);
      },
      py::arg("powers"), py::arg("noise_variance"), py::arg("rates"),
      "Closed form scalar Gaussian adder region check, rates in nats.");

  m.def(
      "maximize_exponent",
      [](const PyChannel& channel, const PyEnsemble& ensemble,
         const std::string& kind, py::handle decode_set, py::handle subset,
         py::handle g, py::handle g_tilde, double alpha_g,
         double alpha_g_tilde, int grid_points, int refine_rounds) {
        dmac::ExponentQuery query;
        query.channel = &channel.model;
        query.ensemble = &ensemble.ensemble;
        query.kind = kind_arg(kind);
        query.decode_set = set_arg(decode_set);
        query.subset = set_arg(subset);
        query.g = vec_arg(g);
        query.g_tilde = vec_arg(g_tilde);
        query.alpha_g = alpha_g;
        query.alpha_g_tilde = alpha_g_tilde;
        dmac::MaximizeOptions options;
        options.grid_points = grid_points;
        options.refine_rounds = refine_rounds;
        return json_to_py(
            io::exponent_report_to_json(dmac::maximize(query, options)));
      },
      py::arg("channel"), py::arg("ensemble"), py::arg("kind"),
      py::arg("decode_set"), py::arg("subset"), py::arg("g"),
      py::arg("g_tilde"), py::arg("alpha_g") = 0.0,
      py::arg("alpha_g_tilde") = 0.0, py::arg("grid_points") = 101,
      py::arg("refine_rounds") = 3,
      "Maximize one pairwise error exponent; kind is wrong-message, "
      "misdetect-subset or misdetect-full.");

  m.def(
      "uniform_weights",
      [](const PyEnsemble& ensemble, int blocklength) {
        auto universe = dmac::enumerate_vectors(ensemble.ensemble);
        return json_to_py(
            io::weights_to_json(dmac::uniform_weights(universe, blocklength)));
      },
      py::arg("ensemble"), py::arg("blocklength"),
      "Uniform weight assignment over the whole ensemble.");

  m.def(
      "decoder_gep_bound",
      [](const PyChannel& channel, const PyEnsemble& ensemble,
         py::handle decode_set, py::handle region, py::handle margin,
         py::handle weights, int grid_points, int refine_rounds) {
        dmac::MaximizeOptions options;
        options.grid_points = grid_points;
        options.refine_rounds = refine_rounds;
        auto report = dmac::decoder_gep_bound(
            channel.model, ensemble.ensemble,
            decode_set_arg(decode_set, channel.model.num_users),
            vector_set_arg(region), vector_set_arg(margin),
            weights_arg(weights), nullptr, options);
        return json_to_py(io::gep_report_to_json(report));
      },
      py::arg("channel"), py::arg("ensemble"), py::arg("decode_set"),
      py::arg("region"), py::arg("margin"), py::arg("weights"),
      py::arg("grid_points") = 101, py::arg("refine_rounds") = 3,
      "Analytic error bound for the decoder of one decode set.");

  m.def(
      "single_user_gep_bound",
      [](const PyChannel& channel, const PyEnsemble& ensemble,
         py::handle region, py::handle margin, py::handle weights,
         const std::string& strategy, int grid_points, int refine_rounds) {
        dmac::MaximizeOptions options;
        options.grid_points = grid_points;
        options.refine_rounds = refine_rounds;
        auto strat = strategy == "exhaustive"
                         ? dmac::PartitionStrategy::Exhaustive
                         : dmac::PartitionStrategy::Greedy;
        auto result = dmac::single_user_gep_bound(
            channel.model, ensemble.ensemble, vector_set_arg(region),
            vector_set_arg(margin), weights_arg(weights), strat, nullptr,
            options);
        return json_to_py(io::partition_result_to_json(result));
      },
      py::arg("channel"), py::arg("ensemble"), py::arg("region"),
      py::arg("margin"), py::arg("weights"), py::arg("strategy") = "greedy",
      py::arg("grid_points") = 101, py::arg("refine_rounds") = 3,
      "Best split of the anchor user's region across decode sets.");

  m.def(
      "tune_policy",
      [](const PyChannel& channel, const PyEnsemble& ensemble,
         py::handle region, py::handle margin, py::handle decode_set,
         py::handle weights, std::uint64_t seed, long long max_codewords) {
        auto w = weights_arg(weights);
        dmac::OperationConfig config(
            vector_set_arg(region), vector_set_arg(margin),
            decode_set_arg(decode_set, channel.model.num_users));
        auto policy = resolve_policy(channel, ensemble, config, w, py::none(),
                                     seed, max_codewords);
        return json_to_py(io::policy_to_json(policy));
      },
      py::arg("channel"), py::arg("ensemble"), py::arg("region"),
      py::arg("margin"), py::arg("decode_set"), py::arg("weights"),
      py::arg("seed") = 1, py::arg("max_codewords") = 1000000,
      "Tune threshold offsets on the seed's codebook realization.");

  m.def(
      "simulate",
      [](const PyChannel& channel, const PyEnsemble& ensemble,
         py::handle region, py::handle margin, py::handle decode_set,
         py::handle weights, py::handle policy, long long trials,
         std::uint64_t seed, const std::string& mode, int threads,
         long long max_codewords) {
        auto w = weights_arg(weights);
        dmac::OperationConfig config(
            vector_set_arg(region), vector_set_arg(margin),
            decode_set_arg(decode_set, channel.model.num_users));
        auto pol = resolve_policy(channel, ensemble, config, w, policy, seed,
                                  max_codewords);
        dmac::MonteCarloOptions options;
        options.trials = trials;
        options.seed = seed;
        options.mode = dmac::parse_error_mode(mode);
        options.threads = threads;
        options.max_codewords = max_codewords;
        auto report = dmac::run_monte_carlo(channel.model, ensemble.ensemble,
                                            config, pol, w, options);
        json doc = io::sim_report_to_json(report);
        doc["policy"] = io::policy_to_json(pol);
        return json_to_py(doc);
      },
      py::arg("channel"), py::arg("ensemble"), py::arg("region"),
      py::arg("margin"), py::arg("decode_set"), py::arg("weights"),
      py::arg("policy") = py::none(), py::arg("trials") = 1000,
      py::arg("seed") = 1, py::arg("mode") = "eq10", py::arg("threads") = 1,
      py::arg("max_codewords") = 1000000,
      "Monte Carlo run of the threshold decoder; policy None tunes one.");

  m.def(
      "oracle",
      [](const PyChannel& channel, const PyEnsemble& ensemble,
         py::handle region, py::handle margin, py::handle decode_set,
         py::handle weights, py::handle policy, std::uint64_t seed,
         const std::string& mode, long long term_cap, bool events,
         long long max_codewords) {
        auto w = weights_arg(weights);
        dmac::OperationConfig config(
            vector_set_arg(region), vector_set_arg(margin),
            decode_set_arg(decode_set, channel.model.num_users));
        auto pol = resolve_policy(channel, ensemble, config, w, policy, seed,
                                  max_codewords);
        dmac::OracleOptions options;
        options.seed = seed;
        options.mode = dmac::parse_error_mode(mode);
        options.term_cap = term_cap;
        options.events = events;
        options.max_codewords = max_codewords;
        auto report = dmac::exact_oracle(channel.model, ensemble.ensemble,
                                         config, pol, w, options);
        json doc = io::sim_report_to_json(report);
        doc["policy"] = io::policy_to_json(pol);
        return json_to_py(doc);
      },
      py::arg("channel"), py::arg("ensemble"), py::arg("region"),
      py::arg("margin"), py::arg("decode_set"), py::arg("weights"),
      py::arg("policy") = py::none(), py::arg("seed") = 1,
      py::arg("mode") = "eq10", py::arg("term_cap") = 10000000,
      py::arg("events") = false, py::arg("max_codewords") = 1000000,
      "Exact enumeration of the threshold decoder's error probabilities.");

  m.attr("__version__") = "0.1.0";
}
