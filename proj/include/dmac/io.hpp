#ifndef DMAC_IO_HPP
#define DMAC_IO_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dmac/channel.hpp"
#include "dmac/code_space.hpp"
#include "dmac/simulator.hpp"

namespace dmac::io {

// Malformed input the caller supplied: unreadable files, JSON syntax
// errors, missing or mistyped fields. Distinct from domain errors so
// the command line tool can exit 2 instead of 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using json = nlohmann::ordered_json;

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Parses with a "path:line:column: message" UsageError on bad syntax.
json parse_json_text(const std::string& text, const std::string& path);
json load_json_file(const std::string& path);

ChannelModel channel_from_json(const json& j);
json channel_to_json(const ChannelModel& channel);

CodeEnsemble ensemble_from_json(const json& j);
json ensemble_to_json(const CodeEnsemble& ensemble);

// {"options": [0, 1], "g0": 0}; g0 defaults to 0
CodeIndexVector vector_from_json(const json& j);
json vector_to_json(const CodeIndexVector& g);

// Either {"vectors": [...]} or a bare array of vector objects.
std::vector<CodeIndexVector> vector_list_from_json(const json& j);
json vector_list_to_json(const std::vector<CodeIndexVector>& vectors);

// Subsets serialize as ascending user arrays, e.g. [0, 2].
UserSet subset_from_json(const json& j);
json subset_to_json(UserSet s);

WeightAssignment weights_from_json(const json& j);
json weights_to_json(const WeightAssignment& weights);

ThresholdPolicy policy_from_json(const json& j);
json policy_to_json(const ThresholdPolicy& policy);

// File loaders wrapping the structural errors with the file path.
ChannelModel load_channel(const std::string& path);
CodeEnsemble load_ensemble(const std::string& path);
std::vector<CodeIndexVector> load_vector_list(const std::string& path);
WeightAssignment load_weights(const std::string& path);
ThresholdPolicy load_policy(const std::string& path);

// 12 significant digits, enough to round-trip any value we print while
// keeping CSV output stable across runs.
std::string format_sig(double v);

// FNV-1a over the raw bytes; hex form for manifests.
std::uint64_t digest64(std::string_view bytes);
std::string digest_hex(std::string_view bytes);

}  // namespace dmac::io

#endif
