#include "dmac/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace dmac::io {

namespace {

// byte offset -> 1-based line and column, for parse error messages
void locate(const std::string& text, size_t byte, size_t* line, size_t* col) {
  *line = 1;
  *col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++*line;
      *col = 1;
    } else {
      ++*col;
    }
  }
}

[[noreturn]] void fail(const std::string& context, const std::string& what) {
  throw UsageError(context.empty() ? what : context + ": " + what);
}

const json& member(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

int int_member(const json& j, const char* key, const std::string& where) {
  const json& v = member(j, key, where);
  if (!v.is_number_integer()) {
    fail(where, std::string("field '") + key + "' must be an integer");
  }
  return v.get<int>();
}

double number_member(const json& j, const char* key,
                     const std::string& where) {
  const json& v = member(j, key, where);
  if (!v.is_number()) {
    fail(where, std::string("field '") + key + "' must be a number");
  }
  return v.get<double>();
}

std::vector<double> number_array(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& e : v) {
    if (!e.is_number()) fail(where, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> int_array(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of integers");
  std::vector<int> out;
  out.reserve(v.size());
  for (const json& e : v) {
    if (!e.is_number_integer()) fail(where, "expected an array of integers");
    out.push_back(e.get<int>());
  }
  return out;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) throw UsageError("failed reading " + path);
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open " + path + " for writing");
  out << content;
  if (!out.good()) throw UsageError("failed writing " + path);
}

json parse_json_text(const std::string& text, const std::string& path) {
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    size_t line = 1, col = 1;
    size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    locate(text, byte, &line, &col);
    char pos[64];
    std::snprintf(pos, sizeof(pos), ":%zu:%zu: ", line, col);
    throw UsageError(path + pos + e.what());
  }
}

json load_json_file(const std::string& path) {
  return parse_json_text(read_text_file(path), path);
}

ChannelModel channel_from_json(const json& j) {
  const std::string where = "channel";
  ChannelModel ch;
  ch.num_users = int_member(j, "num_users", where);
  ch.input_alphabet_sizes = int_array(member(j, "input_alphabets", where),
                                      where + ".input_alphabets");
  ch.output_alphabet_size = int_member(j, "output_alphabet", where);
  ch.interferer_options.clear();
  if (j.contains("interferer_options")) {
    const json& opts = j["interferer_options"];
    if (!opts.is_array()) fail(where, "interferer_options must be an array");
    for (const json& o : opts) {
      if (!o.is_string()) {
        fail(where, "interferer_options entries must be strings");
      }
      ch.interferer_options.push_back(o.get<std::string>());
    }
  } else {
    ch.interferer_options = {"none"};
  }
  const json& rows = member(j, "transition", where);
  if (!rows.is_array()) fail(where, "transition must be an array of rows");
  for (size_t r = 0; r < rows.size(); ++r) {
    std::vector<double> row =
        number_array(rows[r], where + ".transition[" + std::to_string(r) + "]");
    ch.transition.insert(ch.transition.end(), row.begin(), row.end());
  }
  return ch;
}

json channel_to_json(const ChannelModel& ch) {
  json j;
  j["num_users"] = ch.num_users;
  j["input_alphabets"] = ch.input_alphabet_sizes;
  j["output_alphabet"] = ch.output_alphabet_size;
  j["interferer_options"] = ch.interferer_options;
  json rows = json::array();
  const long long nr = ch.num_rows();
  for (long long r = 0; r < nr; ++r) {
    json row = json::array();
    for (int y = 0; y < ch.output_alphabet_size; ++y) {
      row.push_back(ch.transition[r * ch.output_alphabet_size + y]);
    }
    rows.push_back(std::move(row));
  }
  j["transition"] = std::move(rows);
  return j;
}

CodeEnsemble ensemble_from_json(const json& j) {
  const std::string where = "ensemble";
  CodeEnsemble e;
  const json& users = member(j, "users", where);
  if (!users.is_array()) fail(where, "users must be an array");
  for (size_t u = 0; u < users.size(); ++u) {
    const std::string uw = where + ".users[" + std::to_string(u) + "]";
    const json& list = users[u];
    if (!list.is_array()) fail(uw, "expected an array of options");
    std::vector<CodeOption> opts;
    for (size_t m = 0; m < list.size(); ++m) {
      const std::string ow = uw + "[" + std::to_string(m) + "]";
      CodeOption opt;
      opt.rate_nats = number_member(list[m], "rate_nats", ow);
      opt.input_dist =
          number_array(member(list[m], "input_dist", ow), ow + ".input_dist");
      opts.push_back(std::move(opt));
    }
    e.user_options.push_back(std::move(opts));
  }
  e.num_interferer_options =
      j.contains("interferer_options") ? int_member(j, "interferer_options", where)
                                       : 1;
  return e;
}

json ensemble_to_json(const CodeEnsemble& e) {
  json j;
  json users = json::array();
  for (const auto& list : e.user_options) {
    json opts = json::array();
    for (const CodeOption& o : list) {
      json jo;
      jo["rate_nats"] = o.rate_nats;
      jo["input_dist"] = o.input_dist;
      opts.push_back(std::move(jo));
    }
    users.push_back(std::move(opts));
  }
  j["users"] = std::move(users);
  j["interferer_options"] = e.num_interferer_options;
  return j;
}

CodeIndexVector vector_from_json(const json& j) {
  const std::string where = "vector";
  CodeIndexVector g;
  g.options = int_array(member(j, "options", where), where + ".options");
  g.interferer =
      j.contains("g0") ? int_member(j, "g0", where) : 0;
  return g;
}

json vector_to_json(const CodeIndexVector& g) {
  json j;
  j["options"] = g.options;
  j["g0"] = g.interferer;
  return j;
}

std::vector<CodeIndexVector> vector_list_from_json(const json& j) {
  const json* arr = &j;
  if (j.is_object()) {
    arr = &member(j, "vectors", "vector list");
  }
  if (!arr->is_array()) {
    fail("vector list", "expected an array or {\"vectors\": [...]}");
  }
  std::vector<CodeIndexVector> out;
  for (const json& e : *arr) out.push_back(vector_from_json(e));
  return out;
}

json vector_list_to_json(const std::vector<CodeIndexVector>& vectors) {
  json j;
  json arr = json::array();
  for (const CodeIndexVector& g : vectors) arr.push_back(vector_to_json(g));
  j["vectors"] = std::move(arr);
  return j;
}

UserSet subset_from_json(const json& j) {
  std::vector<int> users = int_array(j, "subset");
  for (int u : users) {
    if (u < 0 || u >= kMaxUsers) fail("subset", "user index out of range");
  }
  return make_set(users);
}

json subset_to_json(UserSet s) {
  json arr = json::array();
  for (int u : set_members(s)) arr.push_back(u);
  return arr;
}

WeightAssignment weights_from_json(const json& j) {
  const std::string where = "weights";
  WeightAssignment w;
  w.blocklength = int_member(j, "N", where);
  const json& list = member(j, "weights", where);
  if (!list.is_array()) fail(where, "weights must be an array");
  for (size_t i = 0; i < list.size(); ++i) {
    const std::string ew = where + ".weights[" + std::to_string(i) + "]";
    CodeIndexVector g = vector_from_json(list[i]);
    double alpha = number_member(list[i], "alpha", ew);
    if (w.alpha.count(g)) fail(ew, "duplicate vector " + g.to_string());
    w.alpha.emplace(std::move(g), alpha);
  }
  return w;
}

json weights_to_json(const WeightAssignment& w) {
  json j;
  j["N"] = w.blocklength;
  json list = json::array();
  for (const auto& [g, alpha] : w.alpha) {
    json e = vector_to_json(g);
    e["alpha"] = alpha;
    list.push_back(std::move(e));
  }
  j["weights"] = std::move(list);
  return j;
}

ThresholdPolicy policy_from_json(const json& j) {
  const std::string where = "policy";
  ThresholdPolicy p;
  const json& list = member(j, "entries", where);
  if (!list.is_array()) fail(where, "entries must be an array");
  for (size_t i = 0; i < list.size(); ++i) {
    const std::string ew = where + ".entries[" + std::to_string(i) + "]";
    const json& e = list[i];
    ThresholdKey key;
    key.g = vector_from_json(member(e, "g", ew));
    key.g_tilde = vector_from_json(member(e, "g_tilde", ew));
    key.subset = subset_from_json(member(e, "subset", ew));
    double offset = number_member(e, "offset", ew);
    if (p.offsets.count(key)) fail(ew, "duplicate policy entry");
    p.offsets.emplace(std::move(key), offset);
  }
  return p;
}

json policy_to_json(const ThresholdPolicy& p) {
  json j;
  json list = json::array();
  for (const auto& [key, offset] : p.offsets) {
    json e;
    e["g"] = vector_to_json(key.g);
    e["g_tilde"] = vector_to_json(key.g_tilde);
    e["subset"] = subset_to_json(key.subset);
    e["offset"] = offset;
    list.push_back(std::move(e));
  }
  j["entries"] = std::move(list);
  return j;
}

namespace {

template <class F>
auto with_context(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const UsageError& e) {
    std::string what = e.what();
    if (what.rfind(path, 0) == 0) throw;  // already carries the path
    throw UsageError(path + ": " + what);
  }
}

}  // namespace

ChannelModel load_channel(const std::string& path) {
  return with_context(path,
                      [&] { return channel_from_json(load_json_file(path)); });
}

CodeEnsemble load_ensemble(const std::string& path) {
  return with_context(path,
                      [&] { return ensemble_from_json(load_json_file(path)); });
}

std::vector<CodeIndexVector> load_vector_list(const std::string& path) {
  return with_context(
      path, [&] { return vector_list_from_json(load_json_file(path)); });
}

WeightAssignment load_weights(const std::string& path) {
  return with_context(path,
                      [&] { return weights_from_json(load_json_file(path)); });
}

ThresholdPolicy load_policy(const std::string& path) {
  return with_context(path,
                      [&] { return policy_from_json(load_json_file(path)); });
}

std::string format_sig(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::uint64_t digest64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string digest_hex(std::string_view bytes) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(digest64(bytes)));
  return buf;
}

}  // namespace dmac::io
