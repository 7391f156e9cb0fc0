#include "tem/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tem {

namespace {

using nlohmann::json;

json finite_or_inf(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  return x;
}

std::string csv_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double parse_csv_double(const std::string& s) {
  if (s == "inf") return kInfinity;
  if (s == "-inf") return -kInfinity;
  if (s == "nan") return std::nan("");
  return std::stod(s);
}

json params_to_json(const GenerationParams& p) {
  json j;
  j["num_topics"] = p.num_topics;
  j["num_words"] = p.num_words;
  j["num_docs"] = p.num_docs;
  j["max_doc_topics"] = p.max_doc_topics;
  j["rho"] = p.rho;
  j["overlap_mass"] = p.overlap_mass;
  j["topics_per_word_max"] = p.topics_per_word_max;
  j["min_entry"] = p.min_entry;
  j["extra_topic_prob"] = p.extra_topic_prob;
  j["dominant_floor"] = p.dominant_floor;
  j["minor_floor"] = p.minor_floor;
  j["shared_vocab_frac"] = p.shared_vocab_frac;
  j["exact_docs"] = p.exact_docs;
  j["doc_length"] = p.doc_length;
  j["seed"] = p.seed;
  if (p.case2) {
    json c;
    c["p"] = p.case2->anchor_mass_p;
    c["b"] = p.case2->dynamic_range_b;
    c["c_l"] = p.case2->c_l;
    c["c_s"] = p.case2->c_s;
    c["delta"] = p.case2->delta;
    c["heavy_frac"] = p.case2->heavy_frac;
    c["anchor_words_per_topic"] = p.case2->anchor_words_per_topic;
    j["case2"] = c;
  }
  if (p.common) {
    json c;
    c["kappa"] = p.common->kappa;
    c["mass_exponent"] = p.common->mass_exponent;
    c["heavy_exponent"] = p.common->heavy_exponent;
    c["num_words"] = p.common->num_words;
    j["common"] = c;
  }
  return j;
}

GenerationParams params_from_json(const json& j) {
  GenerationParams p;
  p.num_topics = j.at("num_topics").get<int>();
  p.num_words = j.at("num_words").get<int>();
  p.num_docs = j.at("num_docs").get<int>();
  p.max_doc_topics = j.value("max_doc_topics", 1);
  p.rho = j.value("rho", 0.0);
  p.overlap_mass = j.value("overlap_mass", 0.05);
  p.topics_per_word_max = j.value("topics_per_word_max", 0);
  p.min_entry = j.value("min_entry", 0.0);
  p.extra_topic_prob = j.value("extra_topic_prob", 0.0);
  p.dominant_floor = j.value("dominant_floor", 0.5);
  p.minor_floor = j.value("minor_floor", 0.1);
  p.shared_vocab_frac = j.value("shared_vocab_frac", 0.1);
  p.exact_docs = j.value("exact_docs", true);
  p.doc_length = j.value("doc_length", static_cast<std::int64_t>(0));
  p.seed = j.value("seed", static_cast<std::uint64_t>(0));
  if (j.contains("case2") && !j["case2"].is_null()) {
    const json& c = j["case2"];
    Case2Params c2;
    c2.anchor_mass_p = c.at("p").get<double>();
    c2.dynamic_range_b = c.at("b").get<double>();
    c2.c_l = c.at("c_l").get<double>();
    c2.c_s = c.at("c_s").get<double>();
    c2.delta = c.value("delta", 0.0);
    c2.heavy_frac = c.value("heavy_frac", 0.0);
    c2.anchor_words_per_topic = c.value("anchor_words_per_topic", 0);
    p.case2 = c2;
  }
  if (j.contains("common") && !j["common"].is_null()) {
    const json& c = j["common"];
    CommonWordsParams cw;
    cw.kappa = c.at("kappa").get<double>();
    cw.mass_exponent = c.value("mass_exponent", 4);
    cw.heavy_exponent = c.value("heavy_exponent", 4);
    cw.num_words = c.value("num_words", 4);
    p.common = cw;
  }
  return p;
}

json matrix_to_json(const TopicWordMatrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.num_topics(); ++i) {
    json row = json::array();
    for (double v : m.row(i)) row.push_back(v);
    rows.push_back(std::move(row));
  }
  return rows;
}

TopicWordMatrix matrix_from_json(const json& j) {
  const int k = static_cast<int>(j.size());
  if (k == 0) throw std::runtime_error("matrix: no rows");
  const int n = static_cast<int>(j.at(0).size());
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(k) * n);
  for (const auto& row : j) {
    if (static_cast<int>(row.size()) != n) throw std::runtime_error("matrix: ragged rows");
    for (const auto& v : row) values.push_back(v.get<double>());
  }
  return TopicWordMatrix(k, n, std::move(values));
}

json sparse_weights(const std::vector<double>& w) {
  json out = json::array();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) out.push_back(json::array({i, w[i]}));
  }
  return out;
}

std::vector<double> dense_weights(const json& j, int size) {
  std::vector<double> w(size, 0.0);
  for (const auto& pair : j) {
    const int i = pair.at(0).get<int>();
    if (i < 0 || i >= size) throw std::runtime_error("sparse vector: index out of range");
    w[i] = pair.at(1).get<double>();
  }
  return w;
}

}  // namespace

const char* const kTraceCsvHeader = "t,C_beta,C_gamma,kl_beta_max,dominant_acc,estep_objective_mean";

std::string instance_to_json(const Instance& instance) {
  json j;
  j["format"] = "temlab-instance-v1";
  j["params"] = params_to_json(instance.params);
  j["epsilon_achieved"] = instance.epsilon_achieved;
  j["beta_true"] = matrix_to_json(instance.beta_true);
  json docs = json::array();
  for (const auto& doc : instance.docs) {
    json d;
    json freqs = json::array();
    for (const auto& e : doc.freqs) freqs.push_back(json::array({e.word, e.freq}));
    d["freqs"] = std::move(freqs);
    if (doc.length) {
      d["n_words"] = *doc.length;
    } else {
      d["n_words"] = "exact";
    }
    if (doc.truth) d["truth"] = sparse_weights(doc.truth->weights());
    docs.push_back(std::move(d));
  }
  j["docs"] = std::move(docs);
  return j.dump();
}

Instance instance_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("instance: invalid JSON: ") + e.what());
  }
  if (j.value("format", "") != "temlab-instance-v1") {
    throw std::runtime_error("instance: unknown format tag");
  }
  Instance instance;
  instance.params = params_from_json(j.at("params"));
  instance.epsilon_achieved = j.value("epsilon_achieved", 0.0);
  instance.beta_true = matrix_from_json(j.at("beta_true"));
  const int k = instance.beta_true.num_topics();
  const int n = instance.beta_true.num_words();
  for (const auto& d : j.at("docs")) {
    Document doc;
    doc.vocab_size = n;
    for (const auto& pair : d.at("freqs")) {
      doc.freqs.push_back({pair.at(0).get<int>(), pair.at(1).get<double>()});
    }
    const auto& nw = d.at("n_words");
    if (nw.is_string()) {
      if (nw.get<std::string>() != "exact") throw std::runtime_error("instance: bad n_words marker");
    } else {
      doc.length = nw.get<std::int64_t>();
    }
    if (d.contains("truth")) {
      doc.truth = TopicProportions(dense_weights(d["truth"], k));
    }
    doc.validate();
    instance.docs.push_back(std::move(doc));
  }
  return instance;
}

void save_instance(const Instance& instance, const std::filesystem::path& path) {
  write_text_file(path, instance_to_json(instance));
}

Instance load_instance(const std::filesystem::path& path) {
  return instance_from_json(read_text_file(path));
}

GenerateConfig generate_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config: invalid JSON: ") + e.what());
  }
  GenerateConfig config;
  config.case_id = j.value("case", 1);
  if (config.case_id != 1 && config.case_id != 2) {
    throw std::runtime_error("config: \"case\" must be 1 or 2");
  }
  config.params = params_from_json(j);
  if (config.case_id == 2 && !config.params.case2) {
    throw std::runtime_error("config: case 2 requires a \"case2\" block");
  }
  return config;
}

std::string state_to_json(const InferenceState& state) {
  json j;
  j["format"] = "temlab-state-v1";
  j["iteration"] = state.iteration;
  j["variant"] = variant_name(state.variant);
  j["beta"] = matrix_to_json(state.beta);
  json gammas = json::array();
  for (const auto& g : state.gammas) gammas.push_back(sparse_weights(g.weights()));
  j["gammas"] = std::move(gammas);
  j["doc_supports"] = state.doc_supports;
  j["topic_supports"] = state.topic_supports;
  return j.dump();
}

InferenceState state_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("state: invalid JSON: ") + e.what());
  }
  if (j.value("format", "") != "temlab-state-v1") {
    throw std::runtime_error("state: unknown format tag");
  }
  InferenceState state;
  state.iteration = j.value("iteration", 0);
  const auto variant = variant_from_name(j.value("variant", "kl_tem"));
  if (!variant) throw std::runtime_error("state: unknown variant");
  state.variant = *variant;
  state.beta = matrix_from_json(j.at("beta"));
  for (const auto& g : j.at("gammas")) {
    state.gammas.emplace_back(dense_weights(g, state.beta.num_topics()));
  }
  state.doc_supports = j.value("doc_supports", std::vector<std::vector<int>>{});
  state.topic_supports = j.value("topic_supports", std::vector<std::vector<int>>{});
  return state;
}

void save_state(const InferenceState& state, const std::filesystem::path& path) {
  write_text_file(path, state_to_json(state));
}

std::string trace_row_to_csv(const ErrorTraceRow& row) {
  std::ostringstream os;
  os << row.t << ',' << csv_double(row.c_beta) << ',' << csv_double(row.c_gamma) << ','
     << csv_double(row.kl_beta_max) << ',' << csv_double(row.dominant_acc) << ','
     << csv_double(row.estep_objective_mean);
  return os.str();
}

std::string trace_to_csv(const ErrorTrace& trace) {
  std::ostringstream os;
  os << kTraceCsvHeader << '\n';
  for (const auto& row : trace.rows) os << trace_row_to_csv(row) << '\n';
  return os.str();
}

ErrorTrace trace_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kTraceCsvHeader) {
    throw std::runtime_error("trace: missing or malformed CSV header");
  }
  ErrorTrace trace;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 6) throw std::runtime_error("trace: malformed row: " + line);
    ErrorTraceRow row;
    row.t = std::stoi(fields[0]);
    row.c_beta = parse_csv_double(fields[1]);
    row.c_gamma = parse_csv_double(fields[2]);
    row.kl_beta_max = parse_csv_double(fields[3]);
    row.dominant_acc = parse_csv_double(fields[4]);
    row.estep_objective_mean = parse_csv_double(fields[5]);
    trace.rows.push_back(row);
  }
  return trace;
}

void save_trace(const ErrorTrace& trace, const std::filesystem::path& path) {
  write_text_file(path, trace_to_csv(trace));
}

ErrorTrace load_trace(const std::filesystem::path& path) {
  return trace_from_csv(read_text_file(path));
}

std::string phase_report_to_json(const PhaseReport& report) {
  json j;
  j["phase1_iteration"] = report.phase1_iteration;
  j["phase2_iteration"] = report.phase2_iteration;
  j["offanchor_decay_ok"] = report.offanchor_decay_ok;
  j["first_decay_violation_t"] = report.first_decay_violation_t;
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row;
    row["t"] = r.t;
    row["max_offanchor_ratio"] = finite_or_inf(r.max_offanchor_ratio);
    row["min_anchor_ratio"] = finite_or_inf(r.min_anchor_ratio);
    row["max_offsupport_entry"] = finite_or_inf(r.max_offsupport_entry);
    row["dominant_acc"] = r.dominant_acc;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j.dump();
}

std::string assumption_report_to_json(const AssumptionReport& report) {
  json rows = json::array();
  for (const auto& e : report.entries) {
    json row;
    row["name"] = e.name;
    row["holds"] = e.holds;
    row["witness"] = e.witness;
    row["measured_value"] = finite_or_inf(e.measured_value);
    rows.push_back(std::move(row));
  }
  json j;
  j["all_hold"] = report.all_hold();
  j["entries"] = std::move(rows);
  return j.dump();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace tem
