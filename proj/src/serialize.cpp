#include "pbdn/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pbdn/error.hpp"

namespace pbdn {

namespace {

using nlohmann::json;

json hyperparams_json(const IshmHyperparams& hp) {
  return json{{"gamma0", hp.gamma0}, {"c0", hp.c0},         {"a0", hp.a0},
              {"b0", hp.b0},         {"e0", hp.e0},         {"f0", hp.f0},
              {"a_beta", hp.a_beta}, {"b_beta_init", hp.b_beta_init}, {"k_max", hp.k_max}};
}

IshmHyperparams hyperparams_from(const json& j) {
  IshmHyperparams hp;
  hp.gamma0 = j.at("gamma0").get<double>();
  hp.c0 = j.at("c0").get<double>();
  hp.a0 = j.at("a0").get<double>();
  hp.b0 = j.at("b0").get<double>();
  hp.e0 = j.at("e0").get<double>();
  hp.f0 = j.at("f0").get<double>();
  hp.a_beta = j.at("a_beta").get<double>();
  hp.b_beta_init = j.at("b_beta_init").get<double>();
  hp.k_max = j.at("k_max").get<std::size_t>();
  return hp;
}

json model_json(const IshmModel& m) {
  const std::size_t k = m.size();
  std::vector<double> weights;
  std::vector<double> beta(m.input_dim * k);
  for (std::size_t c = 0; c < k; ++c) {
    weights.push_back(m.hyperplanes[c].weight);
    for (std::size_t v = 0; v < m.input_dim; ++v) {
      beta[v * k + c] = m.hyperplanes[c].beta[static_cast<Eigen::Index>(v)];
    }
  }
  return json{{"input_dim", m.input_dim},
              {"label_flipped", m.label_flipped},
              {"r", weights},
              {"beta", {{"rows", m.input_dim}, {"cols", k}, {"data", beta}}},
              {"hyperparams", hyperparams_json(m.hyperparams)}};
}

IshmModel model_from(const json& j) {
  IshmModel m;
  m.input_dim = j.at("input_dim").get<std::size_t>();
  m.label_flipped = j.at("label_flipped").get<bool>();
  m.hyperparams = hyperparams_from(j.at("hyperparams"));
  const auto weights = j.at("r").get<std::vector<double>>();
  const json& b = j.at("beta");
  const auto rows = b.at("rows").get<std::size_t>();
  const auto cols = b.at("cols").get<std::size_t>();
  const auto data = b.at("data").get<std::vector<double>>();
  if (rows != m.input_dim || cols != weights.size() || data.size() != rows * cols) {
    throw DimensionError("model file: coefficient array dimensions are inconsistent");
  }
  for (std::size_t c = 0; c < cols; ++c) {
    Hyperplane h;
    h.weight = weights[c];
    h.beta.resize(static_cast<Eigen::Index>(rows));
    for (std::size_t v = 0; v < rows; ++v) h.beta[static_cast<Eigen::Index>(v)] = data[v * cols + c];
    m.hyperplanes.push_back(std::move(h));
  }
  return m;
}

json standardization_json(const Standardization& s) {
  std::vector<int> constant(s.constant.begin(), s.constant.end());
  return json{{"mean", s.mean}, {"stddev", s.stddev}, {"constant", constant}};
}

Standardization standardization_from(const json& j) {
  Standardization s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  for (int c : j.at("constant").get<std::vector<int>>()) s.constant.push_back(c != 0);
  return s;
}

}  // namespace

std::string stack_to_json(const PbdnStack& stack) {
  json layers = json::array();
  for (const IshmPair& p : stack.pairs) {
    layers.push_back(json{{"layer_index", p.layer_index},
                          {"model_pos", model_json(p.model_pos)},
                          {"model_neg", model_json(p.model_neg)}});
  }
  json trace = json::array();
  for (const CriterionPoint& c : stack.criterion_trace) {
    json value = std::isfinite(c.value) ? json(c.value) : json(nullptr);
    trace.push_back(json{{"depth", c.depth}, {"value", value}});
  }
  json doc{{"format", kStackFormat},
           {"version", kStackVersion},
           {"concat", to_string(stack.concat)},
           {"hyperparams", hyperparams_json(stack.hyperparams)},
           {"layer_widths", stack.layer_widths},
           {"selected_depth", stack.selected_depth},
           {"criterion_trace", trace},
           {"layers", layers}};
  doc["standardization"] =
      stack.standardization ? standardization_json(*stack.standardization) : json(nullptr);
  return doc.dump(1) + "\n";
}

PbdnStack stack_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file: ") + e.what(), 0);
  }
  try {
    if (doc.at("format").get<std::string>() != kStackFormat) {
      throw std::invalid_argument("model file: unknown format tag");
    }
    if (doc.at("version").get<int>() != kStackVersion) {
      throw std::invalid_argument("model file: unsupported version");
    }
    PbdnStack stack;
    stack.concat = parse_concat_mode(doc.at("concat").get<std::string>());
    stack.hyperparams = hyperparams_from(doc.at("hyperparams"));
    stack.layer_widths = doc.at("layer_widths").get<std::vector<std::size_t>>();
    stack.selected_depth = doc.at("selected_depth").get<std::size_t>();
    for (const json& c : doc.at("criterion_trace")) {
      const json& v = c.at("value");
      stack.criterion_trace.push_back(
          {c.at("depth").get<std::size_t>(),
           v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>()});
    }
    for (const json& layer : doc.at("layers")) {
      IshmPair p;
      p.layer_index = layer.at("layer_index").get<std::size_t>();
      p.model_pos = model_from(layer.at("model_pos"));
      p.model_neg = model_from(layer.at("model_neg"));
      stack.pairs.push_back(std::move(p));
    }
    if (!doc.at("standardization").is_null()) {
      stack.standardization = standardization_from(doc.at("standardization"));
    }
    stack.validate();
    return stack;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model file: ") + e.what());
  }
}

void save_stack(const std::string& path, const PbdnStack& stack) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << stack_to_json(stack);
  if (!out) throw std::runtime_error("failed writing " + path);
}

PbdnStack load_stack(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return stack_from_json(buf.str());
}

}  // namespace pbdn
