#include "dsch/config.hpp"

#include <algorithm>

#include "dsch/io.hpp"

namespace dsch {

namespace {

using nlohmann::json;

template <class T>
void take(const json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ContractError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ContractError("config: top level must be an object");
  static const char* const kKeys[] = {"r",          "m1",         "m2",          "tau",
                                      "lambda",     "epochs",     "batch_size",  "learning_rate",
                                      "seed",       "noise_scale", "mask_rate",  "warm_start",
                                      "diagonal_covariance",      "variant",     "record_timings",
                                      "features",   "labels",     "query_features", "query_labels",
                                      "map_k",      "precision_k"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw ContractError("config: unknown key '" + key + "'");
    }
  }
  RunConfig c;
  TrainConfig& t = c.train;
  take(doc, "r", t.code_length);
  take(doc, "m1", t.m1);
  take(doc, "m2", t.m2);
  take(doc, "tau", t.tau);
  take(doc, "lambda", t.lambda);
  take(doc, "epochs", t.epochs);
  take(doc, "batch_size", t.batch_size);
  take(doc, "learning_rate", t.learning_rate);
  take(doc, "seed", t.seed);
  take(doc, "noise_scale", t.noise_scale);
  take(doc, "mask_rate", t.mask_rate);
  take(doc, "warm_start", t.warm_start);
  take(doc, "diagonal_covariance", t.diagonal_covariance);
  take(doc, "record_timings", t.record_timings);
  if (doc.contains("variant")) {
    std::string v;
    take(doc, "variant", v);
    t.variant = parse_variant(v);
  }
  take(doc, "features", c.features);
  take(doc, "labels", c.labels);
  take(doc, "query_features", c.query_features);
  take(doc, "query_labels", c.query_labels);
  take(doc, "map_k", c.map_k);
  take(doc, "precision_k", c.precision_k);
  t.validate();
  if (c.map_k < 1) throw ContractError("config: map_k must be >= 1");
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  const std::string text = io::read_text(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path, e.byte, e.what());
  }
  try {
    return from_json(doc);
  } catch (const ContractError& e) {
    throw ContractError(path + ": " + e.what());
  }
}

json RunConfig::to_json() const {
  const TrainConfig& t = train;
  return json{{"r", t.code_length},
              {"m1", t.m1},
              {"m2", t.m2},
              {"tau", t.tau},
              {"lambda", t.lambda},
              {"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"learning_rate", t.learning_rate},
              {"seed", t.seed},
              {"noise_scale", t.noise_scale},
              {"mask_rate", t.mask_rate},
              {"warm_start", t.warm_start},
              {"diagonal_covariance", t.diagonal_covariance},
              {"variant", to_string(t.variant)},
              {"record_timings", t.record_timings},
              {"features", features},
              {"labels", labels},
              {"query_features", query_features},
              {"query_labels", query_labels},
              {"map_k", map_k},
              {"precision_k", precision_k}};
}

EvalOptions RunConfig::eval_options() const {
  EvalOptions e;
  e.map_k = map_k;
  e.precision_ks = precision_k;
  return e;
}

}  // namespace dsch
