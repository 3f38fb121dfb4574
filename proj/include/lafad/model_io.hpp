// Copyright 2026 The lafad Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// JSON persistence for fitted ensembles. Documents carry a schema_version;
// readers reject any version they do not know and any structurally invalid
// content with SchemaError, before returning anything to the caller.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <span>
#include <string>

#include "lafad/boosted_embedding.hpp"
#include "lafad/config.hpp"
#include "lafad/error.hpp"
#include "lafad/gmm.hpp"
#include "lafad/variance_ensemble.hpp"

namespace lafad {

inline constexpr int kModelSchemaVersion = 1;
inline constexpr std::string_view kModelFormat = "lafad-ensemble";

inline void to_json(json& j, const Gmm1D& g) {
  j = json{{"weight0", g.weight0}, {"weight1", g.weight1}, {"mean0", g.mean0},
           {"mean1", g.mean1},     {"var0", g.var0},       {"var1", g.var1}};
}
inline void from_json(const json& j, Gmm1D& g) {
  j.at("weight0").get_to(g.weight0);
  j.at("weight1").get_to(g.weight1);
  j.at("mean0").get_to(g.mean0);
  j.at("mean1").get_to(g.mean1);
  j.at("var0").get_to(g.var0);
  j.at("var1").get_to(g.var1);
  if (!(g.var0 > 0.0 && g.var1 > 0.0)) throw SchemaError("mixture variance must be positive");
  if (!(g.weight0 >= 0.0 && g.weight1 >= 0.0)) throw SchemaError("mixture weight must be nonnegative");
}

inline void to_json(json& j, const WeakLearner& w) {
  j = json{{"key", std::string(to_string(w.key))}, {"table", w.table}, {"observed", w.observed},
           {"fallback", w.fallback}};
}
inline void from_json(const json& j, WeakLearner& w) {
  w.key = calendar_key_from_string(j.at("key").get<std::string>());
  j.at("table").get_to(w.table);
  j.at("observed").get_to(w.observed);
  j.at("fallback").get_to(w.fallback);
  const auto card = static_cast<std::size_t>(cardinality(w.key));
  if (w.table.size() != card || w.observed.size() != card)
    throw SchemaError("learner table for " + std::string(to_string(w.key)) + " must have " + std::to_string(card) +
                      " entries");
}

inline void to_json(json& j, const BoostedModel& m) {
  j = json{{"learners", m.learners},
           {"termination_eps", m.termination_eps},
           {"fitted_on", m.fitted_on},
           {"residual_norms", m.residual_norms}};
  if (m.residual)
    j["residual"] = json{{"intercept", m.residual->intercept}, {"coefficients", m.residual->coefficients}};
  else
    j["residual"] = nullptr;
}
inline void from_json(const json& j, BoostedModel& m) {
  j.at("learners").get_to(m.learners);
  if (m.learners.empty()) throw SchemaError("boosted model has no learners");
  j.at("termination_eps").get_to(m.termination_eps);
  j.at("fitted_on").get_to(m.fitted_on);
  j.at("residual_norms").get_to(m.residual_norms);
  m.residual.reset();
  const json& r = j.at("residual");
  if (!r.is_null()) {
    LagRegression reg;
    r.at("intercept").get_to(reg.intercept);
    r.at("coefficients").get_to(reg.coefficients);
    if (reg.coefficients.empty()) throw SchemaError("residual model has no coefficients");
    m.residual = std::move(reg);
  }
}

inline json ensemble_to_json(const FittedEnsemble& e, const std::string& config_fingerprint = "") {
  json models = json::array();
  for (const auto& fm : e.models) {
    json cells = json::array();
    for (const auto& c : fm.cells) {
      json cell = c.model;
      cell["gmm"] = c.gmm;
      cells.push_back(std::move(cell));
    }
    models.push_back(json{{"spec", fm.spec}, {"cells", std::move(cells)}});
  }
  return json{{"format", kModelFormat},
              {"schema_version", kModelSchemaVersion},
              {"config_fingerprint", config_fingerprint},
              {"window", e.window},
              {"mu_sigma", e.mu_sigma},
              {"weights", e.weights},
              {"models", std::move(models)}};
}

inline FittedEnsemble ensemble_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != kModelFormat) throw SchemaError("not a lafad model file");
    const int version = j.at("schema_version").get<int>();
    if (version != kModelSchemaVersion)
      throw SchemaError("unsupported model schema_version " + std::to_string(version) + " (expected " +
                        std::to_string(kModelSchemaVersion) + ")");
    FittedEnsemble e;
    j.at("window").get_to(e.window);
    j.at("mu_sigma").get_to(e.mu_sigma);
    j.at("weights").get_to(e.weights);
    for (const auto& jm : j.at("models")) {
      FittedModel fm;
      jm.at("spec").get_to(fm.spec);
      fm.spec.validate();
      for (const auto& jc : jm.at("cells")) {
        ModelCell c;
        jc.get_to(c.model);
        jc.at("gmm").get_to(c.gmm);
        c.model.spec = fm.spec;
        const std::size_t lags = c.model.residual ? c.model.residual->coefficients.size() : 0;
        if (lags != fm.spec.residual_lags) throw SchemaError("residual model does not match spec " + fm.spec.label());
        if (lags > e.window) throw SchemaError("residual model needs more lags than the stored window");
        fm.cells.push_back(std::move(c));
      }
      if (fm.cells.size() < 2) throw SchemaError("model " + fm.spec.label() + " needs at least one bootstrap cell");
      e.models.push_back(std::move(fm));
    }
    if (e.models.empty()) throw SchemaError("model file contains no models");
    if (e.weights.size() != e.models.size() || e.mu_sigma.size() != e.models.size())
      throw SchemaError("weights and mu_sigma must have one entry per model");
    return e;
  } catch (const SchemaError&) {
    throw;
  } catch (const std::exception& ex) {
    throw SchemaError(std::string("malformed model file: ") + ex.what());
  }
}

/// Model-variance report and per-sample verdicts of one pipeline run. `val`
/// must be the validation samples the run was scored on.
inline json pipeline_report_to_json(const PipelineResult& r, std::span<const WindowedSample> val) {
  if (val.size() != r.verdicts.size()) throw InvalidArgument("pipeline report: validation sample count mismatch");
  json models = json::array();
  for (std::size_t m = 0; m < r.ensemble.models.size(); ++m)
    models.push_back(json{{"id", m},
                          {"label", r.ensemble.models[m].spec.label()},
                          {"spec", r.ensemble.models[m].spec},
                          {"mu_sigma", r.report.mu_sigma[m]},
                          {"weight", r.report.weights[m]}});
  json samples = json::array();
  for (std::size_t k = 0; k < val.size(); ++k) {
    const auto& v = r.verdicts[k];
    json scores = json::array();
    for (const auto& ms : r.model_scores) scores.push_back(ms[k]);
    samples.push_back(json{{"timestamp", format_timestamp(val[k].timestamp)},
                           {"model_scores", std::move(scores)},
                           {"votes", v.votes},
                           {"combined_score", v.combined_score},
                           {"soft_score", v.soft_score},
                           {"decision", v.decision}});
  }
  return json{{"models", std::move(models)},
              {"coverage_fallback_rows", r.coverage_fallback_rows},
              {"samples", std::move(samples)}};
}

inline void save_ensemble(const std::filesystem::path& path, const FittedEnsemble& e,
                          const std::string& config_fingerprint = "") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file " + path.string());
  out << ensemble_to_json(e, config_fingerprint).dump(1) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

inline FittedEnsemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw SchemaError("model file " + path.string() + " is not valid JSON: " + ex.what());
  }
  return ensemble_from_json(j);
}

}  // namespace lafad
