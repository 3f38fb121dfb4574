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

// Generates a short synthetic series, fits the default ensemble on the first
// 80% and reports per-model variance, weights and validation AUC.

#include <cstdio>

#include "lafad/lafad.hpp"

int main() {
  lafad::SynthConfig synth = lafad::default_config(10.0);
  synth.n = 4032;  // twelve weeks
  synth.pi_mix = 0.995;
  const lafad::SynthOutput data = lafad::generate(synth);

  lafad::ExperimentConfig cfg = lafad::default_experiment_config(synth.seed);
  cfg.split.repeat_count = 1;
  cfg.pipeline.plan.B = 10;
  cfg.pipeline.sampling.L = 500;

  const lafad::ExperimentReport rep = lafad::run_experiment(data.series, cfg, "quickstart");
  std::printf("%-16s %10s %8s %8s\n", "model", "mu_sigma", "weight", "AUC");
  for (std::size_t m = 0; m < rep.model_labels.size(); ++m)
    std::printf("%-16s %10.5f %8.4f %8.3f\n", rep.model_labels[m].c_str(), rep.mu_sigma[0][m], rep.weights[0][m],
                rep.model_auc[0][m]);
  for (std::size_t i = 0; i < rep.methods.size(); ++i)
    std::printf("%s validation AUC: %.3f\n", rep.methods[i].c_str(), rep.mean[i]);
  return 0;
}
