/**
 * Copyright 2026 The aroface Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aroface/adversary.hpp"
#include "aroface/data.hpp"
#include "aroface/recognizer.hpp"

namespace aroface {

enum class TrainMode { kBaseline, kAroface };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);

/*!
 * Component mask from "none" or a '+' or ',' separated list of rotation,
 * translation, translation_u, translation_v, scale, all. Returns false for
 * "none".
 */
bool parse_component_subset(const std::string& text, std::array<bool, 4>& active);

/*!
 * Everything a run needs. Text form is UTF-8 "key = value" lines; '#'
 * starts a comment. Keys are listed by RunConfig::keys().
 *
 * When data.train_path is empty a synthetic benchmark is generated from the
 * synth.* keys (train and test splits share identities, differ in noise).
 */
struct RunConfig {
  // data
  std::string train_path;
  std::string test_path;
  std::string template_path;
  SyntheticSpec synth;
  int synth_test_per_class = 50;

  // model
  ModelSpec model;
  MarginConfig margin;

  // attack
  PGDConfig pgd;  // pgd.budget and pgd.landmarks are filled from budget.* / template_path

  // optimizer (cosine-annealed from lr to 0 over all iterations)
  SgdSettings optim{0.05, 0.9, 1e-4};
  int epochs = 5;
  int batch_size = 64;
  TrainMode mode = TrainMode::kBaseline;

  // evaluation
  PerturbSpec eval_perturb{0.03, 0.75, 0.03};
  std::vector<double> far_list{1e-1, 1e-2, 1e-3, 1e-4};

  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "runs/default";

  /// All recognized keys, in canonical order.
  static const std::vector<std::string>& keys();

  /// Set one key from its text value. Throws ContractError on unknown key or bad value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  /// Cross-field validation (ranges, paths that must exist). Throws ContractError.
  void validate(bool require_paths = true) const;

  /// Fully resolved "key = value" text.
  std::string to_text() const;
};

/// Parse "key = value" text on top of `base`. Throws ContractError with line numbers.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

/// Resolve the landmark template for a run: the configured file rescaled to the data grid.
LandmarkTemplate resolve_template(const RunConfig& cfg, GridShape data_shape);

}  // namespace aroface
