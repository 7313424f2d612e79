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

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aroface/gradcheck.hpp"
#include "aroface/metrics.hpp"
#include "aroface/training.hpp"

namespace aroface {

/// Columns padded to their widest cell; numeric-looking cells are right aligned.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add_row(std::vector<std::string> row);
  std::string render() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/*!
 * JSON reports. Every object carries a "kind" field (eval, train,
 * experiments, alpha_study, gradcheck) so render_text can lay it out again.
 * Wall-clock timings are never included, which keeps reports comparable
 * byte for byte across reruns.
 */
nlohmann::json eval_report_json(const EvalReport& report);
nlohmann::json train_report_json(const TrainResult& result);
nlohmann::json experiments_json(const std::vector<ExperimentRow>& rows);
nlohmann::json alpha_study_json(const AlphaStudy& study);
nlohmann::json gradcheck_json(const GradcheckReport& report);

/// Aligned-column text for any report produced above.
std::string render_text(const nlohmann::json& report);

inline std::string train_report_text(const TrainResult& r) { return render_text(train_report_json(r)); }

/// Writes <base>.json and <base>.txt. Throws IoError on failure.
void write_report(const nlohmann::json& report, const std::string& text, const std::string& base);

nlohmann::json read_report(const std::string& path);

}  // namespace aroface
