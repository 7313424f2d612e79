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

#include "aroface/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aroface/error.hpp"

namespace aroface {
namespace {

using nlohmann::json;

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

bool numeric_cell(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '+' || c == 'e' || c == '*';
  });
}

json stat_json(const RunningStat& s) { return {{"count", s.count}, {"mean", s.mean}, {"std", s.stddev()}}; }

json set_json(const SetMetrics& m) {
  json tar = json::array();
  for (const auto& t : m.tar) {
    tar.push_back({{"far", t.far}, {"threshold", t.threshold}, {"tar", t.tar}, {"reliable", t.reliable}});
  }
  return {{"accuracy", m.accuracy}, {"rank1", m.rank1},           {"rank5", m.rank5},
          {"genuine_pairs", m.genuine_pairs}, {"impostor_pairs", m.impostor_pairs}, {"tar", tar}};
}

json attack_json(const AttackStats& a) {
  return {{"samples", a.samples},
          {"all_grad_nonzero", a.all_grad_nonzero},
          {"step_norm", stat_json(a.step_norm)},
          {"shift_norm", stat_json(a.shift_norm)},
          {"alpha", stat_json(a.alpha)},
          {"ascent_fraction", a.ascent_fraction()}};
}

json row_json(const ExperimentRow& row) {
  return {{"name", row.name},
          {"mode", to_string(row.train.mode)},
          {"iterations", row.train.iterations},
          {"final_l1", row.train.curve.empty() ? 0.0 : row.train.curve.back().l1},
          {"final_l2", row.train.curve.empty() ? 0.0 : row.train.curve.back().l2},
          {"attack", attack_json(row.train.attack)},
          {"eval", eval_report_json(row.eval)}};
}

std::string eval_text(const json& r) {
  TextTable t({"metric", "aligned", "perturbed", "gap"});
  const json& a = r.at("aligned");
  const json& p = r.at("perturbed");
  const json& g = r.at("gaps");
  for (const char* key : {"accuracy", "rank1", "rank5"}) {
    t.add_row({key, fixed4(a.at(key)), fixed4(p.at(key)), fixed4(g.at(key))});
  }
  for (std::size_t k = 0; k < a.at("tar").size(); ++k) {
    const json& ta = a.at("tar")[k];
    const json& tp = p.at("tar")[k];
    const bool reliable = ta.at("reliable").get<bool>() && tp.at("reliable").get<bool>();
    t.add_row({"TAR@FAR=" + general(ta.at("far")), fixed4(ta.at("tar")) + (reliable ? "" : "*"),
               fixed4(tp.at("tar")) + (reliable ? "" : "*"), fixed4(g.at("tar")[k])});
  }
  std::ostringstream out;
  const json& s = r.at("perturb");
  out << "perturbation std: rotation " << general(s.at("rotation_std")) << ", translation "
      << general(s.at("translation_std")) << ", scale " << general(s.at("scale_std")) << '\n';
  out << "pairs: " << a.at("genuine_pairs").get<std::size_t>() << " genuine, "
      << a.at("impostor_pairs").get<std::size_t>() << " impostor\n";
  out << t.render();
  if (out.str().find('*') != std::string::npos) out << "* too few impostor pairs to resolve this FAR\n";
  return out.str();
}

std::string attack_text(const json& a) {
  std::ostringstream out;
  out << "attack: " << a.at("samples").get<std::int64_t>() << " samples, "
      << a.at("all_grad_nonzero").get<std::int64_t>() << " with all gradients nonzero, ascent fraction "
      << fixed4(a.at("ascent_fraction")) << '\n';
  TextTable t({"statistic", "count", "mean", "std"});
  for (const char* key : {"step_norm", "shift_norm", "alpha"}) {
    const json& s = a.at(key);
    t.add_row({key, std::to_string(s.at("count").get<std::int64_t>()), general(s.at("mean")), general(s.at("std"))});
  }
  out << t.render();
  return out.str();
}

std::string train_text(const json& r) {
  std::ostringstream out;
  out << "mode: " << r.at("mode").get<std::string>() << ", iterations: " << r.at("iterations").get<std::int64_t>()
      << '\n';
  const json& c = r.at("curve");
  const bool adversarial = r.at("mode").get<std::string>() != "baseline";
  TextTable t(adversarial ? std::vector<std::string>{"epoch", "mean_l1", "mean_l2"}
                          : std::vector<std::string>{"epoch", "mean_l2"});
  const std::size_t n = c.at("epoch").size();
  std::size_t start = 0;
  while (start < n) {
    const int epoch = c.at("epoch")[start];
    double l1 = 0.0, l2 = 0.0;
    std::size_t end = start;
    for (; end < n && c.at("epoch")[end].get<int>() == epoch; ++end) {
      l1 += c.at("l1")[end].get<double>();
      l2 += c.at("l2")[end].get<double>();
    }
    const double count = static_cast<double>(end - start);
    if (adversarial) {
      t.add_row({std::to_string(epoch), general(l1 / count), general(l2 / count)});
    } else {
      t.add_row({std::to_string(epoch), general(l2 / count)});
    }
    start = end;
  }
  out << t.render();
  if (adversarial) out << attack_text(r.at("attack"));
  return out.str();
}

std::string experiments_text(const json& r) {
  TextTable t({"run", "mode", "acc_aligned", "acc_perturbed", "acc_gap", "rank1_aligned", "rank1_perturbed"});
  for (const json& row : r.at("rows")) {
    const json& e = row.at("eval");
    t.add_row({row.at("name"), row.at("mode"), fixed4(e.at("aligned").at("accuracy")),
               fixed4(e.at("perturbed").at("accuracy")), fixed4(e.at("gaps").at("accuracy")),
               fixed4(e.at("aligned").at("rank1")), fixed4(e.at("perturbed").at("rank1"))});
  }
  return t.render();
}

std::string alpha_text(const json& r) {
  TextTable t({"arm", "n_nonzero", "step_norm_mean", "step_norm_std", "acc_aligned", "acc_perturbed"});
  for (const json& row : r.at("arms")) {
    const json& s = row.at("attack").at("step_norm");
    const json& e = row.at("eval");
    t.add_row({row.at("name"), std::to_string(s.at("count").get<std::int64_t>()), general(s.at("mean")),
               general(s.at("std")), fixed4(e.at("aligned").at("accuracy")),
               fixed4(e.at("perturbed").at("accuracy"))});
  }
  return t.render();
}

std::string gradcheck_text(const json& r) {
  TextTable t({"suite", "component", "trials", "passed", "redrawn", "worst_rel_err", "status"});
  for (const json& e : r.at("entries")) {
    t.add_row({e.at("suite"), e.at("component"), std::to_string(e.at("trials").get<int>()),
               std::to_string(e.at("passed").get<int>()), std::to_string(e.at("redrawn").get<int>()),
               general(e.at("worst_rel_error")), e.at("pass").get<bool>() ? "pass" : "FAIL"});
  }
  std::ostringstream out;
  out << t.render();
  out << "overall: " << (r.at("pass").get<bool>() ? "pass" : "FAIL") << " (" << r.at("passed").get<int>() << "/"
      << r.at("trials").get<int>() << " trials within tolerance)\n";
  return out.str();
}

}  // namespace

void TextTable::add_row(std::vector<std::string> row) {
  row.resize(header_.size());
  rows_.push_back(std::move(row));
}

std::string TextTable::render() const {
  std::vector<std::size_t> width(header_.size());
  for (std::size_t c = 0; c < header_.size(); ++c) {
    width[c] = header_[c].size();
    for (const auto& row : rows_) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells, bool header) {
    std::string text;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string pad(width[c] - cells[c].size(), ' ');
      const bool right = !header && c > 0 && numeric_cell(cells[c]);
      if (c > 0) text += "  ";
      text += right ? pad + cells[c] : cells[c] + pad;
    }
    text.erase(text.find_last_not_of(' ') + 1);
    out << text << '\n';
  };
  line(header_, true);
  std::vector<std::string> rule;
  for (std::size_t w : width) rule.emplace_back(w, '-');
  line(rule, true);
  for (const auto& row : rows_) line(row, false);
  return out.str();
}

json eval_report_json(const EvalReport& r) {
  json tar_gap = json::array();
  for (double g : r.tar_gap) tar_gap.push_back(g);
  return {{"kind", "eval"},
          {"perturb",
           {{"rotation_std", r.perturb.rotation_std},
            {"translation_std", r.perturb.translation_std},
            {"scale_std", r.perturb.scale_std}}},
          {"aligned", set_json(r.aligned)},
          {"perturbed", set_json(r.perturbed)},
          {"gaps", {{"accuracy", r.accuracy_gap}, {"rank1", r.rank1_gap}, {"rank5", r.rank5_gap}, {"tar", tar_gap}}}};
}

json train_report_json(const TrainResult& r) {
  json epoch = json::array(), iteration = json::array(), lr = json::array(), l1 = json::array(),
       l2 = json::array();
  for (const auto& p : r.curve) {
    epoch.push_back(p.epoch);
    iteration.push_back(p.iteration);
    lr.push_back(p.lr);
    l1.push_back(p.l1);
    l2.push_back(p.l2);
  }
  return {{"kind", "train"},
          {"mode", to_string(r.mode)},
          {"iterations", r.iterations},
          {"curve", {{"epoch", epoch}, {"iteration", iteration}, {"lr", lr}, {"l1", l1}, {"l2", l2}}},
          {"attack", attack_json(r.attack)}};
}

json experiments_json(const std::vector<ExperimentRow>& rows) {
  json out = {{"kind", "experiments"}, {"rows", json::array()}};
  for (const auto& row : rows) out["rows"].push_back(row_json(row));
  return out;
}

json alpha_study_json(const AlphaStudy& study) {
  return {{"kind", "alpha_study"}, {"arms", json::array({row_json(study.fixed), row_json(study.random)})}};
}

json gradcheck_json(const GradcheckReport& report) {
  json entries = json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"suite", e.suite},
                       {"component", e.component},
                       {"trials", e.trials},
                       {"passed", e.passed},
                       {"redrawn", e.redrawn},
                       {"worst_rel_error", e.worst_rel_error},
                       {"pass", e.pass}});
  }
  return {{"kind", "gradcheck"},
          {"pass", report.pass},
          {"trials", report.trials()},
          {"passed", report.passed()},
          {"entries", entries}};
}

std::string render_text(const json& report) {
  try {
    const std::string kind = report.at("kind");
    if (kind == "eval") return eval_text(report);
    if (kind == "train") return train_text(report);
    if (kind == "experiments") return experiments_text(report);
    if (kind == "alpha_study") return alpha_text(report);
    if (kind == "gradcheck") return gradcheck_text(report);
    throw ContractError("unknown report kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ContractError(std::string("malformed report: ") + e.what());
  }
}

void write_report(const json& report, const std::string& text, const std::string& base) {
  for (const auto& [path, body] : {std::pair{base + ".json", report.dump(2) + "\n"}, std::pair{base + ".txt", text}}) {
    std::ofstream out(path, std::ios::binary);
    out << body;
    if (!out) throw IoError(IoError::Kind::kWriteFailed, path, "cannot write report");
  }
}

json read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Kind::kMissingFile, path, "cannot open report");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(IoError::Kind::kMalformedManifest, path, std::string("report is not valid JSON: ") + e.what());
  }
}

}  // namespace aroface
