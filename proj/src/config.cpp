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

#include "aroface/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "aroface/error.hpp"

namespace aroface {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ContractError("config key '" + key + "': expected a real number, got '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ContractError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ContractError("config key '" + key + "': expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ContractError("config key '" + key + "': expected true/false, got '" + v + "'");
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string stages_text(const std::vector<ConvStage>& stages) {
  std::string out;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    if (k) out += ",";
    out += std::to_string(stages[k].out_channels) + "x" + std::to_string(stages[k].kernel) + "x" +
           std::to_string(stages[k].stride);
  }
  return out;
}

std::vector<ConvStage> parse_stages(const std::string& key, const std::string& v) {
  std::vector<ConvStage> out;
  for (const auto& item : split(v, ',')) {
    const auto parts = split(item, 'x');
    if (parts.size() != 3) throw ContractError("config key '" + key + "': stage '" + item + "' must be CxKxS");
    out.push_back({static_cast<int>(parse_int(key, parts[0])), static_cast<int>(parse_int(key, parts[1])),
                   static_cast<int>(parse_int(key, parts[2]))});
  }
  return out;
}

const char* kComponentNames[4] = {"rotation", "translation_u", "translation_v", "scale"};

std::string components_text(const std::array<bool, 4>& active) {
  std::string out;
  for (int c = 0; c < 4; ++c) {
    if (!active[c]) continue;
    if (!out.empty()) out += ",";
    out += kComponentNames[c];
  }
  return out.empty() ? "none" : out;
}

std::array<bool, 4> parse_components(const std::string& key, const std::string& v) {
  std::array<bool, 4> active{};
  try {
    parse_component_subset(v, active);
  } catch (const ContractError& e) {
    throw ContractError("config key '" + key + "': " + e.what());
  }
  return active;
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define REAL_FIELD(member)                                                                      \
  Field {                                                                                       \
    [](const RunConfig& c) { return fmt(c.member); },                                           \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_double(k, v); } \
  }
#define INT_FIELD(member)                                                                        \
  Field {                                                                                        \
    [](const RunConfig& c) { return std::to_string(c.member); },                                 \
        [](RunConfig& c, const std::string& k, const std::string& v) {                           \
          c.member = static_cast<decltype(c.member)>(parse_int(k, v));                           \
        }                                                                                        \
  }
#define STRING_FIELD(member)                                                                           \
  Field {                                                                                              \
    [](const RunConfig& c) { return c.member; }, [](RunConfig& c, const std::string&, const std::string& v) { \
      c.member = v;                                                                                    \
    }                                                                                                  \
  }

const std::vector<std::pair<std::string, Field>>& field_table() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"data.train_path", STRING_FIELD(train_path)},
      {"data.test_path", STRING_FIELD(test_path)},
      {"template.path", STRING_FIELD(template_path)},
      {"synth.classes", INT_FIELD(synth.num_classes)},
      {"synth.train_per_class", INT_FIELD(synth.per_class)},
      {"synth.test_per_class", INT_FIELD(synth_test_per_class)},
      {"synth.channels", INT_FIELD(synth.channels)},
      {"synth.height", INT_FIELD(synth.shape.height)},
      {"synth.width", INT_FIELD(synth.shape.width)},
      {"synth.noise_std", REAL_FIELD(synth.noise_std)},
      {"synth.blob_amplitude", REAL_FIELD(synth.blob_amplitude)},
      {"synth.blob_sigma", REAL_FIELD(synth.blob_sigma)},
      {"synth.grating_amplitude", REAL_FIELD(synth.grating_amplitude)},
      {"synth.grating_period", REAL_FIELD(synth.grating_period)},
      {"synth.grating_radius", REAL_FIELD(synth.grating_radius)},
      {"model.extractor",
       Field{[](const RunConfig& c) { return std::string(c.model.kind == ExtractorKind::kConv ? "conv" : "mlp"); },
             [](RunConfig& c, const std::string& k, const std::string& v) {
               if (v == "conv") {
                 c.model.kind = ExtractorKind::kConv;
               } else if (v == "mlp") {
                 c.model.kind = ExtractorKind::kMlp;
               } else {
                 throw ContractError("config key '" + k + "': expected conv or mlp, got '" + v + "'");
               }
             }}},
      {"model.stages", Field{[](const RunConfig& c) { return stages_text(c.model.stages); },
                             [](RunConfig& c, const std::string& k, const std::string& v) {
                               c.model.stages = parse_stages(k, v);
                             }}},
      {"model.mlp_hidden", INT_FIELD(model.mlp_hidden)},
      {"model.embedding_dim", INT_FIELD(model.embedding_dim)},
      {"loss.variant", Field{[](const RunConfig& c) { return to_string(c.margin.variant); },
                             [](RunConfig& c, const std::string&, const std::string& v) {
                               c.margin.variant = margin_variant_from_string(v);
                             }}},
      {"loss.scale", REAL_FIELD(margin.logit_scale)},
      {"loss.margin", REAL_FIELD(margin.margin)},
      {"pgd.k", INT_FIELD(pgd.k)},
      {"pgd.alpha_mean", REAL_FIELD(pgd.alpha_mean)},
      {"pgd.alpha_std", REAL_FIELD(pgd.alpha_std)},
      {"pgd.random_alpha",
       Field{[](const RunConfig& c) { return std::string(c.pgd.randomize_alpha ? "true" : "false"); },
             [](RunConfig& c, const std::string& k, const std::string& v) { c.pgd.randomize_alpha = parse_bool(k, v); }}},
      {"pgd.init_scale_mean", REAL_FIELD(pgd.init_scale_mean)},
      {"pgd.init_scale_std", REAL_FIELD(pgd.init_scale_std)},
      {"pgd.init_other_std", REAL_FIELD(pgd.init_other_std)},
      {"pgd.components", Field{[](const RunConfig& c) { return components_text(c.pgd.active); },
                               [](RunConfig& c, const std::string& k, const std::string& v) {
                                 c.pgd.active = parse_components(k, v);
                               }}},
      {"budget.rotation", REAL_FIELD(pgd.budget.max_rotation)},
      {"budget.translation_u", REAL_FIELD(pgd.budget.max_translation_u)},
      {"budget.translation_v", REAL_FIELD(pgd.budget.max_translation_v)},
      {"budget.scale", REAL_FIELD(pgd.budget.max_scale_deviation)},
      {"optim.lr", REAL_FIELD(optim.lr)},
      {"optim.momentum", REAL_FIELD(optim.momentum)},
      {"optim.weight_decay", REAL_FIELD(optim.weight_decay)},
      {"train.epochs", INT_FIELD(epochs)},
      {"train.batch_size", INT_FIELD(batch_size)},
      {"train.mode", Field{[](const RunConfig& c) { return to_string(c.mode); },
                           [](RunConfig& c, const std::string&, const std::string& v) {
                             c.mode = train_mode_from_string(v);
                           }}},
      {"eval.rotation_std", REAL_FIELD(eval_perturb.rotation_std)},
      {"eval.translation_std", REAL_FIELD(eval_perturb.translation_std)},
      {"eval.scale_std", REAL_FIELD(eval_perturb.scale_std)},
      {"eval.far", Field{[](const RunConfig& c) {
                           std::string out;
                           for (std::size_t k = 0; k < c.far_list.size(); ++k) out += (k ? "," : "") + fmt(c.far_list[k]);
                           return out;
                         },
                         [](RunConfig& c, const std::string& k, const std::string& v) {
                           c.far_list.clear();
                           for (const auto& item : split(v, ',')) c.far_list.push_back(parse_double(k, item));
                         }}},
      {"seed", Field{[](const RunConfig& c) { return std::to_string(c.seed); },
                     [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); }}},
      {"threads", INT_FIELD(threads)},
      {"out", STRING_FIELD(out_dir)},
  };
  return table;
}

#undef REAL_FIELD
#undef INT_FIELD
#undef STRING_FIELD

const Field& find_field(const std::string& key) {
  for (const auto& [name, field] : field_table()) {
    if (name == key) return field;
  }
  throw ContractError("unknown config key '" + key + "'");
}

}  // namespace

std::string to_string(TrainMode mode) { return mode == TrainMode::kBaseline ? "baseline" : "arofce"; }

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "baseline") return TrainMode::kBaseline;
  if (s == "arofce" || s == "aroface") return TrainMode::kAroface;
  throw ContractError("unknown training mode '" + s + "' (expected baseline or arofce)");
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, field] : field_table()) out.push_back(name);
    return out;
  }();
  return names;
}

void RunConfig::set(const std::string& key, const std::string& value) { find_field(key).set(*this, key, trim(value)); }

std::string RunConfig::get(const std::string& key) const { return find_field(key).get(*this); }

void RunConfig::validate(bool require_paths) const {
  auto fail = [](const std::string& msg) { throw ContractError("invalid config: " + msg); };
  if (epochs < 1) fail("train.epochs must be >= 1");
  if (batch_size < 1) fail("train.batch_size must be >= 1");
  if (threads < 1) fail("threads must be >= 1");
  if (!(optim.lr >= 0.0) || !(optim.momentum >= 0.0) || !(optim.weight_decay >= 0.0)) {
    fail("optimizer settings must be nonnegative");
  }
  if (!margin.valid()) fail("loss.scale must be > 0 and loss.margin in [0, pi/2) for the angular variant");
  if (pgd.k < 0 || pgd.alpha_std < 0.0 || pgd.init_scale_std < 0.0 || pgd.init_other_std < 0.0) {
    fail("pgd.k and pgd standard deviations must be nonnegative");
  }
  if (!pgd.budget.valid()) fail("budget.* must be nonnegative with budget.scale < 1");
  if (!eval_perturb.valid()) fail("eval.* standard deviations must be nonnegative");
  for (double far : far_list) {
    if (!(far > 0.0 && far < 1.0)) fail("eval.far entries must lie in (0, 1)");
  }
  if (train_path.empty()) {
    if (!synth.valid() || synth_test_per_class < 1) fail("synth.* describes an invalid synthetic benchmark");
  }
  if (require_paths) {
    namespace fs = std::filesystem;
    if (template_path.empty()) fail("template.path is required");
    if (!fs::exists(template_path)) fail("template.path '" + template_path + "' does not exist");
    if (!train_path.empty() && !fs::exists(train_path)) fail("data.train_path '" + train_path + "' does not exist");
    if (!test_path.empty() && !fs::exists(test_path)) fail("data.test_path '" + test_path + "' does not exist");
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const auto& [name, field] : field_table()) out << name << " = " << field.get(*this) << '\n';
  return out.str();
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ContractError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ContractError& e) {
      throw ContractError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

LandmarkTemplate resolve_template(const RunConfig& cfg, GridShape data_shape) {
  require(!cfg.template_path.empty(), "template.path is required");
  const LandmarkTemplate tpl = load_template(cfg.template_path);
  return tpl.shape == data_shape ? tpl : tpl.rescaled(data_shape);
}

bool parse_component_subset(const std::string& text, std::array<bool, 4>& active) {
  active = {false, false, false, false};
  std::string token;
  bool any = false;
  auto flush = [&] {
    const auto first = token.find_first_not_of(" \t");
    const auto last = token.find_last_not_of(" \t");
    const std::string t = first == std::string::npos ? "" : token.substr(first, last - first + 1);
    token.clear();
    if (t.empty()) throw ContractError("empty component in subset '" + text + "'");
    if (t == "none") return;
    any = true;
    if (t == "rotation") {
      active[0] = true;
    } else if (t == "translation") {
      active[1] = active[2] = true;
    } else if (t == "translation_u") {
      active[1] = true;
    } else if (t == "translation_v") {
      active[2] = true;
    } else if (t == "scale") {
      active[3] = true;
    } else if (t == "all") {
      active = {true, true, true, true};
    } else {
      throw ContractError("unknown transform component '" + t + "'");
    }
  };
  for (char ch : text) {
    if (ch == '+' || ch == ',') {
      flush();
    } else {
      token += ch;
    }
  }
  flush();
  if (!any && text.find("none") == std::string::npos) throw ContractError("empty component subset");
  return any;
}

}  // namespace aroface
