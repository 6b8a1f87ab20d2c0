// SPDX-License-Identifier: Apache-2.0
#include "lid/strategy.hpp"

#include <functional>
#include <map>

#include "lid/error.hpp"

namespace lid {

namespace {

Strategy msr() {
  Strategy s;
  s.name = "msr";
  s.use_memory = true;
  s.memory_selection = Selection::Prototype;
  s.head = Head::Cosine;
  s.use_pkd = true;
  s.use_fkd = true;
  s.use_icml = true;
  s.freeze_old_embeddings = true;
  return s;
}

Strategy emr() {
  Strategy s;
  s.name = "emr";
  s.use_memory = true;
  s.memory_selection = Selection::Random;
  return s;
}

const std::map<std::string, std::function<Strategy()>>& registry() {
  static const std::map<std::string, std::function<Strategy()>> table = {
      {"finetune", [] { Strategy s; s.name = "finetune"; return s; }},
      {"lwf", [] { Strategy s; s.name = "lwf"; s.use_pkd = true; return s; }},
      {"emr", emr},
      {"icarl",
       [] {
         Strategy s;
         s.name = "icarl";
         s.use_memory = true;
         s.memory_selection = Selection::Prototype;
         s.use_pkd = true;
         return s;
       }},
      {"msr", msr},
      {"upperbound",
       [] {
         Strategy s;
         s.name = "upperbound";
         s.upper_bound_mode = true;
         return s;
       }},
      {"msr-no-cn", [] { auto s = msr(); s.name = "msr-no-cn"; s.head = Head::Dot; return s; }},
      {"msr-no-fkd", [] { auto s = msr(); s.name = "msr-no-fkd"; s.use_fkd = false; return s; }},
      {"msr-no-pkd", [] { auto s = msr(); s.name = "msr-no-pkd"; s.use_pkd = false; return s; }},
      {"msr-no-hkd",
       [] {
         auto s = msr();
         s.name = "msr-no-hkd";
         s.use_pkd = false;
         s.use_fkd = false;
         return s;
       }},
      {"msr-no-icml", [] { auto s = msr(); s.name = "msr-no-icml"; s.use_icml = false; return s; }},
      {"msr-no-cn-hkd",
       [] {
         auto s = msr();
         s.name = "msr-no-cn-hkd";
         s.head = Head::Dot;
         s.use_pkd = false;
         s.use_fkd = false;
         return s;
       }},
      // Without any rebalancing component the method is plain random replay.
      {"msr-no-msr", [] { auto s = emr(); s.name = "msr-no-msr"; return s; }},
  };
  return table;
}

}  // namespace

Strategy Strategy::preset(const std::string& name) {
  const auto& table = registry();
  auto it = table.find(name);
  if (it == table.end()) {
    std::string valid;
    for (const auto& n : strategy_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown strategy '" + name + "' (valid: " + valid + ")");
  }
  return it->second();
}

std::vector<std::string> Strategy::differing_toggles(const Strategy& o) const {
  std::vector<std::string> out;
  if (use_memory != o.use_memory) out.emplace_back("use_memory");
  if (memory_selection != o.memory_selection) out.emplace_back("memory_selection");
  if (head != o.head) out.emplace_back("head");
  if (use_pkd != o.use_pkd) out.emplace_back("use_pkd");
  if (use_fkd != o.use_fkd) out.emplace_back("use_fkd");
  if (use_icml != o.use_icml) out.emplace_back("use_icml");
  if (freeze_old_embeddings != o.freeze_old_embeddings) out.emplace_back("freeze_old_embeddings");
  if (upper_bound_mode != o.upper_bound_mode) out.emplace_back("upper_bound_mode");
  return out;
}

std::vector<std::string> strategy_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : registry()) names.push_back(k);
  return names;
}

const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> table = {
      {"MSR", "msr", {}},
      {"-CN", "msr-no-cn", {"head"}},
      {"-FKD", "msr-no-fkd", {"use_fkd"}},
      {"-PKD", "msr-no-pkd", {"use_pkd"}},
      {"-HKD", "msr-no-hkd", {"use_pkd", "use_fkd"}},
      {"-ICML", "msr-no-icml", {"use_icml"}},
      {"-CN&HKD", "msr-no-cn-hkd", {"head", "use_pkd", "use_fkd"}},
      {"-MSR", "msr-no-msr",
       {"memory_selection", "head", "use_pkd", "use_fkd", "use_icml", "freeze_old_embeddings"}},
  };
  return table;
}

const AblationVariant& find_ablation_variant(const std::string& name) {
  for (const auto& v : ablation_variants()) {
    if (v.name == name || v.preset == name) return v;
  }
  std::string valid;
  for (const auto& v : ablation_variants()) valid += (valid.empty() ? "" : ", ") + v.name;
  throw ConfigError("unknown ablation variant '" + name + "' (valid: " + valid + ")");
}

}  // namespace lid
