// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "lid/losses.hpp"
#include "lid/memory.hpp"

namespace lid {

/// Component toggles of a lifelong learning method.
struct Strategy {
  std::string name = "custom";
  bool use_memory = false;
  Selection memory_selection = Selection::Prototype;
  Head head = Head::Dot;
  bool use_pkd = false;
  bool use_fkd = false;
  bool use_icml = false;
  bool freeze_old_embeddings = false;
  bool upper_bound_mode = false;

  bool uses_snapshot() const { return use_pkd || use_fkd; }

  /// Named preset: finetune, lwf, emr, icarl, msr, upperbound, or one of the
  /// ablation variants (msr-no-cn, msr-no-fkd, ...). Throws ConfigError
  /// listing valid names.
  static Strategy preset(const std::string& name);

  /// Toggles that differ from `other` (name excluded), by field name.
  std::vector<std::string> differing_toggles(const Strategy& other) const;

  friend bool operator==(const Strategy&, const Strategy&) = default;
};

std::vector<std::string> strategy_names();

/// One row of the ablation grid: the full method and the variants with
/// components removed. `removed` lists the toggles that differ from the full
/// method.
struct AblationVariant {
  std::string name;   // row label: MSR, -CN, -FKD, ...
  std::string preset; // Strategy::preset key
  std::vector<std::string> removed;
};

const std::vector<AblationVariant>& ablation_variants();
const AblationVariant& find_ablation_variant(const std::string& name);

}  // namespace lid
