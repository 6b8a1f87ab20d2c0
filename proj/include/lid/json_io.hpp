// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "lid/sample.hpp"

namespace lid {

using json = nlohmann::ordered_json;

inline void to_json(json& j, const Sample& s) {
  j = json{{"text", s.text}, {"label", s.label}, {"source_index", s.source_index}};
}

inline void from_json(const json& j, Sample& s) {
  j.at("text").get_to(s.text);
  j.at("label").get_to(s.label);
  j.at("source_index").get_to(s.source_index);
}

}  // namespace lid
