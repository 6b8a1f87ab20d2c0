// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

namespace lid {

using ClassId = int;

/// One labelled utterance.
struct Sample {
  std::string text;
  ClassId label = 0;
  std::size_t source_index = 0;  // position in the original file, breaks ties

  friend bool operator==(const Sample&, const Sample&) = default;
};

}  // namespace lid
