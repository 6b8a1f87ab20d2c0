// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lid/sample.hpp"
#include "lid/tensor.hpp"

namespace lid {

enum class Selection { Prototype, Random };
enum class Distance { Euclidean, Cosine };

const char* selection_name(Selection s);
Selection parse_selection(const std::string& name);
const char* distance_name(Distance d);
Distance parse_distance(const std::string& name);

/// Componentwise mean of the rows of `features`.
std::vector<double> class_prototype(const Tensor& features);

/// Samples ordered by distance of their feature row to the class prototype
/// (ascending, ties by source_index), cut to the first min(quota, n).
std::vector<Sample> select_exemplars(const std::vector<Sample>& samples, const Tensor& features,
                                     std::size_t quota, Distance distance = Distance::Euclidean);

/// Uniform sample without replacement, in draw order.
std::vector<Sample> random_select(const std::vector<Sample>& samples, std::size_t quota,
                                  std::uint64_t seed);

/// Slots for the class at position `rank` (0-based, class-id order) when the
/// budget is split over `class_total` classes: floor(B/t), plus one for the
/// first B mod t classes.
std::size_t memory_quota(std::size_t budget, std::size_t class_total, std::size_t rank);

/// Bounded per-class exemplar store. Each class list keeps the order produced
/// by its selection, so truncation always drops the least representative
/// samples first.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t budget = 0) : budget_(budget) {}

  std::size_t budget() const { return budget_; }
  std::size_t class_total() const { return class_total_; }
  std::size_t total_size() const;
  bool empty() const { return total_size() == 0; }

  const std::map<ClassId, std::vector<Sample>>& classes() const { return classes_; }
  std::vector<Sample> contents() const;

  /// Re-splits the budget over `class_total` classes and truncates the stored
  /// classes (ranked by class id) to their new quotas.
  void shrink(std::size_t class_total);

  /// Stores the ordered candidates of a new class, cut to its quota. The class
  /// takes the next rank after the classes already stored.
  void insert(ClassId id, std::vector<Sample> ordered);

  void save(const std::filesystem::path& path) const;
  static ReplayMemory load(const std::filesystem::path& path);
  std::string to_json_string() const;
  static ReplayMemory from_json_string(const std::string& text);

  friend bool operator==(const ReplayMemory&, const ReplayMemory&) = default;

 private:
  std::size_t budget_ = 0;
  std::size_t class_total_ = 0;
  std::map<ClassId, std::vector<Sample>> classes_;
};

/// Functional form of ReplayMemory::shrink.
ReplayMemory shrink_memory(ReplayMemory memory, std::size_t class_total);

}  // namespace lid
