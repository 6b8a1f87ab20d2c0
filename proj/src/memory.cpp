// SPDX-License-Identifier: Apache-2.0
#include "lid/memory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lid/error.hpp"
#include "lid/json_io.hpp"
#include "lid/rng.hpp"

namespace lid {

const char* selection_name(Selection s) { return s == Selection::Prototype ? "prototype" : "random"; }

Selection parse_selection(const std::string& name) {
  if (name == "prototype") return Selection::Prototype;
  if (name == "random") return Selection::Random;
  throw ConfigError("unknown memory selection '" + name + "' (expected prototype or random)");
}

const char* distance_name(Distance d) { return d == Distance::Euclidean ? "euclidean" : "cosine"; }

Distance parse_distance(const std::string& name) {
  if (name == "euclidean") return Distance::Euclidean;
  if (name == "cosine") return Distance::Cosine;
  throw ConfigError("unknown memory distance '" + name + "' (expected euclidean or cosine)");
}

std::vector<double> class_prototype(const Tensor& features) {
  if (features.rows() == 0 || features.size() == 0) throw DomainError("class_prototype: no feature vectors");
  std::vector<double> mean(features.cols(), 0.0);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto row = features.row_span(r);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += row[j];
  }
  for (double& v : mean) v /= static_cast<double>(features.rows());
  return mean;
}

namespace {

double distance_to(std::span<const double> x, const std::vector<double>& proto, Distance d) {
  if (d == Distance::Euclidean) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - proto[j]) * (x[j] - proto[j]);
    return std::sqrt(s);
  }
  double xy = 0.0, xx = 0.0, pp = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    xy += x[j] * proto[j];
    xx += x[j] * x[j];
    pp += proto[j] * proto[j];
  }
  if (xx <= 0.0 || pp <= 0.0) return 1.0;
  return 1.0 - xy / std::sqrt(xx * pp);
}

}  // namespace

std::vector<Sample> select_exemplars(const std::vector<Sample>& samples, const Tensor& features,
                                     std::size_t quota, Distance distance) {
  if (samples.size() != features.rows()) {
    throw ShapeError("select_exemplars: " + std::to_string(samples.size()) + " samples but " +
                     std::to_string(features.rows()) + " feature rows");
  }
  if (quota == 0 || samples.empty()) return {};
  const auto proto = class_prototype(features);
  std::vector<double> dist(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) dist[i] = distance_to(features.row_span(i), proto, distance);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return samples[a].source_index < samples[b].source_index;
  });
  order.resize(std::min(quota, order.size()));
  std::vector<Sample> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(samples[i]);
  return out;
}

std::vector<Sample> random_select(const std::vector<Sample>& samples, std::size_t quota,
                                  std::uint64_t seed) {
  std::vector<Sample> pool = samples;
  Rng rng = make_rng(seed, 0x72616e64ull);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(quota, pool.size()));
  return pool;
}

std::size_t memory_quota(std::size_t budget, std::size_t class_total, std::size_t rank) {
  if (class_total == 0) throw DomainError("memory quota over zero classes");
  if (rank >= class_total) throw DomainError("memory quota rank out of range");
  return budget / class_total + (rank < budget % class_total ? 1 : 0);
}

std::size_t ReplayMemory::total_size() const {
  std::size_t n = 0;
  for (const auto& [id, list] : classes_) n += list.size();
  return n;
}

std::vector<Sample> ReplayMemory::contents() const {
  std::vector<Sample> out;
  for (const auto& [id, list] : classes_) out.insert(out.end(), list.begin(), list.end());
  return out;
}

void ReplayMemory::shrink(std::size_t class_total) {
  if (class_total == 0) throw DomainError("shrink_memory: class total must be positive");
  if (class_total < classes_.size()) {
    throw DomainError("shrink_memory: " + std::to_string(classes_.size()) +
                      " classes stored but class total is " + std::to_string(class_total));
  }
  class_total_ = class_total;
  std::size_t rank = 0;
  for (auto& [id, list] : classes_) {
    const std::size_t q = memory_quota(budget_, class_total_, rank++);
    if (list.size() > q) list.resize(q);
  }
}

void ReplayMemory::insert(ClassId id, std::vector<Sample> ordered) {
  if (classes_.contains(id)) throw DomainError("class " + std::to_string(id) + " already in memory");
  if (classes_.size() >= class_total_) {
    throw StateError("memory already holds " + std::to_string(class_total_) +
                     " classes; call shrink before inserting");
  }
  if (!classes_.empty() && id < classes_.rbegin()->first) {
    throw DomainError("memory classes must be inserted in increasing id order");
  }
  const std::size_t q = memory_quota(budget_, class_total_, classes_.size());
  if (ordered.size() > q) ordered.resize(q);
  classes_.emplace(id, std::move(ordered));
}

std::string ReplayMemory::to_json_string() const {
  json j;
  j["budget"] = budget_;
  j["class_total"] = class_total_;
  json cls = json::object();
  for (const auto& [id, list] : classes_) cls[std::to_string(id)] = list;
  j["classes"] = std::move(cls);
  return j.dump(2);
}

ReplayMemory ReplayMemory::from_json_string(const std::string& text) {
  try {
    const json j = json::parse(text);
    ReplayMemory m(j.at("budget").get<std::size_t>());
    m.class_total_ = j.at("class_total").get<std::size_t>();
    for (const auto& [key, list] : j.at("classes").items()) {
      m.classes_.emplace(std::stoi(key), list.get<std::vector<Sample>>());
    }
    if (m.total_size() > m.budget_) throw ConfigError("memory file exceeds its budget");
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed memory file: ") + e.what());
  }
}

void ReplayMemory::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write memory file " + path.string());
  out << to_json_string() << '\n';
}

ReplayMemory ReplayMemory::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read memory file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

ReplayMemory shrink_memory(ReplayMemory memory, std::size_t class_total) {
  memory.shrink(class_total);
  return memory;
}

}  // namespace lid
