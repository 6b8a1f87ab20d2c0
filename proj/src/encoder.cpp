// SPDX-License-Identifier: Apache-2.0
#include "lid/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#include "lid/error.hpp"
#include "lid/rng.hpp"

namespace lid {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    // Bytes >= 0x80 belong to multi-byte UTF-8 sequences and stay inside words.
    if (std::isspace(c) || (c < 0x80 && std::ispunct(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocab::Vocab() {
  tokens_.emplace_back(kUnknownToken);
  ids_.emplace(kUnknownToken, kUnknown);
}

std::size_t Vocab::extend(const std::vector<Sample>& train_samples, int min_freq) {
  std::map<std::string, int> freq;
  for (const Sample& s : train_samples) {
    for (auto& w : split_words(s.text)) ++freq[w];
  }
  std::vector<std::pair<std::string, int>> fresh;
  for (auto& [w, n] : freq) {
    if (n >= min_freq && !ids_.contains(w)) fresh.emplace_back(w, n);
  }
  std::stable_sort(fresh.begin(), fresh.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (auto& [w, n] : fresh) {
    ids_.emplace(w, static_cast<int>(tokens_.size()));
    tokens_.push_back(w);
  }
  return fresh.size();
}

std::vector<int> Vocab::tokenize(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) ids.push_back(id_of(w));
  return ids;
}

int Vocab::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnknown : it->second;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write vocab file " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read vocab file " + path.string());
  Vocab v;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      if (line != kUnknownToken) throw ConfigError("vocab file must start with " + std::string(kUnknownToken));
      first = false;
      continue;
    }
    if (v.ids_.contains(line)) throw ConfigError("duplicate token in vocab file: " + line);
    v.ids_.emplace(line, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(line);
  }
  return v;
}

Vocab build_vocab(const std::vector<Sample>& train_samples, int min_freq) {
  if (train_samples.empty()) throw DomainError("build_vocab: empty corpus");
  Vocab v;
  v.extend(train_samples, min_freq);
  return v;
}

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.values()) v = uniform(rng, -a, a);
  return t;
}

constexpr double kEmbeddingScale = 0.5;
constexpr double kBiasScale = 0.1;

void fill_embedding_row(std::span<double> row, std::uint64_t seed, std::size_t index) {
  Rng rng = make_rng(seed, 0x1000000ull + index);
  for (double& v : row) v = uniform(rng, -kEmbeddingScale, kEmbeddingScale);
}

}  // namespace

EncoderParams EncoderParams::init(std::size_t vocab_size, std::size_t d_emb, std::size_t d,
                                  std::uint64_t seed) {
  if (vocab_size == 0 || d_emb == 0 || d == 0) throw DomainError("encoder dimensions must be positive");
  EncoderParams p;
  p.embedding = Tensor::matrix(vocab_size, d_emb);
  for (std::size_t r = 0; r < vocab_size; ++r) fill_embedding_row(p.embedding.row_span(r), seed, r);
  Rng rng = make_rng(seed, 1);
  p.w1 = glorot(d_emb, d, rng);
  p.w2 = glorot(d, d, rng);
  p.b1 = Tensor::matrix(1, d);
  p.b2 = Tensor::matrix(1, d);
  for (double& v : p.b1.values()) v = uniform(rng, -kBiasScale, kBiasScale);
  for (double& v : p.b2.values()) v = uniform(rng, -kBiasScale, kBiasScale);
  return p;
}

void EncoderParams::grow_vocab(std::size_t vocab_size, std::uint64_t seed) {
  const std::size_t old_rows = embedding.rows();
  if (vocab_size <= old_rows) return;
  const std::size_t cols = embedding.cols();
  std::vector<double> values = std::move(embedding.values());
  values.resize(vocab_size * cols, 0.0);
  embedding = Tensor::matrix(vocab_size, cols, std::move(values));
  for (std::size_t r = old_rows; r < vocab_size; ++r) fill_embedding_row(embedding.row_span(r), seed, r);
}

EncoderNodes build_encoder(Graph& graph, const EncoderParams& params,
                           std::vector<std::vector<int>> batch, bool trainable) {
  auto leaf = [&](const Tensor& t, const char* name) {
    return trainable ? graph.parameter(t, name) : graph.constant(t, name);
  };
  EncoderNodes n{};
  n.embedding = leaf(params.embedding, "embedding");
  n.w1 = leaf(params.w1, "w1");
  n.b1 = leaf(params.b1, "b1");
  n.w2 = leaf(params.w2, "w2");
  n.b2 = leaf(params.b2, "b2");
  const NodeId pooled = graph.embedding_bag(n.embedding, std::move(batch));
  const NodeId hidden = graph.tanh(graph.add_row(graph.matmul(pooled, n.w1), n.b1));
  n.features = graph.add_row(graph.matmul(hidden, n.w2), n.b2);
  return n;
}

Tensor encode_batch(const std::vector<std::vector<int>>& batch, const EncoderParams& params) {
  if (batch.empty()) return Tensor::matrix(0, params.feature_dim());
  Graph g;
  const auto nodes = build_encoder(g, params, batch, false);
  g.forward(g.sum(nodes.features));
  return g.value(nodes.features);
}

std::vector<double> encode(const std::vector<int>& token_ids, const EncoderParams& params) {
  return encode_batch({token_ids}, params).row_vector(0);
}

}  // namespace lid
