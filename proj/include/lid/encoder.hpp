// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lid/graph.hpp"
#include "lid/sample.hpp"
#include "lid/tensor.hpp"

namespace lid {

/// Lowercases and splits on whitespace and punctuation; punctuation is dropped.
std::vector<std::string> split_words(std::string_view text);

/// Append-only token table. Id 0 is the unknown token.
class Vocab {
 public:
  static constexpr int kUnknown = 0;
  static constexpr const char* kUnknownToken = "<unk>";

  Vocab();

  /// Adds tokens with frequency >= min_freq that are not yet present, ordered by
  /// frequency descending then lexicographically. Existing ids never change.
  /// Returns the number of tokens appended.
  std::size_t extend(const std::vector<Sample>& train_samples, int min_freq);

  std::vector<int> tokenize(std::string_view text) const;
  int id_of(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// One token per line in id order.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

Vocab build_vocab(const std::vector<Sample>& train_samples, int min_freq);

/// Trainable encoder weights: embedding table, then affine -> tanh -> affine.
struct EncoderParams {
  Tensor embedding;  // |V| x d_emb
  Tensor w1;         // d_emb x d
  Tensor b1;         // 1 x d
  Tensor w2;         // d x d
  Tensor b2;         // 1 x d

  std::size_t embedding_dim() const { return embedding.cols(); }
  std::size_t feature_dim() const { return w2.cols(); }

  static EncoderParams init(std::size_t vocab_size, std::size_t d_emb, std::size_t d,
                            std::uint64_t seed);
  /// Appends freshly initialised rows so the table covers `vocab_size` tokens.
  void grow_vocab(std::size_t vocab_size, std::uint64_t seed);

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

/// Graph handles for the encoder leaves of one forward pass.
struct EncoderNodes {
  NodeId embedding, w1, b1, w2, b2;
  NodeId features;  // batch x d
};

/// Adds the encoder to `graph` for a batch of token-id lists. When `trainable`
/// is false the weights enter as constants (frozen snapshot).
EncoderNodes build_encoder(Graph& graph, const EncoderParams& params,
                           std::vector<std::vector<int>> batch, bool trainable);

/// Features for a batch, one row per token list.
Tensor encode_batch(const std::vector<std::vector<int>>& batch, const EncoderParams& params);

/// f(x) for a single utterance.
std::vector<double> encode(const std::vector<int>& token_ids, const EncoderParams& params);

}  // namespace lid
