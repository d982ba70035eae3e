#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spanev/ad.hpp"
#include "spanev/corpus.hpp"
#include "spanev/mat.hpp"

namespace spanev {

// Named parameter tensors. Initialization is seeded per tensor name, so the
// values do not depend on creation order.
struct ParamStore {
  std::map<std::string, Mat> tensors;

  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) > 0; }
  // Uniform in [-range, range], generator seeded by (seed, name).
  void add(const std::string& name, int rows, int cols, double range, uint64_t seed);
};

// Node ids of leaves registered for one forward pass.
using ParamNodes = std::map<std::string, ad::Tape::NodeId>;
ParamNodes register_params(ad::Tape& tape, const ParamStore& store);

struct EncoderConfig {
  int input_dim = 0;
  int hidden = 64;  // v_h; outputs are 1 x 2*hidden per token
  int layers = 1;

  bool operator==(const EncoderConfig&) const = default;
};

// Bidirectional LSTM parameters, tensors named
// enc.l<layer>.<f|b>.{Wi,Wf,Wo,Wg,Ui,Uf,Uo,Ug,bi,bf,bo,bg}.
struct EncoderParams {
  EncoderConfig config;
  ParamStore store;

  static EncoderParams init(int input_dim, int hidden, int layers, uint64_t seed);
};

void add_encoder_params(ParamStore& store, const EncoderConfig& config, uint64_t seed);

// Runs the stacked bi-LSTM over an (n x input_dim) embedding node and returns
// the (n x 2*hidden) hidden-state node. Differentiable end to end.
ad::Tape::NodeId encode_on_tape(ad::Tape& tape, const ParamNodes& params,
                                const EncoderConfig& config, ad::Tape::NodeId embeddings);

// Inference wrapper; errors on non-finite inputs.
Mat encode(const Mat& embeddings, const EncoderParams& params);

struct EmbeddingTable {
  int dim = 0;
  std::vector<Mat> sentences;  // one (token_count x dim) matrix per sentence
};

using EmbeddingMap = std::map<std::string, EmbeddingTable>;  // doc_id -> table

// File format: repeated blocks of a header line "<doc_id> <sentence_index>
// <n> <d>" followed by n lines of d decimal floats; '#' lines are comments.
EmbeddingMap load_embedding_file(const std::string& path);
EmbeddingMap parse_embedding_text(const std::string& text);
void save_embedding_file(const EmbeddingMap& embeddings, const std::string& path);
std::string embedding_text(const EmbeddingMap& embeddings);

// Errors when a document is missing or a sentence's row count does not match
// the corpus tokenization.
void check_embeddings(const EmbeddingMap& embeddings, const Corpus& corpus);

// Deterministic per-token stand-in for contextual embeddings: each row is a
// pure function of (lowercased token text, dim, seed), values in [-1, 1].
Mat hashed_embeddings(const std::vector<Token>& sentence, int dim, uint64_t seed);
EmbeddingMap hashed_embeddings_for(const Corpus& corpus, int dim, uint64_t seed);

}  // namespace spanev
