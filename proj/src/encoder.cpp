#include "spanev/encoder.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "spanev/rng.hpp"

namespace spanev {

Mat& ParamStore::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::logic_error("unknown parameter tensor '" + name + "'");
  return it->second;
}

const Mat& ParamStore::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::logic_error("unknown parameter tensor '" + name + "'");
  return it->second;
}

void ParamStore::add(const std::string& name, int rows, int cols, double range, uint64_t seed) {
  Rng rng(derive_seed(seed, "init." + name));
  Mat m(rows, cols);
  for (double& v : m.a) v = rng.uniform(-range, range);
  tensors[name] = std::move(m);
}

ParamNodes register_params(ad::Tape& tape, const ParamStore& store) {
  ParamNodes nodes;
  for (const auto& [name, tensor] : store.tensors) nodes[name] = tape.leaf(tensor);
  return nodes;
}

namespace {
const char* kGates[4] = {"i", "f", "o", "g"};
}

void add_encoder_params(ParamStore& store, const EncoderConfig& config, uint64_t seed) {
  double range = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  for (int layer = 0; layer < config.layers; ++layer) {
    int in_dim = layer == 0 ? config.input_dim : 2 * config.hidden;
    for (const char* dir : {"f", "b"}) {
      std::string prefix = "enc.l" + std::to_string(layer) + "." + dir + ".";
      for (const char* gate : kGates) {
        store.add(prefix + "W" + gate, config.hidden, in_dim, range, seed);
        store.add(prefix + "U" + gate, config.hidden, config.hidden, range, seed);
        store.add(prefix + "b" + gate, 1, config.hidden, range, seed);
      }
    }
  }
}

EncoderParams EncoderParams::init(int input_dim, int hidden, int layers, uint64_t seed) {
  EncoderParams p;
  p.config = {input_dim, hidden, layers};
  add_encoder_params(p.store, p.config, seed);
  return p;
}

namespace {

// One direction of one layer; returns the per-token hidden rows.
std::vector<ad::Tape::NodeId> run_direction(ad::Tape& tape, const ParamNodes& params,
                                            const std::string& prefix, int hidden,
                                            ad::Tape::NodeId input, int n, bool reverse) {
  auto P = [&](const std::string& s) { return params.at(prefix + s); };
  ad::Tape::NodeId h = tape.leaf(Mat(1, hidden));
  ad::Tape::NodeId c = tape.leaf(Mat(1, hidden));
  std::vector<ad::Tape::NodeId> out(n);
  for (int step = 0; step < n; ++step) {
    int t = reverse ? n - 1 - step : step;
    ad::Tape::NodeId x = tape.row(input, t);
    ad::Tape::NodeId gi = tape.sigmoid(
        tape.add3(tape.matmul_nt(x, P("Wi")), tape.matmul_nt(h, P("Ui")), P("bi")));
    ad::Tape::NodeId gf = tape.sigmoid(
        tape.add3(tape.matmul_nt(x, P("Wf")), tape.matmul_nt(h, P("Uf")), P("bf")));
    ad::Tape::NodeId go = tape.sigmoid(
        tape.add3(tape.matmul_nt(x, P("Wo")), tape.matmul_nt(h, P("Uo")), P("bo")));
    ad::Tape::NodeId gg = tape.tanh(
        tape.add3(tape.matmul_nt(x, P("Wg")), tape.matmul_nt(h, P("Ug")), P("bg")));
    c = tape.add(tape.hadamard(gf, c), tape.hadamard(gi, gg));
    h = tape.hadamard(go, tape.tanh(c));
    out[t] = h;
  }
  return out;
}

}  // namespace

ad::Tape::NodeId encode_on_tape(ad::Tape& tape, const ParamNodes& params,
                                const EncoderConfig& config, ad::Tape::NodeId embeddings) {
  ad::Tape::NodeId input = embeddings;
  int n = tape.val(embeddings).rows;
  for (int layer = 0; layer < config.layers; ++layer) {
    std::string base = "enc.l" + std::to_string(layer) + ".";
    std::vector<ad::Tape::NodeId> fwd =
        run_direction(tape, params, base + "f.", config.hidden, input, n, /*reverse=*/false);
    std::vector<ad::Tape::NodeId> bwd =
        run_direction(tape, params, base + "b.", config.hidden, input, n, /*reverse=*/true);
    std::vector<ad::Tape::NodeId> rows(n);
    for (int t = 0; t < n; ++t) rows[t] = tape.concat_cols(fwd[t], bwd[t]);
    input = tape.stack_rows(rows);
  }
  return input;
}

Mat encode(const Mat& embeddings, const EncoderParams& params) {
  if (!embeddings.all_finite())
    throw InputError("encoder input contains non-finite values");
  if (embeddings.cols != params.config.input_dim)
    throw InputError("embedding dimension " + std::to_string(embeddings.cols) +
                     " does not match encoder input dimension " +
                     std::to_string(params.config.input_dim));
  if (embeddings.rows == 0) return Mat(0, 2 * params.config.hidden);
  ad::Tape tape;
  ParamNodes nodes = register_params(tape, params.store);
  ad::Tape::NodeId emb = tape.leaf(embeddings);
  ad::Tape::NodeId h = encode_on_tape(tape, nodes, params.config, emb);
  return tape.val(h);
}

EmbeddingMap parse_embedding_text(const std::string& text) {
  EmbeddingMap out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  int dim = -1;
  auto fail = [&](const std::string& msg) {
    throw InputError("embedding file line " + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    std::istringstream header(line);
    std::string doc_id;
    int sentence_index, n, d;
    if (!(header >> doc_id >> sentence_index >> n >> d) || sentence_index < 0 || n < 0 || d <= 0)
      fail("expected '<doc_id> <sentence_index> <n> <d>'");
    std::string extra;
    if (header >> extra) fail("trailing fields after the header");
    if (dim == -1) dim = d;
    if (d != dim) fail("dimension mismatch: file started with d=" + std::to_string(dim));

    Mat m(n, d);
    for (int r = 0; r < n; ++r) {
      if (!std::getline(in, line)) fail("unexpected end of file inside a sentence block");
      ++line_no;
      std::istringstream row(line);
      for (int c = 0; c < d; ++c)
        if (!(row >> m(r, c))) fail("expected " + std::to_string(d) + " floats");
      std::string junk;
      if (row >> junk) fail("too many values on the row");
    }

    EmbeddingTable& table = out[doc_id];
    table.dim = d;
    if (static_cast<int>(table.sentences.size()) <= sentence_index)
      table.sentences.resize(sentence_index + 1);
    if (table.sentences[sentence_index].rows != 0 || table.sentences[sentence_index].cols != 0)
      fail("sentence " + std::to_string(sentence_index) + " of " + doc_id + " appears twice");
    table.sentences[sentence_index] = std::move(m);
  }

  for (auto& [doc_id, table] : out)
    for (size_t s = 0; s < table.sentences.size(); ++s)
      if (table.sentences[s].cols == 0 && table.sentences[s].rows == 0)
        throw InputError("embedding file: document " + doc_id + " is missing sentence " +
                         std::to_string(s));
  return out;
}

EmbeddingMap load_embedding_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read embedding file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_embedding_text(ss.str());
}

std::string embedding_text(const EmbeddingMap& embeddings) {
  std::ostringstream ss;
  char buf[64];
  for (const auto& [doc_id, table] : embeddings) {
    for (size_t s = 0; s < table.sentences.size(); ++s) {
      const Mat& m = table.sentences[s];
      ss << doc_id << ' ' << s << ' ' << m.rows << ' ' << table.dim << '\n';
      for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
          std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
          ss << (c ? " " : "") << buf;
        }
        ss << '\n';
      }
    }
  }
  return ss.str();
}

void save_embedding_file(const EmbeddingMap& embeddings, const std::string& path) {
  for (const auto& [doc_id, table] : embeddings)
    if (doc_id.find_first_of(" \t\n") != std::string::npos)
      throw InputError("doc_id '" + doc_id + "' contains whitespace; not representable");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write embedding file " + path);
  out << embedding_text(embeddings);
}

void check_embeddings(const EmbeddingMap& embeddings, const Corpus& corpus) {
  for (const auto& doc : corpus) {
    auto it = embeddings.find(doc.document.doc_id);
    if (it == embeddings.end())
      throw InputError("no embeddings for document " + doc.document.doc_id);
    const EmbeddingTable& table = it->second;
    if (table.sentences.size() != doc.document.sentences.size())
      throw InputError("document " + doc.document.doc_id + ": embedding file has " +
                       std::to_string(table.sentences.size()) + " sentences, corpus has " +
                       std::to_string(doc.document.sentences.size()));
    for (size_t s = 0; s < table.sentences.size(); ++s) {
      int expect = static_cast<int>(doc.document.sentences[s].size());
      if (table.sentences[s].rows != expect)
        throw InputError("document " + doc.document.doc_id + " sentence " + std::to_string(s) +
                         ": embedding rows " + std::to_string(table.sentences[s].rows) +
                         " != token count " + std::to_string(expect));
    }
  }
}

Mat hashed_embeddings(const std::vector<Token>& sentence, int dim, uint64_t seed) {
  Mat m(static_cast<int>(sentence.size()), dim);
  for (size_t t = 0; t < sentence.size(); ++t) {
    uint64_t s = fnv1a(to_lower(sentence[t].text));
    s ^= 0x9e3779b97f4a7c15ULL * (seed + 1);
    s += 0x100000001b3ULL * static_cast<uint64_t>(dim);
    Rng rng(s);
    for (int c = 0; c < dim; ++c) m(static_cast<int>(t), c) = rng.uniform(-1.0, 1.0);
  }
  return m;
}

EmbeddingMap hashed_embeddings_for(const Corpus& corpus, int dim, uint64_t seed) {
  EmbeddingMap out;
  for (const auto& doc : corpus) {
    EmbeddingTable table;
    table.dim = dim;
    for (const auto& sentence : doc.document.sentences)
      table.sentences.push_back(hashed_embeddings(sentence, dim, seed));
    out[doc.document.doc_id] = std::move(table);
  }
  return out;
}

}  // namespace spanev
