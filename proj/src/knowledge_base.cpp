// SPDX-License-Identifier: Apache-2.0
#include "acrag/knowledge_base.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "acrag/core_model.hpp"
#include "acrag/errors.hpp"

namespace acrag {

using nlohmann::json;

std::vector<SourceDocument> load_corpus_jsonl(std::istream& in) {
  std::vector<SourceDocument> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    SourceDocument doc;
    try {
      const auto j = json::parse(line);
      doc.doc_id = j.at("doc_id").get<std::string>();
      if (auto it = j.find("title"); it != j.end() && !it->is_null()) doc.title = it->get<std::string>();
      doc.body = j.at("body").get<std::string>();
      doc.source_tag = j.value("source_tag", "");
    } catch (const json::exception& e) {
      throw LoadError("corpus line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (doc.doc_id.empty()) throw LoadError("corpus line " + std::to_string(line_no) + ": empty doc_id", line_no);
    if (!seen.insert(doc.doc_id).second)
      throw LoadError("corpus line " + std::to_string(line_no) + ": duplicate doc_id " + doc.doc_id, line_no);
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<SourceDocument> load_corpus_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open corpus " + path, 0);
  return load_corpus_jsonl(in);
}

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_word(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; }

}  // namespace

std::vector<std::string> WhitespacePunctTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const std::size_t start = i;
    while (i < n && is_space(static_cast<unsigned char>(text[i]))) ++i;
    if (i == n) {
      tokens.emplace_back(text.substr(start));
      break;
    }
    if (is_word(static_cast<unsigned char>(text[i]))) {
      while (i < n && is_word(static_cast<unsigned char>(text[i]))) ++i;
    } else {
      ++i;
    }
    tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

std::vector<Chunk> chunk_document(const SourceDocument& doc, const Tokenizer& tokenizer, int size) {
  if (size < 1) throw InvalidArgument("chunk size must be >= 1");
  const auto tokens = tokenizer.tokenize(doc.body);
  const std::size_t per_chunk = static_cast<std::size_t>(size);

  std::vector<Chunk> chunks;
  std::string rebuilt;
  for (std::size_t start = 0; start < tokens.size(); start += per_chunk) {
    const std::size_t end = std::min(tokens.size(), start + per_chunk);
    Chunk chunk;
    chunk.doc_id = doc.doc_id;
    chunk.ordinal = static_cast<int>(chunks.size());
    chunk.chunk_id = doc.doc_id + "#" + std::to_string(chunk.ordinal);
    chunk.token_count = static_cast<int>(end - start);
    for (std::size_t t = start; t < end; ++t) chunk.text += tokens[t];
    rebuilt += chunk.text;
    chunks.push_back(std::move(chunk));
  }
  if (rebuilt != doc.body)
    throw IngestionError("tokenizer " + tokenizer.id() + " does not round-trip document " + doc.doc_id);
  return chunks;
}

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw InvalidArgument("embedding dimension must be positive");
}

std::string HashingEmbedder::id() const { return "hashing-tf-" + std::to_string(dimension_); }

std::vector<float> HashingEmbedder::embed_one(std::string_view text) const {
  std::vector<float> v(dimension_, 0.0f);
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    v[fnv1a64(word) % dimension_] += 1.0f;
    word.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) != 0 || c >= 0x80) {
      word += static_cast<char>(std::tolower(c));
    } else {
      flush();
    }
  }
  flush();
  return v;
}

std::unique_ptr<Embedder> make_embedder(std::string_view id) {
  constexpr std::string_view prefix = "hashing-tf-";
  if (id.starts_with(prefix)) {
    const std::string digits(id.substr(prefix.size()));
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }))
      return std::make_unique<HashingEmbedder>(std::stoul(digits));
  }
  throw ConfigurationError("unknown embedder id: " + std::string(id));
}

std::vector<float> normalize(std::span<const float> vector) {
  double sq = 0.0;
  for (float x : vector) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw EmbedderError("cannot normalize a zero or non-finite vector");
  std::vector<float> out(vector.size());
  for (std::size_t i = 0; i < vector.size(); ++i) out[i] = static_cast<float>(vector[i] / norm);
  return out;
}

std::vector<std::vector<float>> embed(const std::vector<std::string>& texts, const Embedder& embedder) {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  std::size_t dim = 0;
  for (const auto& text : texts) {
    auto raw = embedder.embed_one(text);
    if (out.empty()) dim = raw.size();
    if (raw.size() != dim || raw.size() != embedder.dimension())
      throw EmbedderError("embedder " + embedder.id() + " returned inconsistent dimensions");
    out.push_back(normalize(raw));
  }
  return out;
}

// ---------------------------------------------------------------------------
// VectorIndex

VectorIndex VectorIndex::build(std::vector<IndexEntry> entries, IndexMetadata metadata, std::size_t dimension) {
  VectorIndex index;
  index.metadata_ = std::move(metadata);
  index.dimension_ = entries.empty() ? dimension : entries.front().vector.size();
  if (!entries.empty() && index.dimension_ == 0) throw IndexError("index vectors must not be empty");

  std::unordered_set<std::string> seen;
  index.ids_.reserve(entries.size());
  index.texts_.reserve(entries.size());
  index.data_.reserve(entries.size() * index.dimension_);
  for (auto& entry : entries) {
    if (!seen.insert(entry.chunk_id).second) throw IndexError("duplicate chunk_id " + entry.chunk_id);
    if (entry.vector.size() != index.dimension_)
      throw IndexError("chunk " + entry.chunk_id + " has dimension " + std::to_string(entry.vector.size()) +
                       ", expected " + std::to_string(index.dimension_));
    double sq = 0.0;
    for (float x : entry.vector) sq += static_cast<double>(x) * x;
    if (std::abs(std::sqrt(sq) - 1.0) > kUnitNormTolerance)
      throw IndexError("chunk " + entry.chunk_id + " vector is not unit length");
    index.data_.insert(index.data_.end(), entry.vector.begin(), entry.vector.end());
    index.ids_.push_back(std::move(entry.chunk_id));
    index.texts_.push_back(std::move(entry.text));
  }
  return index;
}

std::span<const float> VectorIndex::vector(std::size_t row) const {
  if (row >= size()) throw IndexError("row out of range");
  return {data_.data() + row * dimension_, dimension_};
}

std::vector<RetrievalHit> VectorIndex::search(std::span<const float> query, int k) const {
  if (k < 1) throw InvalidArgument("search: k must be >= 1");
  if (size() == 0) return {};
  if (query.size() != dimension_)
    throw IndexError("query dimension " + std::to_string(query.size()) + " does not match index dimension " +
                     std::to_string(dimension_));

  std::vector<double> scores(size());
  for (std::size_t row = 0; row < size(); ++row) {
    const float* v = data_.data() + row * dimension_;
    double dot = 0.0;
    for (std::size_t d = 0; d < dimension_; ++d) dot += static_cast<double>(v[d]) * query[d];
    scores[row] = dot;
  }

  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto take = std::min(static_cast<std::size_t>(k), size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return ids_[a] < ids_[b];
                    });

  std::vector<RetrievalHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) hits.push_back({ids_[order[i]], scores[order[i]], texts_[order[i]]});
  return hits;
}

namespace {

void write_f32_le(std::ostream& out, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
  out.write(bytes, 4);
}

float read_f32_le(const unsigned char* bytes) {
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
  return std::bit_cast<float>(bits);
}

constexpr const char* kIndexFormat = "acrag-flat-index";

}  // namespace

void VectorIndex::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);

  json manifest;
  manifest["format"] = kIndexFormat;
  manifest["version"] = 1;
  manifest["dimension"] = dimension_;
  manifest["count"] = size();
  manifest["tokenizer_id"] = metadata_.tokenizer_id;
  manifest["embedder_id"] = metadata_.embedder_id;
  manifest["chunk_size"] = metadata_.chunk_size;
  manifest["vectors"] = "vectors.f32";
  manifest["chunks"] = "chunks.jsonl";
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';

  std::ofstream vectors(dir / "vectors.f32", std::ios::binary);
  for (float x : data_) write_f32_le(vectors, x);

  std::ofstream chunks(dir / "chunks.jsonl");
  for (std::size_t row = 0; row < size(); ++row) {
    chunks << json{{"chunk_id", ids_[row]}, {"text", texts_[row]}}.dump() << '\n';
  }
  if (!vectors || !chunks) throw IndexError("failed writing index to " + dir.string());
}

VectorIndex VectorIndex::load(const std::filesystem::path& dir) {
  std::ifstream manifest_in(dir / "manifest.json");
  if (!manifest_in) throw IndexError("no index manifest in " + dir.string());
  VectorIndex index;
  std::size_t count = 0;
  std::string vectors_name, chunks_name;
  try {
    const auto manifest = json::parse(manifest_in);
    if (manifest.at("format").get<std::string>() != kIndexFormat)
      throw IndexError("unsupported index format in " + dir.string());
    index.dimension_ = manifest.at("dimension").get<std::size_t>();
    count = manifest.at("count").get<std::size_t>();
    index.metadata_.tokenizer_id = manifest.value("tokenizer_id", "");
    index.metadata_.embedder_id = manifest.value("embedder_id", "");
    index.metadata_.chunk_size = manifest.value("chunk_size", kDefaultChunkSize);
    vectors_name = manifest.value("vectors", "vectors.f32");
    chunks_name = manifest.value("chunks", "chunks.jsonl");
  } catch (const json::exception& e) {
    throw IndexError("malformed index manifest: " + std::string(e.what()));
  }

  std::ifstream vectors_in(dir / vectors_name, std::ios::binary);
  const std::string blob((std::istreambuf_iterator<char>(vectors_in)), std::istreambuf_iterator<char>());
  if (blob.size() != count * index.dimension_ * 4)
    throw IndexError("vector blob size does not match manifest (" + std::to_string(blob.size()) + " bytes)");
  index.data_.resize(count * index.dimension_);
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  for (std::size_t i = 0; i < index.data_.size(); ++i) index.data_[i] = read_f32_le(bytes + 4 * i);

  std::ifstream chunks_in(dir / chunks_name);
  std::string line;
  while (std::getline(chunks_in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      index.ids_.push_back(j.at("chunk_id").get<std::string>());
      index.texts_.push_back(j.at("text").get<std::string>());
    } catch (const json::exception& e) {
      throw IndexError("malformed chunk sidecar: " + std::string(e.what()));
    }
  }
  if (index.ids_.size() != count) throw IndexError("chunk sidecar count does not match manifest");
  return index;
}

VectorIndex build_knowledge_base(const std::vector<SourceDocument>& corpus, const Tokenizer& tokenizer,
                                 const Embedder& embedder, const IngestOptions& options) {
  std::vector<IndexEntry> entries;
  for (const auto& doc : corpus) {
    for (auto& chunk : chunk_document(doc, tokenizer, options.chunk_size)) {
      const auto raw = embedder.embed_one(options.include_title && doc.title ? *doc.title + "\n" + chunk.text
                                                                            : chunk.text);
      if (raw.size() != embedder.dimension()) throw EmbedderError("embedder returned wrong dimension");
      // Chunks with nothing embeddable (e.g. a whitespace-only tail) are not indexed.
      if (std::all_of(raw.begin(), raw.end(), [](float x) { return x == 0.0f; })) continue;
      entries.push_back({std::move(chunk.chunk_id), normalize(raw), std::move(chunk.text)});
    }
  }
  return VectorIndex::build(std::move(entries), {tokenizer.id(), embedder.id(), options.chunk_size},
                            embedder.dimension());
}

std::vector<RetrievalHit> Retriever::retrieve(std::string_view query, int k) const {
  auto raw = embedder_.embed_one(query);
  if (raw.size() != embedder_.dimension()) throw EmbedderError("embedder returned wrong dimension");
  return index_.search(normalize(raw), k);
}

}  // namespace acrag
