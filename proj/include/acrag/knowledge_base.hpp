// SPDX-License-Identifier: Apache-2.0
#pragma once

// Corpus ingestion: disjoint fixed-size token chunks, pluggable tokenizer and
// embedder, and an exact cosine-similarity index with on-disk persistence.
//
// Index directory layout:
//   manifest.json  dimension, count, tokenizer/embedder ids, chunk size
//   vectors.f32    row-major little-endian float32, count * dimension
//   chunks.jsonl   {"chunk_id", "text"} per row, same order as vectors

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace acrag {

struct SourceDocument {
  std::string doc_id;
  std::optional<std::string> title;
  std::string body;
  std::string source_tag;
};

// Throws LoadError naming the line on malformed input or a repeated doc_id.
std::vector<SourceDocument> load_corpus_jsonl(std::istream& in);
std::vector<SourceDocument> load_corpus_jsonl_file(const std::string& path);

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::string id() const = 0;
  // Must be deterministic. Chunking verifies that the pieces concatenate back
  // to the input.
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
};

// Each token is an optional run of leading whitespace followed by either a run
// of word bytes (ASCII alphanumerics and any non-ASCII byte) or one other
// byte. Trailing whitespace forms a final token of its own, so the pieces
// always concatenate back to the input.
class WhitespacePunctTokenizer final : public Tokenizer {
 public:
  std::string id() const override { return "ws-punct-v1"; }
  std::vector<std::string> tokenize(std::string_view text) const override;
};

inline constexpr int kDefaultChunkSize = 512;

struct Chunk {
  std::string chunk_id;  // "<doc_id>#<ordinal>"
  std::string doc_id;
  std::string text;
  int token_count = 0;
  int ordinal = 0;

  bool operator==(const Chunk&) const = default;
};

// Disjoint, covering chunks of `size` tokens; only the last may be shorter.
// An empty body gives no chunks. Throws IngestionError if the tokenizer does
// not round-trip the body, InvalidArgument if size < 1.
std::vector<Chunk> chunk_document(const SourceDocument& doc, const Tokenizer& tokenizer,
                                  int size = kDefaultChunkSize);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dimension() const = 0;
  // Unnormalized vector of length dimension().
  virtual std::vector<float> embed_one(std::string_view text) const = 0;
};

// Term-frequency feature hashing of lower-cased alphanumeric words.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dimension = 64);

  std::string id() const override;
  std::size_t dimension() const override { return dimension_; }
  std::vector<float> embed_one(std::string_view text) const override;

 private:
  std::size_t dimension_;
};

// Recognizes "hashing-tf-<dim>". Throws ConfigurationError otherwise.
std::unique_ptr<Embedder> make_embedder(std::string_view id);

// L2-normalized copy. Throws EmbedderError on a zero or non-finite vector.
std::vector<float> normalize(std::span<const float> vector);

// Embeds and normalizes each text, preserving order. Throws EmbedderError if
// the embedder returns inconsistent dimensions.
std::vector<std::vector<float>> embed(const std::vector<std::string>& texts, const Embedder& embedder);

struct IndexEntry {
  std::string chunk_id;
  std::vector<float> vector;  // unit L2 norm
  std::string text;
};

struct RetrievalHit {
  std::string chunk_id;
  double similarity = 0.0;
  std::string text;

  bool operator==(const RetrievalHit&) const = default;
};

struct IndexMetadata {
  std::string tokenizer_id;
  std::string embedder_id;
  int chunk_size = kDefaultChunkSize;

  bool operator==(const IndexMetadata&) const = default;
};

inline constexpr double kUnitNormTolerance = 1e-6;

// Exact exhaustive search over contiguous float storage. Immutable once
// built; concurrent searches are safe.
class VectorIndex {
 public:
  // Throws IndexError on a duplicate chunk_id, mixed dimensions, or a vector
  // that is not unit length. `dimension` is only consulted when entries is
  // empty.
  static VectorIndex build(std::vector<IndexEntry> entries, IndexMetadata metadata = {},
                           std::size_t dimension = 0);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }
  const IndexMetadata& metadata() const noexcept { return metadata_; }

  // min(k, size()) hits by cosine similarity descending, ties by ascending
  // chunk_id. Throws IndexError on a dimension mismatch, InvalidArgument when
  // k < 1.
  std::vector<RetrievalHit> search(std::span<const float> query, int k = 1) const;

  std::span<const float> vector(std::size_t row) const;
  const std::string& chunk_id(std::size_t row) const { return ids_.at(row); }
  const std::string& text(std::size_t row) const { return texts_.at(row); }

  void save(const std::filesystem::path& dir) const;
  static VectorIndex load(const std::filesystem::path& dir);

 private:
  VectorIndex() = default;

  std::size_t dimension_ = 0;
  IndexMetadata metadata_;
  std::vector<std::string> ids_;
  std::vector<std::string> texts_;
  std::vector<float> data_;
};

struct IngestOptions {
  int chunk_size = kDefaultChunkSize;
  bool include_title = false;  // prepend "<title>\n" to the text that is embedded
};

// chunk_document -> embed -> VectorIndex::build for a whole corpus.
VectorIndex build_knowledge_base(const std::vector<SourceDocument>& corpus, const Tokenizer& tokenizer,
                                 const Embedder& embedder, const IngestOptions& options = {});

// Embeds a query text and searches the index.
class Retriever {
 public:
  Retriever(const Embedder& embedder, const VectorIndex& index) : embedder_(embedder), index_(index) {}

  std::vector<RetrievalHit> retrieve(std::string_view query, int k) const;

  const VectorIndex& index() const noexcept { return index_; }
  const Embedder& embedder() const noexcept { return embedder_; }

 private:
  const Embedder& embedder_;
  const VectorIndex& index_;
};

}  // namespace acrag
