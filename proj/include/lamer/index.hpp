#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lamer/corpus.hpp"

namespace lamer {

// Raised on index directory version mismatch or corruption.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Posting {
  std::uint32_t doc_ordinal;
  std::uint32_t term_frequency;  // >= 1
};

// Struct-of-arrays posting list, ascending by doc ordinal. Kept as two
// parallel arrays so the scoring kernels can stream them directly.
struct PostingList {
  std::vector<std::uint32_t> docs;
  std::vector<std::uint32_t> tfs;

  std::size_t size() const { return docs.size(); }
  // tf for one document, 0 when absent (binary search).
  std::uint32_t tf_for(std::uint32_t doc_ordinal) const;
};

struct DocEntry {
  std::string doc_id;
  std::uint32_t length;  // truncated token count
};

class InvertedIndex {
 public:
  // Deterministic for a fixed input order; ordinals are assigned in input
  // order. Lengths and statistics are computed over truncated token
  // sequences, so they match exactly what scoring sees.
  static InvertedIndex build(const std::vector<Document>& docs,
                             std::size_t truncation_cap, bool prepend_title = true);

  std::size_t collection_size() const { return docs_.size(); }
  double avg_doc_length() const { return avg_doc_length_; }
  std::uint64_t total_tokens() const { return total_tokens_; }
  std::size_t term_count() const { return postings_.size(); }
  std::size_t truncation_cap() const { return truncation_cap_; }
  bool title_indexed() const { return title_indexed_; }

  const PostingList* postings(std::string_view term) const;
  std::uint64_t doc_frequency(std::string_view term) const;  // n(t), 0 if absent
  const DocEntry& doc(std::uint32_t ordinal) const { return docs_.at(ordinal); }
  const std::vector<DocEntry>& doc_table() const { return docs_; }

  std::vector<std::string_view> terms_sorted() const;

  // Directory layout: meta.json, docs.jsonl, terms.tsv, postings.bin.
  // Saving the same index twice produces byte-identical files.
  void save(const std::string& dir) const;
  static InvertedIndex load(const std::string& dir);

 private:
  struct TransparentHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::unordered_map<std::string, PostingList, TransparentHash, std::equal_to<>> postings_;
  std::vector<DocEntry> docs_;
  std::uint64_t total_tokens_ = 0;
  double avg_doc_length_ = 0.0;
  std::size_t truncation_cap_ = 0;
  bool title_indexed_ = true;
};

struct IndexStatsReport {
  std::uint64_t disk_bytes = 0;  // 0 when no directory given
  std::size_t term_count = 0;
  std::size_t collection_size = 0;
  double avg_doc_length = 0.0;
  std::uint64_t total_tokens = 0;
  std::uint64_t total_postings = 0;
};

// Size and count report; pass the on-disk directory to include disk_bytes.
IndexStatsReport index_stats(const InvertedIndex& idx, const std::string& dir = "");

}  // namespace lamer
