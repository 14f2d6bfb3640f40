#include "lamer/index.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

namespace lamer {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "lamer.index";

void write_varint(std::string& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<char>((v & 0x7F) | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<char>(v));
}

std::uint64_t read_varint(const std::string& buf, std::size_t& pos) {
  std::uint64_t v = 0;
  int shift = 0;
  for (;;) {
    if (pos >= buf.size() || shift > 63)
      throw FormatError("postings.bin: truncated or corrupt varint");
    const auto byte = static_cast<unsigned char>(buf[pos++]);
    v |= static_cast<std::uint64_t>(byte & 0x7F) << shift;
    if (!(byte & 0x80)) return v;
    shift += 7;
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& data) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(tmp.string() + ": cannot open for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw FormatError(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::uint32_t PostingList::tf_for(std::uint32_t doc_ordinal) const {
  auto it = std::lower_bound(docs.begin(), docs.end(), doc_ordinal);
  if (it == docs.end() || *it != doc_ordinal) return 0;
  return tfs[static_cast<std::size_t>(it - docs.begin())];
}

InvertedIndex InvertedIndex::build(const std::vector<Document>& docs,
                                   std::size_t truncation_cap, bool prepend_title) {
  if (docs.size() > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()))
    throw std::invalid_argument("collection too large for 32-bit doc ordinals");
  InvertedIndex idx;
  idx.truncation_cap_ = truncation_cap;
  idx.title_indexed_ = prepend_title;
  idx.docs_.reserve(docs.size());

  std::unordered_map<std::string, std::uint32_t> tf_counts;
  for (std::uint32_t ordinal = 0; ordinal < docs.size(); ++ordinal) {
    const Document& doc = docs[ordinal];
    TokenSequence tokens =
        truncate(tokenize(indexed_text(doc, prepend_title)), truncation_cap);
    idx.docs_.push_back({doc.id, static_cast<std::uint32_t>(tokens.size())});
    idx.total_tokens_ += tokens.size();

    tf_counts.clear();
    for (auto& token : tokens) ++tf_counts[std::move(token)];
    for (const auto& [term, tf] : tf_counts) {
      PostingList& list = idx.postings_[term];
      list.docs.push_back(ordinal);  // ordinals ascend with the outer loop
      list.tfs.push_back(tf);
    }
  }
  idx.avg_doc_length_ =
      idx.docs_.empty() ? 0.0
                        : static_cast<double>(idx.total_tokens_) /
                              static_cast<double>(idx.docs_.size());
  return idx;
}

const PostingList* InvertedIndex::postings(std::string_view term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

std::uint64_t InvertedIndex::doc_frequency(std::string_view term) const {
  const PostingList* list = postings(term);
  return list ? list->size() : 0;
}

std::vector<std::string_view> InvertedIndex::terms_sorted() const {
  std::vector<std::string_view> terms;
  terms.reserve(postings_.size());
  for (const auto& [term, list] : postings_) terms.push_back(term);
  std::sort(terms.begin(), terms.end());
  return terms;
}

void InvertedIndex::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json meta;
  meta["format"] = kFormatName;
  meta["version"] = kFormatVersion;
  meta["collection_size"] = docs_.size();
  meta["total_tokens"] = total_tokens_;
  meta["avg_doc_length"] = avg_doc_length_;
  meta["truncation_cap"] = truncation_cap_;
  meta["title_indexed"] = title_indexed_;
  meta["term_count"] = postings_.size();
  write_file_atomic(fs::path(dir) / "meta.json", meta.dump(2) + "\n");

  std::string docs_out;
  for (const auto& entry : docs_) {
    nlohmann::json row;
    row["id"] = entry.doc_id;
    row["len"] = entry.length;
    docs_out += row.dump();
    docs_out += "\n";
  }
  write_file_atomic(fs::path(dir) / "docs.jsonl", docs_out);

  // Sorted term order keeps repeated saves byte-identical.
  std::string terms_out;
  std::string postings_out;
  for (std::string_view term : terms_sorted()) {
    const PostingList& list = postings_.find(term)->second;
    const std::size_t offset = postings_out.size();
    std::uint32_t prev = 0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::uint32_t gap = i == 0 ? list.docs[0] : list.docs[i] - prev;
      prev = list.docs[i];
      write_varint(postings_out, gap);
      write_varint(postings_out, list.tfs[i]);
    }
    terms_out += term;
    terms_out += "\t";
    terms_out += std::to_string(list.size());
    terms_out += "\t";
    terms_out += std::to_string(offset);
    terms_out += "\t";
    terms_out += std::to_string(postings_out.size() - offset);
    terms_out += "\n";
  }
  write_file_atomic(fs::path(dir) / "terms.tsv", terms_out);
  write_file_atomic(fs::path(dir) / "postings.bin", postings_out);
}

InvertedIndex InvertedIndex::load(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  if (!fs::exists(base / "meta.json"))
    throw FormatError(dir + ": not an index directory (meta.json missing)");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(base / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir + "/meta.json: " + e.what());
  }
  if (meta.value("format", "") != kFormatName)
    throw FormatError(dir + ": unrecognized index format");
  if (meta.value("version", -1) != kFormatVersion)
    throw FormatError(dir + ": unsupported index version " +
                      meta.value("version", nlohmann::json()).dump());

  InvertedIndex idx;
  idx.truncation_cap_ = meta.at("truncation_cap").get<std::size_t>();
  idx.title_indexed_ = meta.at("title_indexed").get<bool>();
  idx.total_tokens_ = meta.at("total_tokens").get<std::uint64_t>();
  idx.avg_doc_length_ = meta.at("avg_doc_length").get<double>();

  {
    std::ifstream in(base / "docs.jsonl", std::ios::binary);
    if (!in) throw FormatError(dir + "/docs.jsonl: cannot open");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        nlohmann::json row = nlohmann::json::parse(line);
        idx.docs_.push_back({row.at("id").get<std::string>(),
                             row.at("len").get<std::uint32_t>()});
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(dir + "/docs.jsonl line " + std::to_string(line_no) +
                          ": " + e.what());
      }
    }
  }
  if (idx.docs_.size() != meta.at("collection_size").get<std::size_t>())
    throw FormatError(dir + ": doc table size does not match meta.json");
  std::uint64_t length_sum = 0;
  for (const DocEntry& entry : idx.docs_) length_sum += entry.length;
  if (length_sum != idx.total_tokens_)
    throw FormatError(dir + ": doc lengths do not sum to total_tokens");

  const std::string postings_buf = read_file(base / "postings.bin");
  std::ifstream terms_in(base / "terms.tsv", std::ios::binary);
  if (!terms_in) throw FormatError(dir + "/terms.tsv: cannot open");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(terms_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    const auto t3 = line.find('\t', t2 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos || t3 == std::string::npos)
      throw FormatError(dir + "/terms.tsv line " + std::to_string(line_no) +
                        ": expected 4 columns");
    const std::string term = line.substr(0, t1);
    std::size_t df = 0, offset = 0, nbytes = 0;
    try {
      df = std::stoull(line.substr(t1 + 1, t2 - t1 - 1));
      offset = std::stoull(line.substr(t2 + 1, t3 - t2 - 1));
      nbytes = std::stoull(line.substr(t3 + 1));
    } catch (const std::exception&) {
      throw FormatError(dir + "/terms.tsv line " + std::to_string(line_no) +
                        ": bad number");
    }
    if (offset + nbytes > postings_buf.size())
      throw FormatError(dir + "/terms.tsv line " + std::to_string(line_no) +
                        ": postings range out of bounds");
    PostingList list;
    list.docs.reserve(df);
    list.tfs.reserve(df);
    std::size_t pos = offset;
    std::uint32_t doc = 0;
    for (std::size_t i = 0; i < df; ++i) {
      const std::uint64_t gap = read_varint(postings_buf, pos);
      const std::uint64_t tf = read_varint(postings_buf, pos);
      doc = i == 0 ? static_cast<std::uint32_t>(gap)
                   : doc + static_cast<std::uint32_t>(gap);
      if (tf == 0 || doc >= idx.docs_.size())
        throw FormatError(dir + ": corrupt posting for term \"" + term + "\"");
      list.docs.push_back(doc);
      list.tfs.push_back(static_cast<std::uint32_t>(tf));
    }
    if (pos != offset + nbytes)
      throw FormatError(dir + ": posting bytes for term \"" + term +
                        "\" do not match declared length");
    idx.postings_.emplace(term, std::move(list));
  }
  if (idx.postings_.size() != meta.at("term_count").get<std::size_t>())
    throw FormatError(dir + ": term count does not match meta.json");
  return idx;
}

IndexStatsReport index_stats(const InvertedIndex& idx, const std::string& dir) {
  IndexStatsReport report;
  report.term_count = idx.term_count();
  report.collection_size = idx.collection_size();
  report.avg_doc_length = idx.avg_doc_length();
  report.total_tokens = idx.total_tokens();
  for (std::string_view term : idx.terms_sorted())
    report.total_postings += idx.doc_frequency(term);
  if (!dir.empty()) {
    namespace fs = std::filesystem;
    for (const char* name : {"meta.json", "docs.jsonl", "terms.tsv", "postings.bin"}) {
      const fs::path p = fs::path(dir) / name;
      if (fs::exists(p)) report.disk_bytes += fs::file_size(p);
    }
  }
  return report;
}

}  // namespace lamer
