#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace semscale {

enum class DocumentSource
{
  post,
  newsletter_sentence
};

std::string_view to_string(DocumentSource s);
DocumentSource parse_document_source(std::string_view s);

// One author-attributed text unit: a whole post or one newsletter sentence.
struct Document
{
  std::string doc_id;
  std::string author_id;
  std::string text;
  DocumentSource source = DocumentSource::post;
  std::optional<std::string> timestamp;
};

enum class MatchMode
{
  substring,
  word_boundary
};

std::string_view to_string(MatchMode m);
MatchMode parse_match_mode(std::string_view s);

struct KeywordRule
{
  std::string item_id;
  std::vector<std::string> keywords;
  MatchMode match_mode = MatchMode::substring;
};

struct TaggedDocument
{
  Document document;
  std::set<std::string> item_ids;
};

// Keeps letters, digits, apostrophes and emoji; every other codepoint becomes a space.
// Whitespace runs collapse to one space and the ends are trimmed. Idempotent.
std::string normalize_text(std::string_view raw);

// ASCII and Latin-1 lowercase; other codepoints pass through.
std::string lowercase(std::string_view s);

using AbbreviationSet = std::set<std::string>;

// Lowercased tokens (with their periods) that never end a sentence.
const AbbreviationSet& default_abbreviations();
AbbreviationSet load_abbreviations(const std::filesystem::path& path);

std::vector<std::string> split_sentences(std::string_view text,
                                         const AbbreviationSet& abbreviations = default_abbreviations());

// Canonical match pattern for a configured keyword: '_' acts as a single space, then
// the pattern goes through the same normalization and lowercasing as document text.
std::string keyword_pattern(std::string_view keyword);

bool keyword_matches(std::string_view normalized_lower_text, std::string_view pattern, MatchMode mode);

// Throws ConfigError on empty keyword lists or conflicting match modes for one item.
void validate_rules(const std::vector<KeywordRule>& rules);

std::vector<TaggedDocument> tag_documents(const std::vector<Document>& docs,
                                          const std::vector<KeywordRule>& rules);

// JSON-lines I/O. Readers validate the Document invariants and throw DataError.
std::vector<Document> read_corpus(const std::filesystem::path& path);
std::vector<Document> parse_corpus(std::string_view jsonl);
std::string corpus_to_jsonl(const std::vector<Document>& docs);

std::vector<TaggedDocument> read_tagged(const std::filesystem::path& path);
std::string tagged_to_jsonl(const std::vector<TaggedDocument>& docs);

// Newsletter text becomes one newsletter_sentence document per sentence,
// with ids "<doc_id>#<index>".
std::vector<Document> explode_newsletter(const Document& newsletter,
                                         const AbbreviationSet& abbreviations = default_abbreviations());

} // namespace semscale
