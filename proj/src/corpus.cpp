#include "semscale/corpus.hpp"

#include "semscale/error.hpp"
#include "semscale/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <unordered_set>

namespace semscale {

using json = nlohmann::json;

std::string_view to_string(DocumentSource s)
{
  return s == DocumentSource::post ? "post" : "newsletter_sentence";
}

DocumentSource parse_document_source(std::string_view s)
{
  if (s == "post")
    return DocumentSource::post;
  if (s == "newsletter_sentence")
    return DocumentSource::newsletter_sentence;
  throw DataError("unknown document source '" + std::string(s) + "'");
}

std::string_view to_string(MatchMode m)
{
  return m == MatchMode::substring ? "substring" : "word_boundary";
}

MatchMode parse_match_mode(std::string_view s)
{
  if (s == "substring")
    return MatchMode::substring;
  if (s == "word_boundary")
    return MatchMode::word_boundary;
  throw ConfigError("unknown match_mode '" + std::string(s) + "'");
}

namespace {

// Decodes one codepoint starting at s[i]; invalid bytes decode as U+FFFD and advance by one.
char32_t decode_utf8(std::string_view s, std::size_t& i)
{
  auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size())
      return -1;
    auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    int c = cont(static_cast<std::size_t>(k));
    if (c < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

void encode_utf8(char32_t cp, std::string& out)
{
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_emoji(char32_t cp)
{
  return (cp >= 0x1F000 && cp <= 0x1FAFF) || // pictographs, emoticons, flags, modifiers
         (cp >= 0x2600 && cp <= 0x27BF) ||   // misc symbols, dingbats
         (cp >= 0x2300 && cp <= 0x23FF) ||   // misc technical (watch, hourglass)
         (cp >= 0x2B00 && cp <= 0x2BFF) ||   // arrows, stars
         (cp >= 0x2190 && cp <= 0x21FF) || cp == 0x203C || cp == 0x2049 || cp == 0x2122 ||
         cp == 0x2139 || cp == 0x00A9 || cp == 0x00AE || cp == 0x3030 || cp == 0x303D ||
         cp == 0x3297 || cp == 0x3299 ||
         cp == 0x200D ||                     // zero width joiner
         cp == 0x20E3 ||                     // keycap
         (cp >= 0xFE00 && cp <= 0xFE0F) ||   // variation selectors
         (cp >= 0xE0020 && cp <= 0xE007F);   // tag sequences
}

bool is_space(char32_t cp)
{
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f' ||
         cp == 0x00A0 || cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 ||
         cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

bool is_apostrophe(char32_t cp)
{
  return cp == '\'' || cp == 0x2019 || cp == 0x02BC;
}

// Without a Unicode database: everything outside ASCII that is not a known
// punctuation, symbol, or control block counts as a letter.
bool is_letter_or_digit(char32_t cp)
{
  if (cp < 0x80)
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  if (cp < 0xC0 || cp == 0xD7 || cp == 0xF7)
    return false;
  if (cp >= 0x2000 && cp <= 0x2BFF)
    return false;
  if (cp >= 0x3000 && cp <= 0x303F)
    return false;
  if (cp >= 0xFE10 && cp <= 0xFE6F)
    return false;
  if ((cp >= 0xFF00 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
      (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65))
    return false;
  if (cp == 0xFFFD || (cp >= 0xE000 && cp <= 0xF8FF))
    return false;
  return true;
}

bool is_word_byte(char c)
{
  auto b = static_cast<unsigned char>(c);
  return b >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

} // namespace

std::string normalize_text(std::string_view raw)
{
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  std::size_t i = 0;
  while (i < raw.size()) {
    char32_t cp = decode_utf8(raw, i);
    bool keep = is_letter_or_digit(cp) || is_emoji(cp) || is_apostrophe(cp);
    if (!keep || is_space(cp)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty())
      out.push_back(' ');
    pending_space = false;
    encode_utf8(is_apostrophe(cp) ? U'\'' : cp, out);
  }
  return out;
}

std::string lowercase(std::string_view s)
{
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    char32_t cp = decode_utf8(s, i);
    if (cp >= 'A' && cp <= 'Z')
      cp += 32;
    else if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7)
      cp += 32;
    encode_utf8(cp, out);
  }
  return out;
}

const AbbreviationSet& default_abbreviations()
{
  // Mirrors fixtures/abbreviations.txt.
  static const AbbreviationSet set = {
    "mr.",   "mrs.",  "ms.",   "dr.",   "prof.", "sr.",   "jr.",   "st.",   "rep.",  "sen.",
    "gov.",  "pres.", "gen.",  "lt.",   "col.",  "sgt.",  "capt.", "hon.",  "rev.",  "h.r.",
    "h.res.", "s.",   "s.res.", "u.s.", "u.s.a.", "u.k.", "d.c.",  "e.g.",  "i.e.",  "etc.",
    "vs.",   "v.",    "no.",   "inc.",  "corp.", "co.",   "ltd.",  "jan.",  "feb.",  "mar.",
    "apr.",  "jun.",  "jul.",  "aug.",  "sep.",  "sept.", "oct.",  "nov.",  "dec.",  "a.m.",
    "p.m.",  "sec.",  "approx.", "dept.", "est.", "fig.", "vol.",  "pp.",   "ft.",   "mt.",
  };
  return set;
}

AbbreviationSet load_abbreviations(const std::filesystem::path& path)
{
  AbbreviationSet set;
  for (auto& line : io::read_lines(path)) {
    auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#')
      continue;
    auto e = line.find_last_not_of(" \t");
    set.insert(lowercase(line.substr(b, e - b + 1)));
  }
  return set;
}

std::vector<std::string> split_sentences(std::string_view text, const AbbreviationSet& abbreviations)
{
  std::vector<std::string> out;
  auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  auto is_terminal = [](char c) { return c == '.' || c == '!' || c == '?'; };
  auto is_closer = [](char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; };

  auto push = [&](std::size_t b, std::size_t e) {
    while (b < e && is_ws(text[b]))
      ++b;
    while (e > b && is_ws(text[e - 1]))
      --e;
    if (e > b)
      out.emplace_back(text.substr(b, e - b));
  };

  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminal(text[i])) {
      ++i;
      continue;
    }
    std::size_t term = i;
    std::size_t j = i;
    while (j < text.size() && is_terminal(text[j]))
      ++j;
    while (j < text.size() && is_closer(text[j]))
      ++j;
    if (j < text.size() && !is_ws(text[j])) {
      i = j;
      continue;
    }
    bool boundary = true;
    if (text[term] == '.' && j == term + 1) {
      std::size_t tb = term;
      while (tb > start && !is_ws(text[tb - 1]))
        --tb;
      while (tb < term && (text[tb] == '(' || text[tb] == '"' || text[tb] == '\'' || text[tb] == '['))
        ++tb;
      std::string token = lowercase(text.substr(tb, term + 1 - tb));
      if (abbreviations.count(token))
        boundary = false;
    }
    if (boundary) {
      push(start, j);
      start = j;
    }
    i = j;
  }
  push(start, text.size());
  return out;
}

std::string keyword_pattern(std::string_view keyword)
{
  std::string k(keyword);
  std::replace(k.begin(), k.end(), '_', ' ');
  return lowercase(normalize_text(k));
}

bool keyword_matches(std::string_view text, std::string_view pattern, MatchMode mode)
{
  if (pattern.empty())
    return false;
  std::size_t pos = text.find(pattern);
  while (pos != std::string_view::npos) {
    if (mode == MatchMode::substring)
      return true;
    bool left_ok = pos == 0 || !is_word_byte(text[pos - 1]);
    std::size_t end = pos + pattern.size();
    bool right_ok = end == text.size() || !is_word_byte(text[end]);
    if (left_ok && right_ok)
      return true;
    pos = text.find(pattern, pos + 1);
  }
  return false;
}

void validate_rules(const std::vector<KeywordRule>& rules)
{
  std::map<std::string, MatchMode> modes;
  for (const auto& r : rules) {
    if (r.item_id.empty())
      throw ConfigError("keyword rule with empty item_id");
    if (r.keywords.empty())
      throw ConfigError("keyword rule for '" + r.item_id + "' has no keywords");
    for (const auto& k : r.keywords)
      if (keyword_pattern(k).empty())
        throw ConfigError("keyword '" + k + "' for '" + r.item_id + "' is empty after normalization");
    auto [it, inserted] = modes.emplace(r.item_id, r.match_mode);
    if (!inserted && it->second != r.match_mode)
      throw ConfigError("item '" + r.item_id + "' declared with conflicting match modes");
  }
}

std::vector<TaggedDocument> tag_documents(const std::vector<Document>& docs,
                                          const std::vector<KeywordRule>& rules)
{
  validate_rules(rules);
  struct Compiled
  {
    const std::string* item_id;
    std::string pattern;
    MatchMode mode;
  };
  std::vector<Compiled> compiled;
  for (const auto& r : rules)
    for (const auto& k : r.keywords)
      compiled.push_back({ &r.item_id, keyword_pattern(k), r.match_mode });

  std::vector<TaggedDocument> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    TaggedDocument td{ d, {} };
    std::string text = lowercase(normalize_text(d.text));
    for (const auto& c : compiled)
      if (!td.item_ids.count(*c.item_id) && keyword_matches(text, c.pattern, c.mode))
        td.item_ids.insert(*c.item_id);
    out.push_back(std::move(td));
  }
  return out;
}

namespace {

json document_json(const Document& d)
{
  json j;
  j["doc_id"] = d.doc_id;
  j["author_id"] = d.author_id;
  j["text"] = d.text;
  j["source"] = std::string(to_string(d.source));
  if (d.timestamp)
    j["timestamp"] = *d.timestamp;
  return j;
}

Document document_from_json(const json& j, std::size_t line_no)
{
  auto where = [&] { return "line " + std::to_string(line_no); };
  if (!j.is_object())
    throw DataError(where() + ": expected a JSON object");
  Document d;
  try {
    d.doc_id = j.at("doc_id").get<std::string>();
    d.author_id = j.at("author_id").get<std::string>();
    d.text = j.at("text").get<std::string>();
    d.source = parse_document_source(j.value("source", std::string("post")));
    if (j.contains("timestamp") && !j["timestamp"].is_null())
      d.timestamp = j["timestamp"].get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(where() + ": " + e.what());
  }
  if (d.doc_id.empty())
    throw DataError(where() + ": empty doc_id");
  if (d.author_id.empty())
    throw DataError(where() + ": empty author_id for " + d.doc_id);
  if (normalize_text(d.text).empty())
    throw DataError(where() + ": text of " + d.doc_id + " is empty after normalization");
  return d;
}

template <typename F>
void for_each_json_line(std::string_view jsonl, F&& f)
{
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < jsonl.size()) {
    std::size_t end = jsonl.find('\n', start);
    if (end == std::string_view::npos)
      end = jsonl.size();
    ++line_no;
    std::string_view line = jsonl.substr(start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos)
      continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    f(j, line_no);
  }
}

void check_unique(const std::vector<Document>& docs)
{
  std::unordered_set<std::string> seen;
  for (const auto& d : docs)
    if (!seen.insert(d.doc_id).second)
      throw DataError("duplicate doc_id '" + d.doc_id + "'");
}

} // namespace

std::vector<Document> parse_corpus(std::string_view jsonl)
{
  std::vector<Document> docs;
  for_each_json_line(jsonl, [&](const json& j, std::size_t n) { docs.push_back(document_from_json(j, n)); });
  check_unique(docs);
  return docs;
}

std::vector<Document> read_corpus(const std::filesystem::path& path)
{
  return parse_corpus(io::read_file(path));
}

std::string corpus_to_jsonl(const std::vector<Document>& docs)
{
  std::string out;
  for (const auto& d : docs) {
    out += document_json(d).dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<TaggedDocument> read_tagged(const std::filesystem::path& path)
{
  std::vector<TaggedDocument> out;
  std::vector<Document> docs;
  for_each_json_line(io::read_file(path), [&](const json& j, std::size_t n) {
    TaggedDocument td{ document_from_json(j, n), {} };
    if (!j.contains("item_ids") || !j["item_ids"].is_array())
      throw DataError("line " + std::to_string(n) + ": missing item_ids array");
    for (const auto& id : j["item_ids"])
      td.item_ids.insert(id.get<std::string>());
    docs.push_back(td.document);
    out.push_back(std::move(td));
  });
  check_unique(docs);
  return out;
}

std::string tagged_to_jsonl(const std::vector<TaggedDocument>& docs)
{
  std::string out;
  for (const auto& td : docs) {
    json j = document_json(td.document);
    j["item_ids"] = json::array();
    for (const auto& id : td.item_ids)
      j["item_ids"].push_back(id);
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<Document> explode_newsletter(const Document& newsletter, const AbbreviationSet& abbreviations)
{
  std::vector<Document> out;
  std::size_t idx = 0;
  for (auto& s : split_sentences(newsletter.text, abbreviations)) {
    if (normalize_text(s).empty())
      continue;
    Document d = newsletter;
    d.doc_id = newsletter.doc_id + "#" + std::to_string(idx++);
    d.text = std::move(s);
    d.source = DocumentSource::newsletter_sentence;
    out.push_back(std::move(d));
  }
  return out;
}

} // namespace semscale
