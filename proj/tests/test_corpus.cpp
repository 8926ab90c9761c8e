#include "semscale/corpus.hpp"
#include "semscale/error.hpp"
#include "semscale/io.hpp"
#include "semscale/items.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <random>

using namespace semscale;

namespace {

Document doc(std::string id, std::string author, std::string text)
{
  Document d;
  d.doc_id = std::move(id);
  d.author_id = std::move(author);
  d.text = std::move(text);
  return d;
}

} // namespace

TEST_CASE("normalize_text keeps letters, digits, apostrophes and emoji")
{
  CHECK(normalize_text("Guns &amp; God!!") == "Guns amp God");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("vote 🗳️ now") == "vote 🗳️ now");
  CHECK(normalize_text("  don't   STOP\tbelieving\n") == "don't STOP believing");
  CHECK(normalize_text("Café crème, São Paulo") == "Café crème São Paulo");
  CHECK(normalize_text("#MAGA2020 @user http://x.co") == "MAGA2020 user http x co");
  CHECK(normalize_text("a\u2014b") == "a b");
}

TEST_CASE("normalize_text is idempotent")
{
  for (const char* s : { "Guns &amp; God!!", "vote 🗳️ now", "¿Qué pasó? ¡Nada!", "x_y-z", "🇺🇸🇺🇸 USA!!", "\xff\xfe bad" }) {
    const auto once = normalize_text(s);
    CHECK(normalize_text(once) == once);
  }
}

TEST_CASE("lowercase handles ASCII and Latin-1")
{
  CHECK(lowercase("ÀÉÎ Abc") == "àéî abc");
  CHECK(lowercase("×") == "×");
}

TEST_CASE("split_sentences")
{
  CHECK(split_sentences("I voted. It mattered.") == std::vector<std::string>{ "I voted.", "It mattered." });
  CHECK(split_sentences("").empty());
  const auto abbrevs = load_abbreviations(testing::fixture("abbreviations.txt"));
  CHECK(split_sentences("H.R. 1319 passed. Good.", abbrevs) ==
        std::vector<std::string>{ "H.R. 1319 passed.", "Good." });
  CHECK(split_sentences("It costs 3.5 billion. Wow!", abbrevs) ==
        std::vector<std::string>{ "It costs 3.5 billion.", "Wow!" });
  CHECK(split_sentences("Mr. Smith went to the U.S. Senate today. Really?", abbrevs) ==
        std::vector<std::string>{ "Mr. Smith went to the U.S. Senate today.", "Really?" });
}

TEST_CASE("split_sentences never yields empty pieces and preserves the text")
{
  for (const char* t : { "a. b. c.", "...", "Hi!! There?? ", " . . ", "No terminal punctuation" }) {
    const auto parts = split_sentences(t);
    std::string joined, original;
    for (const auto& p : parts) {
      CHECK(!p.empty());
      joined += p;
    }
    for (char c : std::string(t))
      if (c != ' ')
        original += c;
    joined.erase(std::remove(joined.begin(), joined.end(), ' '), joined.end());
    CHECK(joined == original);
  }
}

TEST_CASE("tag_documents matches keywords case-insensitively")
{
  std::vector<KeywordRule> rules{ { "affect:Biden", { "biden" }, MatchMode::substring },
                                  { "policy:immigration", { "immigra" }, MatchMode::substring } };
  const auto t = tag_documents({ doc("1", "a", "Biden won"), doc("2", "a", "hello world"),
                                 doc("3", "a", "immigration reform now") },
                               rules);
  CHECK(t[0].item_ids == std::set<std::string>{ "affect:Biden" });
  CHECK(t[1].item_ids.empty());
  CHECK(t[2].item_ids == std::set<std::string>{ "policy:immigration" });
}

TEST_CASE("underscores in keywords match a single space")
{
  std::vector<KeywordRule> rules{ { "stop", { "stop_the_steal" }, MatchMode::substring } };
  const auto t = tag_documents({ doc("1", "a", "STOP THE STEAL!!"), doc("2", "a", "stopthesteal"),
                                 doc("3", "a", "stop-the-steal rally") },
                               rules);
  CHECK(t[0].item_ids.size() == 1);
  CHECK(t[1].item_ids.empty());
  CHECK(t[2].item_ids.size() == 1);
}

TEST_CASE("word boundary matching only removes tags")
{
  std::vector<KeywordRule> sub{ { "paul", { "paul" }, MatchMode::substring } };
  std::vector<KeywordRule> wb{ { "paul", { "paul" }, MatchMode::word_boundary } };
  const std::vector<Document> docs{ doc("1", "a", "Rand Paul's filibuster"), doc("2", "a", "Pauline said hi"),
                                    doc("3", "a", "paul"), doc("4", "a", "São Paulo") };
  const auto s = tag_documents(docs, sub);
  const auto w = tag_documents(docs, wb);
  for (std::size_t i = 0; i < docs.size(); ++i)
    CHECK(std::includes(s[i].item_ids.begin(), s[i].item_ids.end(), w[i].item_ids.begin(), w[i].item_ids.end()));
  CHECK(w[0].item_ids.size() == 1);
  CHECK(w[1].item_ids.empty());
  CHECK(w[2].item_ids.size() == 1);
  CHECK(w[3].item_ids.empty());
}

TEST_CASE("conflicting match modes for one item are rejected")
{
  std::vector<KeywordRule> rules{ { "x", { "a" }, MatchMode::substring }, { "x", { "b" }, MatchMode::word_boundary } };
  CHECK_THROWS_AS(validate_rules(rules), ConfigError);
  CHECK_THROWS_AS(tag_documents({ doc("1", "a", "a b") }, rules), ConfigError);
  CHECK_THROWS_AS(validate_rules({ { "y", {}, MatchMode::substring } }), ConfigError);
}

TEST_CASE("tagging is invariant to document and rule order")
{
  const ItemCatalog cat = load_item_catalog(testing::fixture("twitter_items.yaml"));
  auto docs = read_corpus(testing::fixture("corpus_200.jsonl"));
  auto rules = cat.rules();
  const auto base = tag_documents(docs, rules);
  std::map<std::string, std::set<std::string>> expect;
  for (const auto& t : base)
    expect[t.document.doc_id] = t.item_ids;
  std::mt19937 rng(3);
  std::shuffle(docs.begin(), docs.end(), rng);
  std::shuffle(rules.begin(), rules.end(), rng);
  for (const auto& t : tag_documents(docs, rules))
    CHECK(expect.at(t.document.doc_id) == t.item_ids);
}

TEST_CASE("fixture corpus tags match the recount oracle")
{
  const ItemCatalog cat = load_item_catalog(testing::fixture("twitter_items.yaml"));
  const auto tagged = tag_documents(read_corpus(testing::fixture("corpus_200.jsonl")), cat.rules());
  const auto golden = io::read_lines(testing::fixture("golden/tagged.jsonl"));
  REQUIRE(golden.size() == tagged.size());
  for (std::size_t i = 0; i < golden.size(); ++i) {
    const auto g = nlohmann::json::parse(golden[i]);
    CHECK(tagged[i].document.doc_id == g["doc_id"].get<std::string>());
    CHECK(tagged[i].item_ids == g["item_ids"].get<std::set<std::string>>());
  }
}

TEST_CASE("corpus jsonl round trip and validation")
{
  std::vector<Document> docs{ doc("d1", "a", "hello"), doc("d2", "b", "newsletter text") };
  docs[1].source = DocumentSource::newsletter_sentence;
  docs[1].timestamp = "2021-01-06T00:00:00Z";
  const auto back = parse_corpus(corpus_to_jsonl(docs));
  REQUIRE(back.size() == 2);
  CHECK(back[1].source == DocumentSource::newsletter_sentence);
  CHECK(back[1].timestamp == docs[1].timestamp);
  CHECK(parse_corpus("").empty());
  CHECK_THROWS_AS(parse_corpus("{\"doc_id\":\"x\"}\n"), DataError);
  CHECK_THROWS_AS(parse_corpus("not json\n"), DataError);
  CHECK_THROWS_AS(parse_corpus(corpus_to_jsonl({ doc("d1", "a", "x"), doc("d1", "b", "y") })), DataError);
}

TEST_CASE("explode_newsletter yields one sentence per document")
{
  Document n = doc("nl7", "rep1", "We passed H.R. 5376. It lowers costs. Thank you!");
  n.source = DocumentSource::newsletter_sentence;
  const auto abbrevs = load_abbreviations(testing::fixture("abbreviations.txt"));
  const auto parts = explode_newsletter(n, abbrevs);
  REQUIRE(parts.size() == 3);
  CHECK(parts[0].doc_id == "nl7#0");
  CHECK(parts[0].text == "We passed H.R. 5376.");
  CHECK(parts[2].author_id == "rep1");
  CHECK(parts[2].source == DocumentSource::newsletter_sentence);
}
