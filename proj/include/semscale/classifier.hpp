#pragma once

#include "semscale/items.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace semscale {

// Zero-shot entailment backend. Implementations must be callable concurrently.
class ClassifierClient
{
public:
  virtual ~ClassifierClient() = default;

  // result[s][h] is P(statements[s] entails hypotheses[h]).
  virtual std::vector<std::vector<double>> entailment(const std::vector<std::string>& statements,
                                                      const std::vector<std::string>& hypotheses) const = 0;
};

// A mock rule fires when its pattern (normalized, lowercased) occurs in the statement.
// An empty item_id applies to every item.
struct MockRule
{
  std::string pattern;
  std::string item_id;
  Stance label = Stance::neutral;
};

std::vector<MockRule> load_mock_rules(const std::filesystem::path& path);
std::vector<MockRule> parse_mock_rules(std::string_view yaml);
std::string mock_rules_to_yaml(const std::vector<MockRule>& rules);

// Deterministic offline classifier. For each hypothesis it looks up the owning item and stance
// in the catalog; the first rule matching the statement for that item picks the entailed stance
// (neutral when none fires). Entailed hypotheses score 0.9, all others 0.05.
class MockClassifier : public ClassifierClient
{
public:
  MockClassifier(const ItemCatalog& catalog, std::vector<MockRule> rules);

  std::vector<std::vector<double>> entailment(const std::vector<std::string>& statements,
                                              const std::vector<std::string>& hypotheses) const override;

  static constexpr double kEntailed = 0.9;
  static constexpr double kNotEntailed = 0.05;

private:
  struct Owner
  {
    std::string item_id;
    Stance stance;
  };
  std::map<std::string, Owner> owners_;
  std::vector<MockRule> rules_;
  std::vector<std::string> patterns_;
};

struct HttpClassifierConfig
{
  std::string endpoint; // http://host:port/path
  std::chrono::milliseconds timeout{ 30000 };
  std::string bearer_token; // empty: no Authorization header
};

// Posts {"statements": [...], "hypotheses": [...]} and reads {"scores": [[...], ...]}.
class HttpClassifier : public ClassifierClient
{
public:
  explicit HttpClassifier(HttpClassifierConfig config);
  ~HttpClassifier() override;

  std::vector<std::vector<double>> entailment(const std::vector<std::string>& statements,
                                              const std::vector<std::string>& hypotheses) const override;

private:
  HttpClassifierConfig config_;
  std::string host_;
  std::string path_;
};

// Request/response bodies of the wire protocol.
std::string encode_entailment_request(const std::vector<std::string>& statements,
                                      const std::vector<std::string>& hypotheses);
std::vector<std::vector<double>> decode_entailment_response(std::string_view body,
                                                            std::size_t n_statements,
                                                            std::size_t n_hypotheses);

} // namespace semscale
