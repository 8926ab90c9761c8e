#include "semscale/classifier.hpp"

#include "semscale/error.hpp"
#include "semscale/io.hpp"

#include <httplib.h>
#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <cmath>

namespace semscale {

using json = nlohmann::json;

std::vector<MockRule> parse_mock_rules(std::string_view text)
{
  std::vector<MockRule> rules;
  try {
    YAML::Node root = YAML::Load(std::string(text));
    if (!root["rules"] || !root["rules"].IsSequence())
      throw ConfigError("mock rules need a 'rules' list");
    for (const auto& n : root["rules"]) {
      MockRule r;
      r.pattern = n["pattern"].as<std::string>();
      r.item_id = n["item"] ? n["item"].as<std::string>() : "";
      r.label = parse_stance(n["label"].as<std::string>());
      if (keyword_pattern(r.pattern).empty())
        throw ConfigError("mock rule with empty pattern");
      rules.push_back(std::move(r));
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("mock rules: ") + e.what());
  }
  return rules;
}

std::vector<MockRule> load_mock_rules(const std::filesystem::path& path)
{
  if (!std::filesystem::exists(path))
    throw ConfigError("mock rules not found: " + path.string());
  return parse_mock_rules(io::read_file(path));
}

std::string mock_rules_to_yaml(const std::vector<MockRule>& rules)
{
  YAML::Emitter out;
  out << YAML::BeginMap << YAML::Key << "rules" << YAML::Value << YAML::BeginSeq;
  for (const auto& r : rules) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "pattern" << YAML::Value << r.pattern;
    if (!r.item_id.empty())
      out << YAML::Key << "item" << YAML::Value << r.item_id;
    out << YAML::Key << "label" << YAML::Value << std::string(to_string(r.label));
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

MockClassifier::MockClassifier(const ItemCatalog& catalog, std::vector<MockRule> rules)
  : rules_(std::move(rules))
{
  for (const auto& it : catalog.items())
    for (Stance s : { Stance::conservative, Stance::liberal, Stance::neutral })
      for (const auto& h : it.hypotheses.group(s))
        owners_.emplace(h, Owner{ it.id, s });
  for (const auto& r : rules_)
    patterns_.push_back(keyword_pattern(r.pattern));
}

std::vector<std::vector<double>> MockClassifier::entailment(const std::vector<std::string>& statements,
                                                            const std::vector<std::string>& hypotheses) const
{
  std::vector<std::vector<double>> out;
  out.reserve(statements.size());
  for (const auto& st : statements) {
    std::string text = lowercase(normalize_text(st));
    std::map<std::string, Stance> fired; // item -> entailed stance
    std::vector<double> row;
    row.reserve(hypotheses.size());
    for (const auto& h : hypotheses) {
      auto own = owners_.find(h);
      if (own == owners_.end()) {
        row.push_back(kNotEntailed);
        continue;
      }
      const auto& [item, stance] = own->second;
      auto f = fired.find(item);
      if (f == fired.end()) {
        Stance hit = Stance::neutral;
        for (std::size_t r = 0; r < rules_.size(); ++r) {
          if (!rules_[r].item_id.empty() && rules_[r].item_id != item)
            continue;
          if (keyword_matches(text, patterns_[r], MatchMode::substring)) {
            hit = rules_[r].label;
            break;
          }
        }
        f = fired.emplace(item, hit).first;
      }
      row.push_back(f->second == stance ? kEntailed : kNotEntailed);
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string encode_entailment_request(const std::vector<std::string>& statements,
                                      const std::vector<std::string>& hypotheses)
{
  json j;
  j["statements"] = statements;
  j["hypotheses"] = hypotheses;
  return j.dump();
}

std::vector<std::vector<double>> decode_entailment_response(std::string_view body,
                                                            std::size_t n_statements,
                                                            std::size_t n_hypotheses)
{
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("classifier response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("scores") || !j["scores"].is_array())
    throw ProtocolError("classifier response lacks a 'scores' array");
  const auto& scores = j["scores"];
  if (scores.size() != n_statements)
    throw ProtocolError("classifier returned " + std::to_string(scores.size()) + " rows for " +
                        std::to_string(n_statements) + " statements");
  std::vector<std::vector<double>> out;
  for (const auto& row : scores) {
    if (!row.is_array() || row.size() != n_hypotheses)
      throw ProtocolError("classifier row does not have one score per hypothesis");
    std::vector<double> r;
    for (const auto& v : row) {
      if (!v.is_number())
        throw ProtocolError("non-numeric entailment score");
      double p = v.get<double>();
      if (!std::isfinite(p) || p < 0.0 || p > 1.0)
        throw ProtocolError("entailment score outside [0,1]");
      r.push_back(p);
    }
    out.push_back(std::move(r));
  }
  return out;
}

HttpClassifier::HttpClassifier(HttpClassifierConfig config) : config_(std::move(config))
{
  const std::string& url = config_.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http")
    throw ConfigError("classifier endpoint must be an http:// URL: '" + url + "'");
  auto path_start = url.find('/', scheme_end + 3);
  host_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

HttpClassifier::~HttpClassifier() = default;

std::vector<std::vector<double>> HttpClassifier::entailment(const std::vector<std::string>& statements,
                                                            const std::vector<std::string>& hypotheses) const
{
  httplib::Client cli(host_);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!config_.bearer_token.empty())
    headers.emplace("Authorization", "Bearer " + config_.bearer_token);
  auto res = cli.Post(path_, headers, encode_entailment_request(statements, hypotheses), "application/json");
  if (!res)
    throw TransportError("", "classifier request failed: " + httplib::to_string(res.error()));
  if (res->status >= 500 || res->status == 429 || res->status == 408)
    throw TransportError("", "classifier returned HTTP " + std::to_string(res->status));
  if (res->status != 200)
    throw ProtocolError("classifier returned HTTP " + std::to_string(res->status));
  return decode_entailment_response(res->body, statements.size(), hypotheses.size());
}

} // namespace semscale
