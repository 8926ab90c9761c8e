#pragma once

#include "semscale/classifier.hpp"
#include "semscale/corpus.hpp"
#include "semscale/items.hpp"

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace semscale {

struct StanceLabel
{
  std::string doc_id;
  std::string item_id;
  Stance label = Stance::neutral;
  double score = 0.0; // normalized probability mass of the winning group
};

// Sums entailment probability within each stance group, normalizes across groups and takes the
// argmax. Ties go to the first of conservative, liberal, neutral. Groups without hypotheses
// do not compete.
StanceLabel label_from_scores(const std::string& doc_id,
                              const HypothesisSet& hyp,
                              const std::vector<double>& scores);

// Flattened hypothesis order used on the wire: conservative, liberal, neutral.
std::vector<std::string> flatten_hypotheses(const HypothesisSet& hyp);

// Throws DataError when the document is not tagged with the item, TransportError (carrying the
// doc id) on transport failure, ProtocolError on a malformed response.
StanceLabel classify_document(const TaggedDocument& doc, const HypothesisSet& hyp, const ClassifierClient& client);

struct ClassifyOptions
{
  std::size_t batch_size = 16;
  std::size_t max_in_flight = 4;
  int max_retries = 3;
  std::chrono::milliseconds backoff{ 200 };
};

struct DeadLetter
{
  std::string doc_id;
  std::string item_id;
  std::string error;
};

struct ClassifyResult
{
  std::vector<StanceLabel> labels; // document order, then catalog item order
  std::vector<DeadLetter> dead_letters;
};

// Classifies every (document, tagged item) pair in batches of statements sharing one item.
// Transport failures are retried max_retries times, then the batch is dead-lettered.
ClassifyResult classify_corpus(const std::vector<TaggedDocument>& docs,
                               const ItemCatalog& catalog,
                               const ClassifierClient& client,
                               const ClassifyOptions& options = {});

std::string labels_to_jsonl(const std::vector<StanceLabel>& labels);
std::vector<StanceLabel> parse_labels(std::string_view jsonl);
std::vector<StanceLabel> read_labels(const std::filesystem::path& path);
std::string dead_letters_to_jsonl(const std::vector<DeadLetter>& dead);

} // namespace semscale
