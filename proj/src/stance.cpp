#include "semscale/stance.hpp"

#include "semscale/error.hpp"
#include "semscale/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <thread>

namespace semscale {

using json = nlohmann::json;

std::vector<std::string> flatten_hypotheses(const HypothesisSet& hyp)
{
  std::vector<std::string> out;
  for (Stance s : { Stance::conservative, Stance::liberal, Stance::neutral })
    for (const auto& h : hyp.group(s))
      out.push_back(h);
  return out;
}

StanceLabel label_from_scores(const std::string& doc_id, const HypothesisSet& hyp, const std::vector<double>& scores)
{
  std::size_t expected = hyp.conservative_hypotheses.size() + hyp.liberal_hypotheses.size() +
                         hyp.neutral_hypotheses.size();
  if (scores.size() != expected)
    throw ProtocolError("expected " + std::to_string(expected) + " scores for " + doc_id + ", got " +
                        std::to_string(scores.size()));
  double mass[3] = { 0, 0, 0 };
  bool present[3] = { false, false, false };
  std::size_t pos = 0;
  for (int g = 0; g < 3; ++g) {
    const auto& hs = hyp.group(static_cast<Stance>(g));
    present[g] = !hs.empty();
    for (std::size_t h = 0; h < hs.size(); ++h)
      mass[g] += scores[pos++];
  }
  double total = mass[0] + mass[1] + mass[2];
  int best = -1;
  for (int g = 0; g < 3; ++g)
    if (present[g] && (best < 0 || mass[g] > mass[best]))
      best = g;
  StanceLabel out;
  out.doc_id = doc_id;
  out.item_id = hyp.item_id;
  out.label = static_cast<Stance>(best);
  if (total > 0) {
    out.score = mass[best] / total;
  } else {
    int groups = present[0] + present[1] + present[2];
    out.score = 1.0 / groups;
  }
  return out;
}

StanceLabel classify_document(const TaggedDocument& doc, const HypothesisSet& hyp, const ClassifierClient& client)
{
  if (!doc.item_ids.count(hyp.item_id))
    throw DataError("document " + doc.document.doc_id + " is not tagged with " + hyp.item_id);
  std::vector<std::string> statements{ normalize_text(doc.document.text) };
  std::vector<std::vector<double>> scores;
  try {
    scores = client.entailment(statements, flatten_hypotheses(hyp));
  } catch (const TransportError& e) {
    throw TransportError(doc.document.doc_id, e.what());
  }
  if (scores.size() != 1)
    throw ProtocolError("classifier returned " + std::to_string(scores.size()) + " rows for one statement");
  return label_from_scores(doc.document.doc_id, hyp, scores.front());
}

ClassifyResult classify_corpus(const std::vector<TaggedDocument>& docs,
                               const ItemCatalog& catalog,
                               const ClassifierClient& client,
                               const ClassifyOptions& options)
{
  struct Batch
  {
    const ItemSpec* item;
    std::vector<std::size_t> doc_idx;
  };
  std::vector<Batch> batches;
  const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);
  for (const auto& item : catalog.items()) {
    Batch cur{ &item, {} };
    for (std::size_t d = 0; d < docs.size(); ++d) {
      if (!docs[d].item_ids.count(item.id))
        continue;
      cur.doc_idx.push_back(d);
      if (cur.doc_idx.size() == batch_size) {
        batches.push_back(std::move(cur));
        cur = Batch{ &item, {} };
      }
    }
    if (!cur.doc_idx.empty())
      batches.push_back(std::move(cur));
  }
  for (const auto& td : docs)
    for (const auto& id : td.item_ids)
      if (!catalog.find(id))
        throw DataError("document " + td.document.doc_id + " tagged with unknown item '" + id + "'");

  std::vector<std::vector<StanceLabel>> batch_labels(batches.size());
  std::vector<std::vector<DeadLetter>> batch_dead(batches.size());

  auto run_batch = [&](std::size_t b) {
    const Batch& batch = batches[b];
    std::vector<std::string> statements;
    for (auto d : batch.doc_idx)
      statements.push_back(normalize_text(docs[d].document.text));
    auto hyps = flatten_hypotheses(batch.item->hypotheses);
    std::string failure;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
      try {
        auto scores = client.entailment(statements, hyps);
        if (scores.size() != statements.size())
          throw ProtocolError("classifier returned wrong number of rows");
        for (std::size_t s = 0; s < statements.size(); ++s)
          batch_labels[b].push_back(
            label_from_scores(docs[batch.doc_idx[s]].document.doc_id, batch.item->hypotheses, scores[s]));
        return;
      } catch (const TransportError& e) {
        failure = std::string("transport: ") + e.what();
        if (attempt < options.max_retries)
          std::this_thread::sleep_for(options.backoff * (1 << attempt));
      } catch (const ProtocolError& e) {
        failure = std::string("protocol: ") + e.what();
        batch_labels[b].clear();
        break;
      }
    }
    for (auto d : batch.doc_idx)
      batch_dead[b].push_back({ docs[d].document.doc_id, batch.item->id, failure });
  };

  std::size_t workers = std::clamp<std::size_t>(options.max_in_flight, 1, std::max<std::size_t>(1, batches.size()));
  if (workers <= 1) {
    for (std::size_t b = 0; b < batches.size(); ++b)
      run_batch(b);
  } else {
    std::atomic<std::size_t> next{ 0 };
    std::vector<std::thread> pool;
    std::mutex err_mu;
    std::exception_ptr err;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t b = next++; b < batches.size(); b = next++) {
          try {
            run_batch(b);
          } catch (...) {
            std::lock_guard lk(err_mu);
            if (!err)
              err = std::current_exception();
          }
        }
      });
    for (auto& t : pool)
      t.join();
    if (err)
      std::rethrow_exception(err);
  }

  // Deterministic order: document position, then catalog item position.
  std::map<std::string, std::size_t> doc_pos;
  for (std::size_t d = 0; d < docs.size(); ++d)
    doc_pos[docs[d].document.doc_id] = d;
  std::map<std::string, std::size_t> item_pos;
  for (std::size_t i = 0; i < catalog.items().size(); ++i)
    item_pos[catalog.items()[i].id] = i;

  ClassifyResult out;
  for (auto& bl : batch_labels)
    for (auto& l : bl)
      out.labels.push_back(std::move(l));
  for (auto& bd : batch_dead)
    for (auto& d : bd)
      out.dead_letters.push_back(std::move(d));
  auto key = [&](const std::string& doc, const std::string& item) {
    return std::make_pair(doc_pos.at(doc), item_pos.at(item));
  };
  std::sort(out.labels.begin(), out.labels.end(), [&](const StanceLabel& a, const StanceLabel& b) {
    return key(a.doc_id, a.item_id) < key(b.doc_id, b.item_id);
  });
  std::sort(out.dead_letters.begin(), out.dead_letters.end(), [&](const DeadLetter& a, const DeadLetter& b) {
    return key(a.doc_id, a.item_id) < key(b.doc_id, b.item_id);
  });
  return out;
}

std::string labels_to_jsonl(const std::vector<StanceLabel>& labels)
{
  std::string out;
  for (const auto& l : labels) {
    // Field order fixed for byte-stable output.
    out += "{\"doc_id\":" + json(l.doc_id).dump() + ",\"item_id\":" + json(l.item_id).dump() +
           ",\"label\":\"" + std::string(to_string(l.label)) + "\",\"score\":" + io::format_double(l.score) + "}\n";
  }
  return out;
}

std::vector<StanceLabel> parse_labels(std::string_view jsonl)
{
  std::vector<StanceLabel> out;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < jsonl.size()) {
    std::size_t end = jsonl.find('\n', start);
    if (end == std::string_view::npos)
      end = jsonl.size();
    ++line_no;
    auto line = jsonl.substr(start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos)
      continue;
    try {
      json j = json::parse(line);
      StanceLabel l;
      l.doc_id = j.at("doc_id").get<std::string>();
      l.item_id = j.at("item_id").get<std::string>();
      l.label = parse_stance(j.at("label").get<std::string>());
      l.score = j.at("score").get<double>();
      if (!(l.score >= 0.0 && l.score <= 1.0))
        throw DataError("score outside [0,1]");
      out.push_back(std::move(l));
    } catch (const std::exception& e) {
      throw DataError("labels line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<StanceLabel> read_labels(const std::filesystem::path& path)
{
  return parse_labels(io::read_file(path));
}

std::string dead_letters_to_jsonl(const std::vector<DeadLetter>& dead)
{
  std::string out;
  for (const auto& d : dead) {
    json j;
    j["doc_id"] = d.doc_id;
    j["item_id"] = d.item_id;
    j["error"] = d.error;
    out += j.dump() + "\n";
  }
  return out;
}

} // namespace semscale
