#include "nuggetkit/clusterstage.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "nuggetkit/text.hpp"

namespace nuggetkit::cluster {

void to_json(Json& j, const ParaphraseEdge& v) {
  j = Json{{"nugget_id_a", v.nugget_id_a},
           {"nugget_id_b", v.nugget_id_b},
           {"cosine", v.cosine},
           {"verified", v.verified}};
}

void from_json(const Json& j, ParaphraseEdge& v) {
  v.nugget_id_a = io::json_string(j, "nugget_id_a");
  v.nugget_id_b = io::json_string(j, "nugget_id_b");
  v.cosine = io::json_number(j, "cosine");
  const Json& f = io::json_field(j, "verified");
  if (!f.is_boolean()) throw FormatError("field 'verified' must be a boolean");
  v.verified = f.get<bool>();
}

void ClusterConfig::check() const {
  if (!(cosine_threshold > 0.0 && cosine_threshold <= 1.0))
    throw ContractError("cosine_threshold must lie in (0, 1]");
}

std::vector<ParaphraseEdge> candidate_pairs(const std::vector<std::string>& ids,
                                            const std::vector<providers::Vector>& vectors, double threshold) {
  if (ids.size() != vectors.size()) throw ContractError("candidate_pairs: ids and vectors differ in length");
  std::vector<ParaphraseEdge> edges;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      double c = providers::unit_cosine(vectors[i], vectors[j]);
      if (!(c > threshold)) continue;
      const auto& [a, b] = std::minmax(ids[i], ids[j]);
      edges.push_back({a, b, c, false});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const ParaphraseEdge& x, const ParaphraseEdge& y) {
    return std::tie(x.nugget_id_a, x.nugget_id_b) < std::tie(y.nugget_id_a, y.nugget_id_b);
  });
  return edges;
}

std::vector<ParaphraseEdge> candidate_pairs(const std::vector<std::string>& ids,
                                            const std::vector<std::string>& questions,
                                            providers::EmbeddingProvider& embedder, const ClusterConfig& config) {
  config.check();
  if (questions.empty()) throw ContractError("candidate_pairs needs at least one question");
  std::vector<providers::Vector> vectors;
  try {
    vectors = embedder.embed(questions);
  } catch (const ProviderError& e) {
    throw StageError(std::string("embedding failed: ") + e.what());
  }
  return candidate_pairs(ids, vectors, config.cosine_threshold);
}

std::vector<ParaphraseEdge> judge_pairs(std::vector<ParaphraseEdge> edges,
                                        const std::map<std::string, std::string>& questions,
                                        providers::ChatProvider& provider, DiagnosticLog& log, int parallelism) {
  auto question = [&](const std::string& id) -> const std::string& {
    auto it = questions.find(id);
    if (it == questions.end()) throw ContractError("edge references unknown nugget " + id);
    return it->second;
  };
  for (const auto& e : edges) {
    question(e.nugget_id_a);
    question(e.nugget_id_b);
  }
  parallel_for(edges.size(), parallelism, [&](std::size_t i) {
    auto& e = edges[i];
    providers::ChatRequest req;
    req.template_id = providers::TemplateId::kVerifyParaphrase;
    req.variables = {{"question_a", question(e.nugget_id_a)}, {"question_b", question(e.nugget_id_b)}};
    std::string subject = e.nugget_id_a + "|" + e.nugget_id_b;
    try {
      e.verified = providers::chat_parsed(provider, req, providers::parse_yes_no);
    } catch (const ProviderError& err) {
      e.verified = false;
      log.add("stage2a", "provider_error", subject, err.what());
    } catch (const ParseError& err) {
      e.verified = false;
      log.add("stage2a", "parse_error", subject, err.what());
    }
  });
  return edges;
}

std::vector<ParaphraseEdge> verify_pairs(std::vector<ParaphraseEdge> edges,
                                         const std::map<std::string, std::string>& questions,
                                         providers::ChatProvider& provider, DiagnosticLog& log, int parallelism) {
  auto judged = judge_pairs(std::move(edges), questions, provider, log, parallelism);
  std::erase_if(judged, [](const ParaphraseEdge& e) { return !e.verified; });
  return judged;
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<std::size_t> parent_, size_;
};

}  // namespace

std::vector<std::vector<std::string>> connected_components(const std::vector<std::string>& ids,
                                                           const std::vector<ParaphraseEdge>& edges) {
  std::vector<std::string> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ContractError("connected_components: duplicate node id");
  auto index = [&](const std::string& id) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), id);
    if (it == sorted.end() || *it != id) throw ContractError("edge references unknown nugget " + id);
    return static_cast<std::size_t>(it - sorted.begin());
  };
  DisjointSets sets(sorted.size());
  for (const auto& e : edges) sets.unite(index(e.nugget_id_a), index(e.nugget_id_b));

  // Members are visited in sorted order, so each cluster comes out sorted and
  // clusters are ordered by their smallest member.
  std::vector<std::vector<std::string>> clusters;
  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    auto root = sets.find(i);
    auto [it, fresh] = slot.emplace(root, clusters.size());
    if (fresh) clusters.emplace_back();
    clusters[it->second].push_back(sorted[i]);
  }
  return clusters;
}

QANugget merge_cluster(const std::vector<CandidateNugget>& cluster) {
  if (cluster.empty()) throw ContractError("merge_cluster: empty cluster");
  QANugget out;
  out.nugget_id = cluster.front().nugget_id;
  out.topic_id = cluster.front().topic_id;
  out.question = cluster.front().question;
  std::vector<std::string> keys;
  for (const auto& member : cluster) {
    if (member.topic_id != out.topic_id) throw ContractError("merge_cluster: members span several topics");
    out.nugget_id = std::min(out.nugget_id, member.nugget_id);
    out.provenance.member_question_texts.push_back(member.question);
    for (const auto& a : member.answers) {
      auto key = text::normalize(a.text);
      auto it = std::find(keys.begin(), keys.end(), key);
      if (it == keys.end()) {
        keys.push_back(key);
        out.answers.push_back(a);
      } else {
        auto& target = out.answers[static_cast<std::size_t>(it - keys.begin())];
        target.doc_ids.insert(a.doc_ids.begin(), a.doc_ids.end());
      }
    }
  }
  out.provenance.cluster_size = static_cast<int>(cluster.size());
  out.provenance.grounding_doc_count = grounding_doc_count(out.answers);
  return out;
}

Stage2aResult run_stage2a(const std::vector<CandidateNugget>& candidates, providers::EmbeddingProvider& embedder,
                          providers::ChatProvider* verifier, const ClusterConfig& config, DiagnosticLog& log) {
  config.check();
  Stage2aResult result;
  if (candidates.empty()) return result;
  std::vector<std::string> ids, questions;
  std::map<std::string, std::string> by_id;
  std::map<std::string, const CandidateNugget*> lookup;
  for (const auto& c : candidates) {
    ids.push_back(c.nugget_id);
    questions.push_back(c.question);
    by_id[c.nugget_id] = c.question;
    lookup[c.nugget_id] = &c;
  }
  auto edges = candidate_pairs(ids, questions, embedder, config);
  if (config.verify_with_llm) {
    if (!verifier) throw ContractError("paraphrase verification requested without a provider");
    result.edges = judge_pairs(std::move(edges), by_id, *verifier, log, config.parallelism);
  } else {
    for (auto& e : edges) e.verified = true;
    result.edges = std::move(edges);
  }
  std::vector<ParaphraseEdge> verified;
  for (const auto& e : result.edges)
    if (e.verified) verified.push_back(e);
  result.clusters = connected_components(ids, verified);
  for (const auto& cl : result.clusters) {
    std::vector<CandidateNugget> members;
    for (const auto& id : cl) members.push_back(*lookup.at(id));
    result.merged.push_back(merge_cluster(members));
  }
  return result;
}

}  // namespace nuggetkit::cluster
