// One-to-one stable matching between a gold nugget set and a generated one
// by question-embedding similarity, and the side-by-side listing used to
// inspect it by hand.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nuggetkit/providers.hpp"
#include "nuggetkit/serialize.hpp"

namespace nuggetkit::align {

/// Gale-Shapley with the first side proposing. prefs[i] lists partners best
/// first; lists may be partial. Returns each proposer's partner or -1.
std::vector<int> deferred_acceptance(const std::vector<std::vector<int>>& proposer_prefs,
                                     const std::vector<std::vector<int>>& receiver_prefs);

struct Item {
  std::string id;
  std::string question;
};

struct MatchPair {
  std::string gold_id;
  std::string gen_id;
  double cosine = 0.0;
  std::optional<std::string> judged;  // "clear" / "unclear", filled in by a person

  bool operator==(const MatchPair&) const = default;
};

void to_json(Json& j, const MatchPair& v);
void from_json(const Json& j, MatchPair& v);

struct MatchResult {
  std::vector<MatchPair> pairs;           // gold id order
  std::vector<std::string> unmatched_gold;
};

/// Gold proposes; both sides rank by descending cosine, ties by id.
/// cosines[g][n] is the similarity of gold g and generated n.
MatchResult stable_match(const std::vector<std::string>& gold_ids, const std::vector<std::string>& gen_ids,
                         const std::vector<std::vector<double>>& cosines);

/// Embeds both question sets and matches them. Both sets must be non-empty.
MatchResult stable_match(const std::vector<Item>& gold, const std::vector<Item>& gen,
                         providers::EmbeddingProvider& embedder);

inline constexpr double kDefaultClearThreshold = 0.72;

/// Plain-text listing: provisional-clear pairs (cosine >= threshold) first,
/// then the rest, each group by descending cosine.
std::string alignment_report(const std::vector<MatchPair>& pairs, const std::vector<Item>& gold,
                             const std::vector<Item>& gen, double threshold_clear = kDefaultClearThreshold);

}  // namespace nuggetkit::align
