#include "nuggetkit/alignment.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <map>
#include <numeric>

namespace nuggetkit::align {

std::vector<int> deferred_acceptance(const std::vector<std::vector<int>>& proposer_prefs,
                                     const std::vector<std::vector<int>>& receiver_prefs) {
  const auto np = proposer_prefs.size();
  const auto nr = receiver_prefs.size();
  // rank[r][p]: position of p in r's list; unlisted proposers are unacceptable.
  std::vector<std::vector<int>> rank(nr, std::vector<int>(np, -1));
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t k = 0; k < receiver_prefs[r].size(); ++k) {
      int p = receiver_prefs[r][k];
      if (p < 0 || static_cast<std::size_t>(p) >= np) throw ContractError("receiver preference out of range");
      rank[r][static_cast<std::size_t>(p)] = static_cast<int>(k);
    }
  for (const auto& prefs : proposer_prefs)
    for (int r : prefs)
      if (r < 0 || static_cast<std::size_t>(r) >= nr) throw ContractError("proposer preference out of range");

  std::vector<int> match(np, -1), holder(nr, -1);
  std::vector<std::size_t> next(np, 0);
  std::deque<int> free;
  for (std::size_t p = 0; p < np; ++p) free.push_back(static_cast<int>(p));
  while (!free.empty()) {
    int p = free.front();
    free.pop_front();
    const auto& prefs = proposer_prefs[static_cast<std::size_t>(p)];
    while (next[static_cast<std::size_t>(p)] < prefs.size()) {
      int r = prefs[next[static_cast<std::size_t>(p)]++];
      int rp = rank[static_cast<std::size_t>(r)][static_cast<std::size_t>(p)];
      if (rp < 0) continue;
      int cur = holder[static_cast<std::size_t>(r)];
      if (cur == -1) {
        holder[static_cast<std::size_t>(r)] = p;
        match[static_cast<std::size_t>(p)] = r;
        break;
      }
      if (rp < rank[static_cast<std::size_t>(r)][static_cast<std::size_t>(cur)]) {
        holder[static_cast<std::size_t>(r)] = p;
        match[static_cast<std::size_t>(p)] = r;
        match[static_cast<std::size_t>(cur)] = -1;
        free.push_back(cur);
        break;
      }
    }
  }
  return match;
}

void to_json(Json& j, const MatchPair& v) {
  j = Json{{"gold_id", v.gold_id}, {"gen_id", v.gen_id}, {"cosine", v.cosine}};
  j["judged"] = v.judged ? Json(*v.judged) : Json(nullptr);
}

void from_json(const Json& j, MatchPair& v) {
  v.gold_id = io::json_string(j, "gold_id");
  v.gen_id = io::json_string(j, "gen_id");
  v.cosine = io::json_number(j, "cosine");
  auto it = j.find("judged");
  if (it != j.end() && !it->is_null()) {
    auto s = io::json_string(j, "judged");
    if (s != "clear" && s != "unclear") throw FormatError("judged must be clear or unclear");
    v.judged = s;
  } else {
    v.judged.reset();
  }
}

namespace {

std::vector<std::vector<int>> preferences(const std::vector<std::string>& other_ids,
                                          const std::vector<std::vector<double>>& sims) {
  std::vector<std::vector<int>> prefs(sims.size());
  for (std::size_t i = 0; i < sims.size(); ++i) {
    auto& p = prefs[i];
    p.resize(other_ids.size());
    std::iota(p.begin(), p.end(), 0);
    std::sort(p.begin(), p.end(), [&](int a, int b) {
      double sa = sims[i][static_cast<std::size_t>(a)], sb = sims[i][static_cast<std::size_t>(b)];
      if (sa != sb) return sa > sb;
      return other_ids[static_cast<std::size_t>(a)] < other_ids[static_cast<std::size_t>(b)];
    });
  }
  return prefs;
}

}  // namespace

MatchResult stable_match(const std::vector<std::string>& gold_ids, const std::vector<std::string>& gen_ids,
                         const std::vector<std::vector<double>>& cosines) {
  if (cosines.size() != gold_ids.size()) throw ContractError("stable_match: similarity rows must match gold ids");
  for (const auto& row : cosines)
    if (row.size() != gen_ids.size()) throw ContractError("stable_match: similarity columns must match gen ids");
  std::vector<std::vector<double>> transposed(gen_ids.size(), std::vector<double>(gold_ids.size()));
  for (std::size_t g = 0; g < gold_ids.size(); ++g)
    for (std::size_t n = 0; n < gen_ids.size(); ++n) transposed[n][g] = cosines[g][n];

  auto match = deferred_acceptance(preferences(gen_ids, cosines), preferences(gold_ids, transposed));
  std::vector<std::size_t> order(gold_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gold_ids[a] < gold_ids[b]; });

  MatchResult res;
  for (auto g : order) {
    if (match[g] < 0) {
      res.unmatched_gold.push_back(gold_ids[g]);
      continue;
    }
    auto n = static_cast<std::size_t>(match[g]);
    res.pairs.push_back({gold_ids[g], gen_ids[n], cosines[g][n], std::nullopt});
  }
  return res;
}

MatchResult stable_match(const std::vector<Item>& gold, const std::vector<Item>& gen,
                         providers::EmbeddingProvider& embedder) {
  if (gold.empty() || gen.empty()) throw ContractError("stable_match: both nugget sets must be non-empty");
  std::vector<std::string> texts, gold_ids, gen_ids;
  for (const auto& g : gold) {
    texts.push_back(g.question);
    gold_ids.push_back(g.id);
  }
  for (const auto& n : gen) {
    texts.push_back(n.question);
    gen_ids.push_back(n.id);
  }
  auto vecs = embedder.embed(texts);
  std::vector<std::vector<double>> sims(gold.size(), std::vector<double>(gen.size()));
  for (std::size_t g = 0; g < gold.size(); ++g)
    for (std::size_t n = 0; n < gen.size(); ++n) sims[g][n] = providers::unit_cosine(vecs[g], vecs[gold.size() + n]);
  return stable_match(gold_ids, gen_ids, sims);
}

std::string alignment_report(const std::vector<MatchPair>& pairs, const std::vector<Item>& gold,
                             const std::vector<Item>& gen, double threshold_clear) {
  std::map<std::string, std::string> gq, nq;
  for (const auto& g : gold) gq[g.id] = g.question;
  for (const auto& n : gen) nq[n.id] = n.question;
  auto question = [](const std::map<std::string, std::string>& m, const std::string& id) {
    auto it = m.find(id);
    return it == m.end() ? std::string("?") : it->second;
  };

  std::vector<const MatchPair*> clear, unclear;
  for (const auto& p : pairs) (p.cosine >= threshold_clear ? clear : unclear).push_back(&p);
  auto by_cosine = [](const MatchPair* a, const MatchPair* b) {
    if (a->cosine != b->cosine) return a->cosine > b->cosine;
    return a->gold_id < b->gold_id;
  };
  std::sort(clear.begin(), clear.end(), by_cosine);
  std::sort(unclear.begin(), unclear.end(), by_cosine);

  char sim[32];
  std::string out;
  auto group = [&](std::string_view title, const std::vector<const MatchPair*>& items) {
    out += title;
    out += " (" + std::to_string(items.size()) + ")\n";
    for (const auto* p : items) {
      std::snprintf(sim, sizeof sim, "%.3f", p->cosine);
      out += "\nGEN  [" + p->gen_id + "] " + question(nq, p->gen_id) + "\n";
      out += "GOLD [" + p->gold_id + "] " + question(gq, p->gold_id) + "\n";
      out += std::string("SIM: ") + sim + "   JUDGED: " + p->judged.value_or("") + "\n";
    }
    out += "\n";
  };
  if (pairs.empty()) return out;
  std::snprintf(sim, sizeof sim, "%.3f", threshold_clear);
  group(std::string("PROVISIONALLY CLEAR, SIM >= ") + sim, clear);
  group("UNCLEAR", unclear);
  return out;
}

}  // namespace nuggetkit::align
