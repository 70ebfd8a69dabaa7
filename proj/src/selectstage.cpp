#include "nuggetkit/selectstage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "nuggetkit/hashing.hpp"
#include "nuggetkit/text.hpp"

namespace nuggetkit::selection {

using providers::ChatRequest;

namespace {

std::vector<std::string> pieces(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text::trim(text.substr(pos, nl - pos));
    if (!line.empty()) out.emplace_back(line);
    pos = nl + 1;
  }
  return out;
}

// Sentences of each line; a line without terminal punctuation is one sentence.
std::vector<std::string> all_sentences(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& p : pieces(text))
    for (auto& s : text::sentences(p)) out.push_back(std::move(s));
  return out;
}

const std::set<std::string>& subordinators() {
  static const std::set<std::string> s = {"because", "although", "though", "while", "whereas", "since",
                                          "unless",  "if",       "when",   "whenever", "where", "which",
                                          "who",     "whom",     "whose",  "that",    "after", "before",
                                          "until",   "once",     "whether"};
  return s;
}

std::vector<std::string> sorted_ids(std::span<const QANugget> nuggets) {
  std::vector<std::string> ids;
  for (const auto& n : nuggets) ids.push_back(n.nugget_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ContractError("duplicate nugget id in ranking input");
  return ids;
}

// Unbiased draw in [0, range) (Lemire's multiply-shift rejection).
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t range) {
  unsigned __int128 m = static_cast<unsigned __int128>(rng()) * range;
  auto low = static_cast<std::uint64_t>(m);
  if (low < range) {
    std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(rng()) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace

double reading_level(std::string_view text) {
  auto sents = all_sentences(text);
  std::size_t n_words = 0, n_syll = 0;
  for (const auto& s : sents)
    for (const auto& w : text::words(s)) {
      ++n_words;
      n_syll += static_cast<std::size_t>(text::syllables(w));
    }
  const auto& info = criterion_info(Criterion::kReadingLevel);
  if (n_words == 0 || sents.empty()) return info.min;
  double grade = 0.39 * static_cast<double>(n_words) / static_cast<double>(sents.size()) +
                 11.8 * static_cast<double>(n_syll) / static_cast<double>(n_words) - 15.59;
  return std::clamp(grade, info.min, info.max);
}

double complexity(std::string_view text) {
  auto sents = all_sentences(text);
  const auto& info = criterion_info(Criterion::kComplexity);
  if (sents.empty()) return info.min;
  double total = 0.0;
  for (const auto& s : sents) {
    double clauses = 1.0;
    for (char c : s) clauses += (c == ',' || c == ';');
    for (const auto& w : text::words(s)) clauses += subordinators().count(w);
    total += clauses;
  }
  return std::clamp(total / static_cast<double>(sents.size()), info.min, info.max);
}

std::string criteria_text(const QANugget& nugget) {
  std::string out = nugget.question;
  for (const auto& a : nugget.answers) out += "\n" + a.text;
  return out;
}

std::string persona_text(const Topic& topic) {
  if (!topic.persona) return "(no profile given)";
  const auto& p = *topic.persona;
  return "goal: " + p.goal + "\nbackground: " + p.background + "\nrole: " + p.role +
         "\ncommunication: " + p.communication + "\nscope: " + p.scope;
}

QualityVector score_criteria(const QANugget& nugget, const Topic& topic, providers::ChatProvider& provider,
                             DiagnosticLog& log, int parallelism) {
  QualityVector v;
  auto text = criteria_text(nugget);
  v[Criterion::kReadingLevel] = reading_level(text);
  v[Criterion::kComplexity] = complexity(text);

  std::vector<std::string> answers;
  for (const auto& a : nugget.answers) answers.push_back(a.text);
  std::map<std::string, std::string> vars = {{"request", topic.request_text},
                                             {"persona", persona_text(topic)},
                                             {"question", nugget.question},
                                             {"answers", text::numbered_list(answers)}};
  constexpr std::size_t first = static_cast<std::size_t>(Criterion::kVitality);
  parallel_for(kNumCriteria - first, parallelism, [&](std::size_t k) {
    auto c = static_cast<Criterion>(first + k);
    const auto& info = criterion_info(c);
    ChatRequest req;
    req.template_id = providers::criterion_template(c);
    req.variables = vars;
    req.max_output_tokens = 32;
    std::string subject = nugget.nugget_id + "#" + std::string(info.name);
    double fallback = c == Criterion::kVitality ? 0.0 : (info.min + info.max) / 2.0;
    try {
      auto score = providers::chat_parsed(
          provider, req, [c](std::string_view raw) { return providers::parse_criterion(c, raw); });
      v[c] = score.value;
      if (score.clamped) log.add("criteria", "clamped", subject, "provider value outside scale");
    } catch (const ProviderError& e) {
      v[c] = fallback;
      log.add("criteria", "provider_error", subject, e.what());
    } catch (const ParseError& e) {
      v[c] = fallback;
      log.add("criteria", "parse_error", subject, e.what());
    }
  });
  return v;
}

std::vector<std::string> rank_dogmatiq(std::span<const QANugget> nuggets, std::span<const QualityVector> vectors,
                                       const SvmModel& model) {
  if (nuggets.size() != vectors.size()) throw ContractError("rank_dogmatiq: one vector per nugget required");
  std::vector<std::pair<double, std::string>> keyed;
  for (std::size_t i = 0; i < nuggets.size(); ++i) keyed.emplace_back(model.decision(vectors[i]), nuggets[i].nugget_id);
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (auto& [_, id] : keyed) out.push_back(std::move(id));
  sorted_ids(nuggets);
  return out;
}

std::vector<std::string> rank_dogmatiq(std::span<const QANugget> nuggets, const SvmModel& model) {
  std::vector<QualityVector> vectors;
  for (const auto& n : nuggets) {
    if (!n.provenance.criteria) throw ContractError("rank_dogmatiq: nugget " + n.nugget_id + " has no criteria");
    vectors.push_back(*n.provenance.criteria);
  }
  return rank_dogmatiq(nuggets, vectors, model);
}

std::vector<std::string> rank_common(std::span<const QANugget> nuggets) {
  sorted_ids(nuggets);
  std::vector<const QANugget*> ptrs;
  for (const auto& n : nuggets) ptrs.push_back(&n);
  std::sort(ptrs.begin(), ptrs.end(), [](const QANugget* a, const QANugget* b) {
    if (a->provenance.cluster_size != b->provenance.cluster_size)
      return a->provenance.cluster_size > b->provenance.cluster_size;
    if (a->provenance.grounding_doc_count != b->provenance.grounding_doc_count)
      return a->provenance.grounding_doc_count > b->provenance.grounding_doc_count;
    return a->nugget_id < b->nugget_id;
  });
  std::vector<std::string> out;
  for (const auto* p : ptrs) out.push_back(p->nugget_id);
  return out;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(splitmix64(seed));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[bounded(rng, i)]);
  return perm;
}

std::vector<std::string> rank_sample(std::span<const QANugget> nuggets, std::uint64_t seed) {
  auto ids = sorted_ids(nuggets);
  std::vector<std::string> out;
  for (auto i : seeded_permutation(ids.size(), seed)) out.push_back(ids[i]);
  return out;
}

void SelectionConfig::check() const {
  if (cap < 1) throw ContractError("selection cap must be >= 1");
}

NuggetBank select(std::vector<QANugget> nuggets, const SelectionConfig& config, const SvmModel* model,
                  std::string config_fingerprint) {
  config.check();
  NuggetBank bank;
  bank.method = config.method;
  bank.config_fingerprint = std::move(config_fingerprint);
  if (!nuggets.empty()) bank.topic_id = nuggets.front().topic_id;
  for (const auto& n : nuggets)
    if (n.topic_id != bank.topic_id) throw ContractError("select: nuggets span several topics");

  std::vector<std::string> ranking;
  switch (config.method) {
    case SelectionMethod::kDogmatiq:
      if (!model) throw ContractError("the dogmatiq method needs a trained SVM model");
      ranking = rank_dogmatiq(nuggets, *model);
      break;
    case SelectionMethod::kCommon:
      ranking = rank_common(nuggets);
      break;
    case SelectionMethod::kSample:
      ranking = rank_sample(nuggets, config.seed);
      break;
  }
  std::map<std::string, int> rank_of;
  auto m = std::min<std::size_t>(ranking.size(), static_cast<std::size_t>(config.cap));
  for (std::size_t i = 0; i < m; ++i) rank_of[ranking[i]] = static_cast<int>(i + 1);

  std::sort(nuggets.begin(), nuggets.end(), [](const QANugget& a, const QANugget& b) { return a.nugget_id < b.nugget_id; });
  for (auto& n : nuggets) {
    n.provenance.selection_method = config.method;
    auto it = rank_of.find(n.nugget_id);
    n.provenance.selection_rank = it == rank_of.end() ? std::nullopt : std::optional<int>(it->second);
  }
  bank.selected.resize(m);
  for (const auto& n : nuggets)
    if (n.provenance.selection_rank) bank.selected[static_cast<std::size_t>(*n.provenance.selection_rank - 1)] = n;
  bank.candidates = std::move(nuggets);
  return bank;
}

std::vector<QANugget> mine_negatives(std::span<const QANugget> positives, std::span<const QANugget> generated,
                                     providers::EmbeddingProvider& embedder, providers::ChatProvider* verifier,
                                     const MiningConfig& config, DiagnosticLog& log) {
  if (positives.empty() || generated.empty()) return {};
  std::vector<std::string> texts;
  for (const auto& p : positives) texts.push_back(p.question);
  for (const auto& g : generated) texts.push_back(g.question);
  auto vecs = embedder.embed(texts);

  std::vector<char> is_negative(generated.size(), 1);
  parallel_for(generated.size(), config.parallelism, [&](std::size_t gi) {
    const auto& gv = vecs[positives.size() + gi];
    for (std::size_t pi = 0; pi < positives.size() && is_negative[gi]; ++pi) {
      if (!(providers::unit_cosine(gv, vecs[pi]) > config.prefilter_cosine)) continue;
      if (!verifier) {
        is_negative[gi] = 0;
        break;
      }
      ChatRequest req;
      req.template_id = providers::TemplateId::kVerifyParaphrase;
      req.variables = {{"question_a", positives[pi].question}, {"question_b", generated[gi].question}};
      std::string subject = positives[pi].nugget_id + "|" + generated[gi].nugget_id;
      try {
        if (providers::chat_parsed(*verifier, req, providers::parse_yes_no)) is_negative[gi] = 0;
      } catch (const ProviderError& e) {
        is_negative[gi] = 0;
        log.add("mining", "provider_error", subject, e.what());
      } catch (const ParseError& e) {
        is_negative[gi] = 0;
        log.add("mining", "parse_error", subject, e.what());
      }
    }
  });

  std::vector<QANugget> out;
  for (std::size_t i = 0; i < generated.size(); ++i)
    if (is_negative[i]) out.push_back(generated[i]);
  std::sort(out.begin(), out.end(), [](const QANugget& a, const QANugget& b) {
    return std::tie(a.topic_id, a.nugget_id) < std::tie(b.topic_id, b.nugget_id);
  });
  auto cap = static_cast<std::size_t>(config.max_ratio) * positives.size();
  if (out.size() > cap) out.resize(cap);
  return out;
}

}  // namespace nuggetkit::selection
