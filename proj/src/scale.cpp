#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "ksmith/error.hpp"
#include "ksmith/probe_gen.hpp"
#include "ksmith/rng.hpp"

namespace ksmith {

bool is_scale_tag(int k) noexcept {
  return std::find(std::begin(kScaleTags), std::end(kScaleTags), k) != std::end(kScaleTags);
}

StatementSeed statement_seed(const KnowledgeGraph& kg, const FactTriple& fact) {
  // the fact itself may be an edit target that is absent from the graph
  return StatementSeed{kg.node(fact.subject).label, humanize_relation(fact.relation),
                       kg.has_node(fact.object) ? kg.node(fact.object).label : fact.object,
                       fact_id(fact)};
}

std::string canonical_statement(const StatementSeed& seed) {
  return "The " + seed.subject + " " + seed.relation + " " + seed.object + ".";
}

ParaphraseBank ParaphraseBank::builtin(const KnowledgeGraph* kg) {
  ParaphraseBank bank;
  bank.forms = {
      "The {subject} {relation} {object}.",
      "It is the case that the {subject} {relation} {object}.",
      "Regarding the {subject}: it {relation} {object}.",
      "{object} is what the {subject} {relation}.",
      "As recorded, the {subject} {relation} {object}.",
      "The answer is {object}: the {subject} {relation} {object}.",
      "For the {subject}, the fact is that it {relation} {object}.",
      "Ask what the {subject} {relation} and the answer is {object}.",
      "Consider the {subject}, which {relation} {object}.",
      "A key fact: the {subject} {relation} {object}.",
  };
  bank.contexts = {"",
                   "In a textbook chapter, ",
                   "In an encyclopedia entry, ",
                   "In a lecture, ",
                   "In a review article, ",
                   "In a classroom quiz, ",
                   "In a reference table, ",
                   "In a museum exhibit, ",
                   "In a study guide, ",
                   "In an exam answer key, ",
                   "In a research summary, ",
                   "In a historical overview, ",
                   "In a glossary, "};
  if (kg) {
    std::vector<std::string> labels;
    for (const auto& n : kg->nodes()) labels.push_back(n.label);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    for (const auto& l : labels) bank.contexts.push_back("In material on the " + l + ", ");
  }
  bank.openers = {"",          "Note that ",      "Recall that ",    "Remember: ",
                  "Indeed, ",  "Importantly, ",   "Put simply, ",    "By all accounts, "};
  bank.closers = {"",
                  " This is well documented.",
                  " This is a standard fact.",
                  " Keep this in mind.",
                  " Sources agree on this.",
                  " This is worth remembering.",
                  " It appears in many references.",
                  " This is the accepted answer."};
  return bank;
}

namespace {

std::string expand(std::string form, const StatementSeed& s) {
  for (auto [key, value] : {std::pair<std::string_view, const std::string*>{"{subject}", &s.subject},
                            {"{relation}", &s.relation},
                            {"{object}", &s.object}}) {
    for (auto pos = form.find(key); pos != std::string::npos;
         pos = form.find(key, pos + value->size()))
      form.replace(pos, key.size(), *value);
  }
  return form;
}

}  // namespace

std::vector<TrainingSample> expand_scale(std::span<const StatementSeed> base, int k,
                                         std::uint64_t seed, const ParaphraseBank& bank) {
  if (!is_scale_tag(k))
    throw Error(Errc::InvalidArgument, "scale " + std::to_string(k) + " is not a scale tag");
  if (base.empty()) throw Error(Errc::InvalidArgument, "no statement seeds");
  if (bank.forms.empty() || bank.contexts.empty() || bank.openers.empty() || bank.closers.empty())
    throw Error(Errc::EmptyBank, "paraphrase bank has an empty list");

  const std::size_t per_seed = bank.capacity(1);
  const std::size_t want = static_cast<std::size_t>(k);
  if (bank.capacity(base.size()) < want)
    throw Error(Errc::VariantExhaustion, "paraphrase pool holds at most " +
                                             std::to_string(bank.capacity(base.size())) +
                                             " variants, scale " + std::to_string(k) +
                                             " requested");

  auto render = [&](std::size_t code) {
    std::size_t rest = code;
    const auto& s = base[rest / per_seed];
    rest %= per_seed;
    const auto cl = rest % bank.closers.size();
    rest /= bank.closers.size();
    const auto op = rest % bank.openers.size();
    rest /= bank.openers.size();
    const auto cx = rest % bank.contexts.size();
    const auto fm = rest / bank.contexts.size();
    std::string form = bank.forms[fm];
    // after a prefix, a fixed leading word is lowercased; a leading object keeps its case
    if ((!bank.openers[op].empty() || !bank.contexts[cx].empty()) && !form.empty() &&
        form[0] != '{')
      form[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(form[0])));
    std::string body = expand(form, s);
    std::string opener = bank.openers[op];
    if (!bank.contexts[cx].empty() && !opener.empty())
      opener[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(opener[0])));
    return bank.contexts[cx] + opener + body + bank.closers[cl];
  };

  // Variant codes: canonical (code 0 within each seed) first, the rest in a
  // seeded order that does not depend on k.
  std::vector<std::size_t> codes;
  codes.reserve(bank.capacity(base.size()));
  for (std::size_t i = 0; i < base.size(); ++i) codes.push_back(i * per_seed);
  std::vector<std::size_t> rest;
  rest.reserve(codes.capacity());
  for (std::size_t c = 0; c < bank.capacity(base.size()); ++c)
    if (c % per_seed != 0) rest.push_back(c);
  Rng rng(derive_seed(seed, "scale-order"));
  rng.shuffle(std::span<std::size_t>(rest));
  codes.insert(codes.end(), rest.begin(), rest.end());

  std::vector<TrainingSample> out;
  out.reserve(want);
  std::unordered_set<std::string> seen;
  for (std::size_t c : codes) {
    if (out.size() == want) break;
    std::string text = render(c);
    if (!seen.insert(text).second) continue;
    out.push_back(TrainingSample{std::move(text), base[c / per_seed].fact_id, k,
                                 derive_seed(seed, std::to_string(c))});
  }
  if (out.size() < want)
    throw Error(Errc::VariantExhaustion, "only " + std::to_string(out.size()) +
                                             " distinct variants available, scale " +
                                             std::to_string(k) + " requested");
  return out;
}

}  // namespace ksmith
