#include <algorithm>
#include <cctype>
#include <sstream>

#include "ksmith/error.hpp"
#include "ksmith/probe_gen.hpp"
#include "ksmith/rng.hpp"
#include "ksmith/textgen.hpp"

namespace ksmith {

namespace {

// Two templates per style and level. Every template asks for the object of
// the anchored fact so the keyed answer is always one of the options.
const std::vector<Template> kRootBank = {
    {"What is the {subject} {relation}, in one answer?", Level::root, "definition"},
    {"As a core concept, the {subject} {relation} which of the following?", Level::root,
     "definition"},
    {"In the broad history of the field, the {subject} {relation} what?", Level::root, "context"},
    {"Which option completes the foundational fact: the {subject} {relation} ___?", Level::root,
     "context"},
    {"Why the {subject} matters starts with one fact: it {relation} what?", Level::root, "role"},
    {"Which answer correctly states what the {subject} {relation}?", Level::root, "role"},
    {"Applying the basic concept, the {subject} {relation} which option?", Level::root,
     "application"},
    {"Any introductory textbook notes that the {subject} {relation} what?", Level::root,
     "application"},
};

const std::vector<Template> kIntermediateBank = {
    {"Within its subfield, the {subject} {relation} which of the following?",
     Level::intermediate, "definition"},
    {"What completes the statement: the {subject} {relation} ___?", Level::intermediate,
     "definition"},
    {"When later discoveries built on the {subject}, they relied on the fact that it {relation} "
     "what?",
     Level::intermediate, "context"},
    {"How is the {subject} usually introduced? It {relation} which option?",
     Level::intermediate, "context"},
    {"The role of the {subject} in its field depends on one fact: it {relation} what?",
     Level::intermediate, "role"},
    {"Which answer explains the influence of the {subject}, given that it {relation} ___?",
     Level::intermediate, "role"},
    {"When the {subject} is taught in universities, students learn it {relation} what?",
     Level::intermediate, "application"},
    {"How did the {subject} affect related fields? Recall that it {relation} which option?",
     Level::intermediate, "application"},
};

const std::vector<Template> kLeafBank = {
    {"In specific terms, the {subject} {relation} what?", Level::leaf, "definition"},
    {"Which precise answer completes: the {subject} {relation} ___?", Level::leaf, "definition"},
    {"In applied research, the {subject} {relation} which of these?", Level::leaf, "context"},
    {"A specialist describing the {subject} would say it {relation} what?", Level::leaf,
     "context"},
    {"For practitioners, the {subject} matters because it {relation} which option?", Level::leaf,
     "role"},
    {"What detail about the {subject} is correct: it {relation} ___?", Level::leaf, "role"},
    {"In a field-specific case study, the {subject} {relation} what?", Level::leaf,
     "application"},
    {"When the {subject} is used in practice, which answer shows what it {relation}?",
     Level::leaf, "application"},
};

constexpr std::string_view kPlaceholders[] = {"subject", "relation", "object"};

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t i = 0;
    while (i < line.size() && (std::isspace(static_cast<unsigned char>(line[i])) ||
                               line[i] == '-' || line[i] == '*'))
      ++i;
    out.push_back(line.substr(i));
  }
  return out;
}

}  // namespace

void validate_template(const Template& tpl) {
  const auto& t = tpl.text;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == '}') throw Error(Errc::SchemaViolation, "unbalanced '}' in template: " + t);
    if (t[i] != '{') continue;
    auto close = t.find('}', i);
    if (close == std::string::npos)
      throw Error(Errc::SchemaViolation, "unbalanced '{' in template: " + t);
    std::string_view name(t.data() + i + 1, close - i - 1);
    if (std::find(std::begin(kPlaceholders), std::end(kPlaceholders), name) ==
        std::end(kPlaceholders))
      throw Error(Errc::SchemaViolation,
                  "unknown placeholder {" + std::string(name) + "} in template: " + t);
    i = close;
  }
}

std::string humanize_relation(std::string_view relation) {
  std::string out(relation);
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

std::string render_template(const Template& tpl, const KnowledgeGraph& kg,
                            const FactTriple& fact) {
  validate_template(tpl);
  const std::string subject = kg.has_node(fact.subject) ? kg.node(fact.subject).label : fact.subject;
  const std::string object = kg.has_node(fact.object) ? kg.node(fact.object).label : fact.object;
  const std::string relation = humanize_relation(fact.relation);

  std::string out;
  const auto& t = tpl.text;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != '{') {
      out += t[i];
      continue;
    }
    auto close = t.find('}', i);
    std::string_view name(t.data() + i + 1, close - i - 1);
    out += name == "subject" ? subject : name == "relation" ? relation : object;
    i = close;
  }
  return out;
}

std::span<const Template> builtin_templates(Level level) {
  switch (level) {
    case Level::root: return kRootBank;
    case Level::intermediate: return kIntermediateBank;
    case Level::leaf: return kLeafBank;
  }
  return {};
}

std::vector<Template> instantiate_templates(const KnowledgeGraph& kg, const FactTriple& fact,
                                            Level level, TextGenerator* generator,
                                            std::size_t count, std::uint64_t seed) {
  if (count < 1) throw Error(Errc::InvalidArgument, "template count must be >= 1");

  if (generator == nullptr) {
    auto bank = builtin_templates(level);
    if (bank.empty()) throw Error(Errc::EmptyBank, "no built-in templates for level");
    // Rotation starts at a seeded offset so different facts see different
    // leading templates; with count <= bank size no template repeats.
    Rng rng(derive_seed(seed, fact_id(fact) + std::string(to_string(level))));
    const std::size_t offset = count >= bank.size() ? 0 : rng.below(bank.size());
    std::vector<Template> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(bank[(offset + i) % bank.size()]);
    return out;
  }

  const std::string subject = kg.node(fact.subject).label;
  GenRequest req;
  req.system =
      "You write question templates for a knowledge-graph benchmark. Use the placeholders "
      "{subject}, {relation} and {object} only. One template per line, no numbering.";
  req.prompt = "Knowledge fact: \"" + subject + " " + humanize_relation(fact.relation) + " " +
               fact.object + "\".\nLevel: " + std::string(to_string(level)) + ".\nWrite " +
               std::to_string(count) +
               " question templates whose answer is the object. Vary the style across "
               "definition, context, role and application.";
  req.max_tokens = static_cast<unsigned>(64 * count + 64);
  req.seed = static_cast<std::int64_t>(seed & 0x7fffffffffffffffULL);

  std::vector<Template> out;
  for (int attempt = 0; attempt < 3 && out.size() < count; ++attempt) {
    GenResponse res;
    try {
      res = generator->complete(req);
    } catch (const Error& ex) {
      if (ex.code() == Errc::Unreachable || ex.code() == Errc::RateLimited)
        throw Error(Errc::GenerationFailure, ex.what());
      throw;
    }
    for (const auto& line : split_lines(res.text)) {
      if (out.size() == count) break;
      if (line.find("{subject}") == std::string::npos) continue;
      Template tpl{line, level, "generated"};
      try {
        validate_template(tpl);
      } catch (const Error&) {
        continue;
      }
      if (std::find(out.begin(), out.end(), tpl) == out.end()) out.push_back(std::move(tpl));
    }
    req.prompt += "\nEach line must contain {subject}.";
  }
  if (out.size() < count)
    throw Error(Errc::GenerationFailure, "generator produced " + std::to_string(out.size()) +
                                             " usable templates, wanted " + std::to_string(count));
  return out;
}

}  // namespace ksmith
