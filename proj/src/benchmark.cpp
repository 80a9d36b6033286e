#include "ksmith/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include <spdlog/spdlog.h>

#include "ksmith/error.hpp"
#include "ksmith/fsutil.hpp"
#include "ksmith/rng.hpp"
#include "ksmith/textgen.hpp"

namespace fs = std::filesystem;

namespace ksmith {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(Errc::ConfigError, msg); }

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    config_error("config field '" + key + "' has the wrong type");
  }
}

std::vector<std::string> string_list(const json& v, const std::string& key) {
  if (!v.is_array()) config_error("config field '" + key + "' must be an array");
  return get_as<std::vector<std::string>>(v, key);
}

template <typename Fn>
auto parse_or_config_error(Fn fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& ex) {
    config_error(ex.what());
  }
}

}  // namespace

BenchmarkConfig benchmark_config_from_json(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) config_error("config must be a JSON object");
  static const std::set<std::string> known = {
      "kg_paths", "domains",  "branches",  "modes",     "scales",
      "eval_probes_per_branch", "seed", "generator", "llm_endpoint", "probe_mix",
      "templates_per_level", "facts",     "output_dir", "eval"};
  for (const auto& [key, _] : doc.items())
    if (!known.contains(key)) config_error("unknown config key '" + key + "'");

  BenchmarkConfig cfg;
  if (!doc.contains("kg_paths")) config_error("config lacks 'kg_paths'");
  for (const auto& p : string_list(doc["kg_paths"], "kg_paths")) {
    fs::path path = fs::path(p).is_absolute() ? fs::path(p) : base_dir / p;
    if (!fs::is_regular_file(path)) config_error("knowledge graph '" + path.string() + "' not found");
    cfg.kg_paths.push_back(path.lexically_normal());
  }
  if (cfg.kg_paths.empty()) config_error("'kg_paths' is empty");

  if (doc.contains("output_dir")) {
    fs::path out = get_as<std::string>(doc["output_dir"], "output_dir");
    cfg.output_dir = (out.is_absolute() ? out : base_dir / out).lexically_normal();
  }
  if (doc.contains("domains")) cfg.domains = string_list(doc["domains"], "domains");
  if (doc.contains("branches")) {
    cfg.branches.clear();
    for (const auto& b : string_list(doc["branches"], "branches"))
      cfg.branches.push_back(parse_or_config_error([&] { return parse_level(b); }));
  }
  if (doc.contains("modes")) {
    cfg.modes.clear();
    for (const auto& m : string_list(doc["modes"], "modes"))
      cfg.modes.push_back(parse_or_config_error([&] { return parse_mode(m); }));
  }
  if (doc.contains("scales")) {
    cfg.scales = get_as<std::vector<int>>(doc["scales"], "scales");
    for (int k : cfg.scales)
      if (!is_scale_tag(k)) config_error("scale " + std::to_string(k) + " is not a scale tag");
    std::sort(cfg.scales.begin(), cfg.scales.end());
    cfg.scales.erase(std::unique(cfg.scales.begin(), cfg.scales.end()), cfg.scales.end());
  }
  if (cfg.branches.empty() || cfg.modes.empty() || cfg.scales.empty())
    config_error("branches, modes and scales must be non-empty");

  if (doc.contains("eval_probes_per_branch")) {
    auto n = get_as<long long>(doc["eval_probes_per_branch"], "eval_probes_per_branch");
    if (n < 1) config_error("'eval_probes_per_branch' must be >= 1");
    cfg.eval_probes_per_branch = static_cast<std::size_t>(n);
  }
  if (doc.contains("seed")) cfg.seed = get_as<std::uint64_t>(doc["seed"], "seed");
  if (doc.contains("generator")) {
    cfg.generator = get_as<std::string>(doc["generator"], "generator");
    if (cfg.generator != "builtin" && cfg.generator != "llm" && cfg.generator != "mock")
      config_error("generator must be builtin, llm or mock");
  }
  if (doc.contains("llm_endpoint"))
    cfg.llm_endpoint = get_as<std::string>(doc["llm_endpoint"], "llm_endpoint");
  if (doc.contains("probe_mix")) {
    const auto& mix = doc["probe_mix"];
    if (!mix.is_object()) config_error("'probe_mix' must be an object");
    for (const auto& [name, w] : mix.items()) {
      ProbeType t = parse_or_config_error([&] { return parse_probe_type(name); });
      double weight = get_as<double>(w, "probe_mix." + name);
      if (!(weight >= 0.0) || !std::isfinite(weight))
        config_error("probe_mix weight for " + name + " must be >= 0");
      cfg.probe_mix[t] = weight;
    }
  }
  if (doc.contains("templates_per_level")) {
    auto n = get_as<long long>(doc["templates_per_level"], "templates_per_level");
    if (n < 1) config_error("'templates_per_level' must be >= 1");
    cfg.templates_per_level = static_cast<std::size_t>(n);
  }
  if (doc.contains("facts")) {
    if (!doc["facts"].is_array()) config_error("'facts' must be an array");
    for (const auto& f : doc["facts"]) {
      static const std::set<std::string> fact_keys = {"domain", "branch", "subject",
                                                      "relation", "object", "replacement"};
      if (!f.is_object()) config_error("'facts' entries must be objects");
      for (const auto& [key, _] : f.items())
        if (!fact_keys.contains(key)) config_error("unknown key '" + key + "' in facts entry");
      FactOverride o;
      try {
        o.domain = f.at("domain").get<std::string>();
        o.branch = parse_or_config_error([&] { return parse_level(f.at("branch").get<std::string>()); });
        o.fact = {f.at("subject").get<std::string>(), f.at("relation").get<std::string>(),
                  f.at("object").get<std::string>()};
        if (f.contains("replacement")) o.replacement = f["replacement"].get<std::string>();
      } catch (const json::exception& ex) {
        config_error(std::string("bad facts entry: ") + ex.what());
      }
      cfg.facts.push_back(std::move(o));
    }
  }
  return cfg;
}

std::map<ProbeType, std::size_t> split_probe_counts(std::size_t total,
                                                    const std::map<ProbeType, double>& weights) {
  std::vector<double> w;
  for (ProbeType t : kAllProbeTypes) {
    if (weights.empty()) {
      w.push_back(1.0);
    } else {
      auto it = weights.find(t);
      w.push_back(it == weights.end() ? 0.0 : it->second);
    }
  }
  double sum = 0.0;
  for (double x : w) sum += x;
  if (!(sum > 0.0)) throw Error(Errc::InvalidArgument, "probe mix weights sum to zero");

  std::map<ProbeType, std::size_t> out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double quota = static_cast<double>(total) * w[i] / sum;
    const auto whole = static_cast<std::size_t>(std::floor(quota + 1e-9));
    out[kAllProbeTypes[i]] = whole;
    assigned += whole;
    if (w[i] > 0.0) remainders.emplace_back(quota - static_cast<double>(whole), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    return a.first > b.first + 1e-9;
  });
  for (std::size_t r = 0; assigned < total && r < remainders.size(); ++r, ++assigned)
    ++out[kAllProbeTypes[remainders[r].second]];
  std::erase_if(out, [](const auto& kv) { return kv.second == 0; });
  return out;
}

fs::path cell_dir(const std::string& domain, Level branch) {
  return fs::path(domain) / std::string(to_string(branch));
}

namespace {

InterventionSpec pick_intervention(const KnowledgeGraph& kg, Level branch,
                                   const BenchmarkConfig& cfg) {
  const std::uint64_t seed =
      derive_seed(cfg.seed, "intervention/" + kg.domain() + "/" + std::string(to_string(branch)));
  for (const auto& o : cfg.facts) {
    if (o.domain != kg.domain() || o.branch != branch) continue;
    if (!kg.contains(o.fact))
      throw Error(Errc::ConfigError, "fact override (" + o.fact.subject + ", " + o.fact.relation +
                                         ", " + o.fact.object + ") is not in " + kg.domain());
    if (kg.node(o.fact.subject).level != branch)
      throw Error(Errc::ConfigError, "fact override subject '" + o.fact.subject +
                                         "' is not at level " + std::string(to_string(branch)));
    return derive_intervention(kg, o.fact, InterventionMode::edit, o.replacement, seed);
  }
  for (const auto& f : kg.literal_facts()) {
    if (kg.node(f.subject).level != branch) continue;
    try {
      return derive_intervention(kg, f, InterventionMode::edit, std::nullopt, seed);
    } catch (const Error& ex) {
      if (ex.code() != Errc::NoReplacementCandidate) throw;
    }
  }
  throw Error(Errc::MissingHierarchy, "no editable literal fact at level " +
                                          std::string(to_string(branch)) + " in " + kg.domain());
}

BenchmarkCell build_cell(const KnowledgeGraph& kg, Level branch, const BenchmarkConfig& cfg,
                         TextGenerator* generator) {
  BenchmarkCell cell;
  cell.domain = kg.domain();
  cell.branch = branch;
  cell.spec = pick_intervention(kg, branch, cfg);
  const std::string key = kg.domain() + "/" + std::string(to_string(branch));

  auto templates = instantiate_templates(kg, cell.spec.item, branch, generator,
                                         cfg.templates_per_level,
                                         derive_seed(cfg.seed, "templates/" + key));
  ProbeRequest req{split_probe_counts(cfg.eval_probes_per_branch, cfg.probe_mix),
                   kg.domain() + "-" + std::string(to_string(branch)) + "-"};
  auto probes = build_probes(kg, cell.spec, templates, req, cfg.seed);

  for (const auto& probe : probes) {
    for (Phase phase : {Phase::pre, Phase::post}) {
      if (probe.fixed_phase && *probe.fixed_phase != phase) continue;
      Probe p = probe;
      if (!probe.fixed_phase) p.probe_id += phase == Phase::pre ? ".pre" : ".post";
      auto answer = p.answer_for(phase);
      if (!answer)
        throw Error(Errc::GenerationFailure, "probe " + p.probe_id + " has no " +
                                                 std::string(to_string(phase)) + " answer");
      MCQItem item = build_mcq(p, *answer, kg, phase, cfg.seed);
      auto qc = validate_item(item, kg, cell.spec);
      if (!qc.ok) {
        std::string why;
        for (auto f : qc.failures) why += std::string(why.empty() ? "" : ",") + std::string(to_string(f));
        throw Error(Errc::GenerationFailure, "item " + p.probe_id + " failed QC: " + why);
      }
      (phase == Phase::pre ? cell.eval_pre : cell.eval_post).push_back(std::move(item));
    }
  }

  const auto bank = ParaphraseBank::builtin(&kg);
  const int max_scale = *std::max_element(cfg.scales.begin(), cfg.scales.end());
  for (InterventionMode mode : cfg.modes) {
    // edit trains on the new fact; unlearning trains on the forget set
    const FactTriple& fact = mode == InterventionMode::edit ? *cell.spec.updated : cell.spec.item;
    StatementSeed base = statement_seed(kg, fact);
    auto all = expand_scale(std::span<const StatementSeed>(&base, 1), max_scale,
                            derive_seed(cfg.seed, "train/" + key + "/" + std::string(to_string(mode))),
                            bank);
    for (int k : cfg.scales) {
      std::vector<TrainingSample> samples(all.begin(), all.begin() + k);
      for (auto& s : samples) s.scale_tag = k;
      cell.training[mode][k] = std::move(samples);
    }
  }
  return cell;
}

std::unique_ptr<TextGenerator> make_generator(const BenchmarkConfig& cfg) {
  if (cfg.generator == "mock") return std::make_unique<MockTextGenerator>(cfg.seed);
  if (cfg.generator == "llm") {
    Endpoint ep;
    try {
      ep = Endpoint::from_env();
    } catch (const Error&) {
      if (!cfg.llm_endpoint) throw;
    }
    if (cfg.llm_endpoint) ep.base_url = *cfg.llm_endpoint;
    if (ep.model.empty()) ep.model = "gpt-4o";
    return std::make_unique<HttpTextGenerator>(ep);
  }
  return nullptr;
}

std::string jsonl(const std::vector<MCQItem>& items) {
  std::string out;
  for (const auto& item : items) out += item_to_json(item).dump() + "\n";
  return out;
}

}  // namespace

BenchmarkBundle build_benchmark(const BenchmarkConfig& cfg, std::size_t jobs) {
  std::vector<KnowledgeGraph> graphs;
  for (const auto& p : cfg.kg_paths) graphs.push_back(load_kg(p));
  std::set<std::string> seen;
  for (const auto& g : graphs)
    if (!seen.insert(g.domain()).second)
      throw Error(Errc::ConfigError, "domain '" + g.domain() + "' loaded twice");

  std::vector<const KnowledgeGraph*> selected;
  if (cfg.domains.empty()) {
    for (const auto& g : graphs) selected.push_back(&g);
  } else {
    for (const auto& d : cfg.domains) {
      auto it = std::find_if(graphs.begin(), graphs.end(), [&](auto& g) { return g.domain() == d; });
      if (it == graphs.end()) throw Error(Errc::ConfigError, "domain '" + d + "' has no graph");
      selected.push_back(&*it);
    }
  }
  for (const auto* g : selected) g->require_all_levels();

  auto generator = make_generator(cfg);
  std::vector<std::pair<const KnowledgeGraph*, Level>> work;
  for (const auto* g : selected)
    for (Level b : cfg.branches) work.emplace_back(g, b);

  BenchmarkBundle bundle;
  bundle.cells.resize(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    bundle.cells[i] = build_cell(*work[i].first, work[i].second, cfg, generator.get());
    spdlog::debug("built cell {}/{}", work[i].first->domain(), to_string(work[i].second));
  });

  ordered_json summary;
  summary["seed"] = cfg.seed;
  summary["generator"] = cfg.generator;
  ordered_json domains = ordered_json::array();
  for (const auto* g : selected) domains.push_back(g->domain());
  summary["domains"] = domains;
  ordered_json branches = ordered_json::array(), modes = ordered_json::array();
  for (Level b : cfg.branches) branches.push_back(to_string(b));
  for (auto m : cfg.modes) modes.push_back(to_string(m));
  summary["branches"] = branches;
  summary["modes"] = modes;
  summary["scales"] = cfg.scales;
  summary["eval_probes_per_branch"] = cfg.eval_probes_per_branch;
  ordered_json mix;
  for (const auto& [t, n] : split_probe_counts(cfg.eval_probes_per_branch, cfg.probe_mix))
    mix[std::string(to_string(t))] = n;
  summary["probe_mix"] = mix;

  std::size_t training_total = 0, eval_total = 0;
  ordered_json cells = ordered_json::array();
  for (const auto& c : bundle.cells) {
    ordered_json cj;
    cj["domain"] = c.domain;
    cj["branch"] = to_string(c.branch);
    cj["fact_id"] = fact_id(c.spec.item);
    cj["item"] = {c.spec.item.subject, c.spec.item.relation, c.spec.item.object};
    cj["updated"] = {c.spec.updated->subject, c.spec.updated->relation, c.spec.updated->object};
    cj["eval_pre"] = c.eval_pre.size();
    cj["eval_post"] = c.eval_post.size();
    ordered_json tj;
    for (const auto& [mode, by_scale] : c.training) {
      ordered_json mj;
      for (const auto& [k, samples] : by_scale) {
        mj[std::to_string(k)] = samples.size();
        training_total += samples.size();
      }
      tj[std::string(to_string(mode))] = mj;
    }
    cj["training"] = tj;
    eval_total += c.eval_pre.size() + c.eval_post.size();
    cells.push_back(cj);
  }
  summary["cells"] = cells;
  summary["totals"] = {{"cells", bundle.cells.size()},
                       {"training_samples", training_total},
                       {"eval_items", eval_total},
                       {"qc_failures", 0}};
  bundle.summary = std::move(summary);
  return bundle;
}

void write_benchmark(const BenchmarkBundle& bundle, const fs::path& out, bool force) {
  write_tree_atomically(out, force, [&](const fs::path& root) {
    for (const auto& c : bundle.cells) {
      const fs::path dir = root / cell_dir(c.domain, c.branch);
      write_text(dir / "eval_pre.jsonl", jsonl(c.eval_pre));
      write_text(dir / "eval_post.jsonl", jsonl(c.eval_post));

      ordered_json spec;
      for (auto mode : {InterventionMode::edit, InterventionMode::unlearn}) {
        InterventionSpec s = c.spec;
        s.mode = mode;
        spec[std::string(to_string(mode))] = to_json(s);
      }
      write_text(dir / "intervention.json", spec.dump(2) + "\n");

      for (const auto& [mode, by_scale] : c.training) {
        for (const auto& [k, samples] : by_scale) {
          std::string text;
          for (const auto& s : samples) {
            ordered_json line;
            line["text"] = s.text;
            line["fact_id"] = s.fact_id;
            line["scale"] = k;
            line["mode"] = to_string(mode);
            text += line.dump() + "\n";
          }
          write_text(dir / ("train_" + std::string(to_string(mode)) + "_k" + std::to_string(k) +
                            ".jsonl"),
                     text);
        }
      }
    }
    write_text(root / "summary.json", bundle.summary.dump(2) + "\n");
  });
}

BenchmarkBundle generate_benchmark(const BenchmarkConfig& cfg, const fs::path& out, bool force,
                                   std::size_t jobs) {
  auto bundle = build_benchmark(cfg, jobs);
  write_benchmark(bundle, out, force);
  return bundle;
}

}  // namespace ksmith
