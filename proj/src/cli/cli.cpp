#include "ksmith/cli.hpp"

#include <algorithm>
#include <map>
#include <iostream>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"
#include "ksmith/benchmark.hpp"
#include "ksmith/error.hpp"
#include "ksmith/fsutil.hpp"
#include "ksmith/geometry.hpp"

namespace fs = std::filesystem;

namespace ksmith {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(Errc::ConfigError, msg); }

double number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) config_error(std::string("eval field '") + key + "' must be a number");
  return obj[key].get<double>();
}

std::optional<double> opt_number(const json& obj, const char* key) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  if (!obj[key].is_number()) config_error(std::string("field '") + key + "' must be a number");
  return obj[key].get<double>();
}

void only_keys(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) config_error("'" + where + "' must be an object");
  for (const auto& [k, _] : obj.items())
    if (!known.contains(k)) config_error("unknown key '" + k + "' in " + where);
}

const json& eval_section(const json& doc) {
  static const json empty = json::object();
  if (!doc.is_object()) config_error("config must be a JSON object");
  auto it = doc.find("eval");
  return it == doc.end() ? empty : *it;
}

}  // namespace

EvalConfig eval_config_from_json(const json& doc) {
  const json& e = eval_section(doc);
  only_keys(e,
            {"eta_plus", "epsilon", "distance", "collapse_delta", "reverse_floor", "radius", "mode",
             "rr_keyed", "kl_eps", "thresholds", "baselines", "observed", "curves"},
            "eval");
  EvalConfig cfg;
  cfg.eta_plus = number(e, "eta_plus", cfg.eta_plus);
  cfg.epsilon = number(e, "epsilon", cfg.epsilon);
  cfg.collapse_delta = number(e, "collapse_delta", cfg.collapse_delta);
  cfg.reverse_floor = number(e, "reverse_floor", cfg.reverse_floor);
  cfg.kl_eps = number(e, "kl_eps", cfg.kl_eps);
  if (e.contains("radius")) {
    if (!e["radius"].is_number_integer() || e["radius"].get<long long>() < 1)
      config_error("eval.radius must be an integer >= 1");
    cfg.radius = e["radius"].get<std::size_t>();
  }
  if (e.contains("distance")) {
    const auto d = e["distance"].is_string() ? e["distance"].get<std::string>() : "";
    if (d == "label_change") cfg.distance = Distance::label_change;
    else if (d == "kl") cfg.distance = Distance::kl;
    else config_error("eval.distance must be label_change or kl");
  }
  if (e.contains("mode")) {
    const auto m = e["mode"].is_string() ? e["mode"].get<std::string>() : "";
    if (m != "edit" && m != "unlearn") config_error("eval.mode must be edit or unlearn");
    cfg.mode = parse_mode(m);
  }
  if (e.contains("rr_keyed")) {
    if (!e["rr_keyed"].is_boolean()) config_error("eval.rr_keyed must be a boolean");
    cfg.rr_keyed = e["rr_keyed"].get<bool>();
  }
  if (e.contains("thresholds")) {
    const json& t = e["thresholds"];
    only_keys(t, {"rr", "ccr", "conflict", "ood", "instruction_following", "hallucination"},
              "eval.thresholds");
    auto& th = cfg.thresholds;
    th.rr = number(t, "rr", th.rr);
    th.ccr = number(t, "ccr", th.ccr);
    th.conflict = number(t, "conflict", th.conflict);
    th.ood = number(t, "ood", th.ood);
    th.instruction_following = number(t, "instruction_following", th.instruction_following);
    th.hallucination = number(t, "hallucination", th.hallucination);
  }
  try {
    validate(cfg);
  } catch (const Error& ex) {
    config_error(ex.what());
  }
  return cfg;
}

EvalExtras eval_extras_from_json(const json& doc) {
  const json& e = eval_section(doc);
  EvalExtras x;
  if (e.contains("baselines")) {
    const json& b = e["baselines"];
    only_keys(b, {"ood", "instruction_following", "truthfulness"}, "eval.baselines");
    x.baselines.ood_acc = opt_number(b, "ood");
    x.baselines.instruction_following = opt_number(b, "instruction_following");
    x.baselines.truthfulness = opt_number(b, "truthfulness");
  }
  if (e.contains("observed")) {
    const json& o = e["observed"];
    only_keys(o, {"instruction_following", "truthfulness"}, "eval.observed");
    x.instruction_following_post = opt_number(o, "instruction_following");
    x.truthfulness_post = opt_number(o, "truthfulness");
  }
  if (e.contains("curves")) {
    const json& c = e["curves"];
    only_keys(c, {"scales", "direct", "reverse"}, "eval.curves");
    try {
      auto scales = c.at("scales").get<std::vector<int>>();
      auto direct = c.at("direct").get<std::vector<double>>();
      auto reverse = c.at("reverse").get<std::vector<double>>();
      if (direct.size() != scales.size() || reverse.size() != scales.size())
        config_error("eval.curves arrays must have equal length");
      PlasticityCurve d, r;
      for (std::size_t i = 0; i < scales.size(); ++i) {
        d.points.emplace_back(scales[i], direct[i]);
        r.points.emplace_back(scales[i], reverse[i]);
      }
      x.curves = std::pair{d, r};
    } catch (const json::exception& ex) {
      config_error(std::string("bad eval.curves: ") + ex.what());
    }
  }
  return x;
}

std::vector<MCQItem> load_probe_inputs(const std::vector<fs::path>& paths) {
  std::vector<MCQItem> out;
  for (const auto& p : paths) {
    std::vector<fs::path> files;
    if (fs::is_directory(p)) {
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.starts_with("eval_") && name.ends_with(".jsonl"))
          files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
    } else {
      files.push_back(p);
    }
    for (const auto& f : files) {
      auto items = load_probe_jsonl(f);
      out.insert(out.end(), std::make_move_iterator(items.begin()),
                 std::make_move_iterator(items.end()));
    }
  }
  return out;
}

namespace cli {

json read_config(const fs::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error&) {
    config_error("cannot read config '" + path.string() + "'");
  }
  try {
    return json::parse(text);
  } catch (const json::exception& ex) {
    config_error("config '" + path.string() + "' is not valid JSON: " + ex.what());
  }
}

void require_writable(const fs::path& out, bool force) {
  std::error_code ec;
  if (force || !fs::exists(out, ec)) return;
  if (!fs::is_directory(out, ec) || fs::directory_iterator(out, ec) != fs::directory_iterator())
    config_error("output '" + out.string() + "' exists and is not empty; pass --force");
}

Outcome cmd_generate(const GenerateArgs& args, const Globals& g) {
  const json doc = read_config(args.config);
  BenchmarkConfig cfg = benchmark_config_from_json(doc, fs::absolute(args.config).parent_path());
  eval_config_from_json(doc);  // reject a bad eval section early
  if (g.seed) cfg.seed = *g.seed;
  const fs::path out = args.out ? *args.out : cfg.output_dir.value_or(fs::path());
  if (out.empty()) config_error("no output directory: pass --out or set output_dir");
  require_writable(out, args.force);

  auto bundle = generate_benchmark(cfg, out, args.force, g.jobs);
  ordered_json res;
  res["command"] = "generate";
  res["ok"] = true;
  res["output"] = fs::absolute(out).lexically_normal().string();
  res["summary"] = bundle.summary;
  return {res, kExitOk};
}

Outcome cmd_evaluate(const EvaluateArgs& args, const Globals&) {
  json doc = json::object();
  if (args.config) doc = read_config(*args.config);
  EvalConfig cfg = eval_config_from_json(doc);
  EvalExtras extras = eval_extras_from_json(doc);
  if (args.mode) {
    if (*args.mode != "edit" && *args.mode != "unlearn") config_error("--mode must be edit or unlearn");
    cfg.mode = parse_mode(*args.mode);
  }
  require_writable(args.out, args.force);

  const auto items = load_probe_inputs(args.probes);
  const auto pre = load_answers_jsonl(args.pre);
  const auto post = load_answers_jsonl(args.post);
  const auto report = evaluate(items, pre, post, cfg, extras);
  const auto rj = report_to_json(report);
  write_tree_atomically(args.out, args.force, [&](const fs::path& dir) {
    write_text(dir / "report.json", rj.dump(2) + "\n");
    write_text(dir / "report.csv", report_to_csv(report));
  });

  ordered_json res;
  res["command"] = "evaluate";
  res["ok"] = true;
  res["output"] = fs::absolute(args.out).lexically_normal().string();
  res["items"] = items.size();
  res["report"] = rj;
  return {res, kExitOk};
}

Outcome cmd_geometry(const GeometryArgs& args, const Globals& g) {
  require_writable(args.out, args.force);
  auto pairs = load_pairs(args.pre, args.post);
  std::map<std::string, Matrix> fisher;
  if (args.fisher) {
    fisher = load_tensors(*args.fisher);
    for (const auto& [name, _] : fisher)
      if (std::none_of(pairs.begin(), pairs.end(), [&](auto& p) { return p.name == name; }))
        throw Error(Errc::MissingPhase, "Fisher tensor '" + name + "' has no pre/post pair");
  }

  struct Row {
    SVDReport svd;
    double l2 = 0.0;
    std::optional<double> fisher;
    std::optional<double> cka;
  };
  std::vector<Row> rows(pairs.size());
  parallel_for(pairs.size(), g.jobs, [&](std::size_t i) {
    const auto& p = pairs[i];
    Row& r = rows[i];
    r.svd = svd_diff(p, args.rank ? std::optional(std::min(*args.rank, default_rank(p.w))) : std::nullopt,
                     args.tol);
    r.l2 = l2_distance(p);
    if (auto it = fisher.find(p.name); it != fisher.end()) r.fisher = fisher_distance(p, it->second);
    try {
      r.cka = linear_cka(p.w, p.w_prime);
    } catch (const Error& ex) {
      if (ex.code() != Errc::DegenerateInput) throw;
    }
  });

  std::optional<double> kl;
  if (args.pre_answers && args.post_answers) {
    const auto a = load_answers_jsonl(*args.pre_answers);
    const auto b = load_answers_jsonl(*args.post_answers);
    const AnswerIndex ai(a);
    std::vector<std::vector<double>> ps, qs;
    for (const auto& rec : b) {
      const auto& x = ai.at(rec.probe_id);
      if (!x.choice_probs || !rec.choice_probs)
        throw Error(Errc::MissingProbs, "probe '" + rec.probe_id + "' lacks choice_probs");
      ps.emplace_back(rec.choice_probs->begin(), rec.choice_probs->end());
      qs.emplace_back(x.choice_probs->begin(), x.choice_probs->end());
    }
    if (!ps.empty()) kl = kl_mean(ps, qs);
  }

  ordered_json layers = ordered_json::array();
  std::string csv = "layer,metric,index,value\n";
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto& s = r.svd;
    ordered_json l;
    l["name"] = s.name;
    l["rows"] = pairs[i].w.rows();
    l["cols"] = pairs[i].w.cols();
    l["rank"] = s.rank;
    l["scaling_ratios"] = s.scaling_ratios;
    l["degenerate"] = s.degenerate;
    l["sigma"] = s.sigma;
    l["sigma_prime"] = s.sigma_prime;
    l["left_alignment"] = s.left_alignment;
    l["right_alignment"] = s.right_alignment;
    l["recon_residual"] = s.recon_residual;
    l["l2"] = r.l2;
    l["fisher"] = opt(r.fisher);
    l["cka"] = opt(r.cka);
    layers.push_back(l);
    for (std::size_t k = 0; k < s.scaling_ratios.size(); ++k)
      csv += fmt::format("{},scaling_ratio,{},{}\n", s.name, k, s.scaling_ratios[k]);
    csv += fmt::format("{},left_alignment,,{}\n", s.name, s.left_alignment);
    csv += fmt::format("{},right_alignment,,{}\n", s.name, s.right_alignment);
    csv += fmt::format("{},recon_residual,,{}\n", s.name, s.recon_residual);
    csv += fmt::format("{},l2,,{}\n", s.name, r.l2);
    if (r.fisher) csv += fmt::format("{},fisher,,{}\n", s.name, *r.fisher);
    if (r.cka) csv += fmt::format("{},cka,,{}\n", s.name, *r.cka);
  }

  // each metric is normalized as its own series over layers
  auto series = [&](auto get) {
    ordered_json m;
    std::vector<double> raw;
    bool complete = true;
    for (const auto& r : rows) {
      std::optional<double> v = get(r);
      if (!v) complete = false;
      else raw.push_back(*v);
    }
    m["raw"] = raw;
    m["normalized"] = nullptr;
    if (complete && raw.size() >= 2) {
      try {
        m["normalized"] = log_minmax(raw);
      } catch (const Error& ex) {
        if (ex.code() != Errc::ConstantSeries) throw;
        m["note"] = "constant series";
      }
    }
    return m;
  };
  ordered_json sim;
  ordered_json names = ordered_json::array();
  for (const auto& r : rows) names.push_back(r.svd.name);
  sim["series"] = names;
  sim["cka"] = series([](const Row& r) { return r.cka; });
  sim["l2"] = series([](const Row& r) { return std::optional<double>(r.l2); });
  sim["fisher"] = series([](const Row& r) { return r.fisher; });
  sim["kl"] = {{"raw", opt(kl)}, {"over", "choice distributions, KL(post || pre)"}};

  ordered_json report;
  report["layers"] = layers;
  report["similarity"] = sim;
  write_tree_atomically(args.out, args.force, [&](const fs::path& dir) {
    write_text(dir / "geometry.json", report.dump(2) + "\n");
    write_text(dir / "geometry.csv", csv);
  });

  ordered_json res;
  res["command"] = "geometry";
  res["ok"] = true;
  res["output"] = fs::absolute(args.out).lexically_normal().string();
  res["report"] = report;
  return {res, kExitOk};
}

}  // namespace cli

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-update benchmark generation and evaluation", "ksmith"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  cli::Globals g;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
  std::string log_level = "warn";
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--jobs", jobs, "Worker threads (0: hardware concurrency)");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

  cli::GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a benchmark tree from a config");
  generate->add_option("--config", gen.config)->required();
  generate->add_option("--out", gen.out, "Output directory (default: output_dir in config)");
  generate->add_flag("--force", gen.force, "Replace a non-empty output directory");

  cli::EvaluateArgs ev;
  std::optional<std::string> ev_config;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score answer logs against probe keys");
  evaluate_cmd->add_option("--probes", ev.probes, "Probe JSONL file or benchmark directory")
      ->required();
  evaluate_cmd->add_option("--pre", ev.pre, "Pre-intervention answers JSONL")->required();
  evaluate_cmd->add_option("--post", ev.post, "Post-intervention answers JSONL")->required();
  evaluate_cmd->add_option("--config", ev_config);
  evaluate_cmd->add_option("--out", ev.out)->required();
  evaluate_cmd->add_option("--mode", ev.mode, "edit or unlearn");
  evaluate_cmd->add_flag("--force", ev.force);

  cli::GeometryArgs geo;
  std::size_t rank = 0;
  auto* geometry_cmd = app.add_subcommand("geometry", "SVD and similarity analysis of weights");
  geometry_cmd->add_option("--pre", geo.pre)->required();
  geometry_cmd->add_option("--post", geo.post)->required();
  geometry_cmd->add_option("--fisher", geo.fisher);
  geometry_cmd->add_option("--pre-answers", geo.pre_answers);
  geometry_cmd->add_option("--post-answers", geo.post_answers);
  geometry_cmd->add_option("--out", geo.out)->required();
  auto* rank_opt = geometry_cmd->add_option("--rank", rank);
  geometry_cmd->add_option("--tol", geo.tol);
  geometry_cmd->add_flag("--force", geo.force);

  cli::MockRunArgs mock;
  auto* mock_cmd = app.add_subcommand("mock-run", "Offline end-to-end run with mock models");
  mock_cmd->add_option("--config", mock.config)->required();
  mock_cmd->add_option("--out", mock.out);
  mock_cmd->add_flag("--force", mock.force);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, err, err);
    if (rc == 0) return kExitOk;
    const auto subs = app.get_subcommands();
    ordered_json doc{{"command", subs.empty() ? "" : subs.front()->get_name()},
                     {"ok", false},
                     {"error", "UsageError"},
                     {"message", e.what()}};
    out << doc.dump(2) << "\n";
    return kExitUsage;
  }

  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("ksmith", sink);
  logger->set_level(spdlog::level::from_str(log_level));
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);

  if (*seed_opt) g.seed = seed;
  g.jobs = jobs ? jobs : std::max(1u, std::thread::hardware_concurrency());
  if (ev_config) ev.config = *ev_config;
  if (*rank_opt) geo.rank = rank;

  std::string command = app.get_subcommands().front()->get_name();
  try {
    cli::Outcome res;
    if (*generate) res = cli::cmd_generate(gen, g);
    else if (*evaluate_cmd) res = cli::cmd_evaluate(ev, g);
    else if (*geometry_cmd) res = cli::cmd_geometry(geo, g);
    else res = cli::cmd_mock_run(mock, g);
    out << res.doc.dump(2) << "\n";
    return res.code;
  } catch (const Error& ex) {
    const int code = ex.code() == Errc::ConfigError ? kExitUsage : kExitRuntime;
    spdlog::error("{}", ex.what());
    ordered_json doc;
    doc["command"] = command;
    doc["ok"] = false;
    doc["error"] = to_string(ex.code());
    doc["message"] = ex.what();
    err << doc.dump() << "\n";
    out << doc.dump(2) << "\n";
    return code;
  } catch (const std::exception& ex) {
    spdlog::error("{}", ex.what());
    ordered_json doc{{"command", command}, {"ok", false}, {"error", "Internal"}, {"message", ex.what()}};
    err << doc.dump() << "\n";
    out << doc.dump(2) << "\n";
    return kExitRuntime;
  }
}

}  // namespace ksmith
