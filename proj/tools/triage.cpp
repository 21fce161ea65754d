// triage: command-line entry point.
//
// Exit codes: 0 success, 1 usage or validation error (bad flags, missing or
// invalid inputs), 2 failure while running.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "triage/evaluation.hpp"
#include "triage/http_backend.hpp"
#include "triage/outcome_io.hpp"
#include "triage/report.hpp"
#include "triage/service.hpp"
#include "triage/synthetic_world.hpp"

namespace {

using namespace triage;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

// Raw flag values; unset flags fall back to the config file, then defaults.
struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau_l;
  std::optional<double> tau_m;
  std::optional<std::size_t> depth;
  std::optional<int> budget;
  std::optional<std::string> backend;
  std::optional<std::size_t> parallelism;
  std::optional<std::string> out;
  std::optional<std::string> world;
  std::optional<std::string> task_id;
  std::optional<std::string> labels;
  std::optional<std::string> templates;
  std::optional<std::string> taxonomy;
  std::optional<std::string> corpus;
  std::optional<std::string> test;
  std::optional<std::string> valid;
  std::optional<std::string> prompt_mode;
  std::optional<double> mask_rate;
};

struct RunConfig {
  TaskPaths paths;
  RoutingConfig routing;
  bool tau_m_given = false;
  std::optional<double> mask_rate;
  CostModel cost;
  std::string backend = "mock:majority";
  HttpBackendConfig http;
  std::size_t parallelism = 1;
  std::uint64_t seed = 0;
  std::optional<fs::path> out;
  std::string host = "127.0.0.1";
  int port = 8080;
};

struct FileConfig {
  nlohmann::json json = nlohmann::json::object();
  fs::path base;  // relative input paths resolve against the config file's directory
};

FileConfig read_file_config(const std::string& path) {
  FileConfig fc;
  if (path.empty()) return fc;
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "config file not found", path);
  fc.json = parse_config_text(read_file(path), path);
  if (!fc.json.is_object()) throw Error(ErrorKind::Parse, "config must be a table/object", path);
  fc.base = fs::path(path).parent_path();
  return fc;
}

RunConfig resolve(const Flags& f, bool need_task) {
  const auto fc = read_file_config(f.config);
  const auto& j = fc.json;
  static const std::set<std::string> known = {"world", "task_id", "labels", "templates", "taxonomy", "corpus",
                                              "test", "valid", "tau_l", "tau_m", "depth", "budget", "prompt_mode",
                                              "mask_rate", "backend", "parallelism", "seed", "out", "cost", "http",
                                              "service"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorKind::InvalidArgument, "unknown config key '" + key + "'", f.config);
  }

  RunConfig rc;
  try {
    const auto str = [&](const std::optional<std::string>& flag, const char* key) -> std::optional<std::string> {
      if (flag) return flag;
      if (j.contains(key)) return j.at(key).get<std::string>();
      return std::nullopt;
    };
    const auto in_path = [&](const std::optional<std::string>& flag, const char* key) -> std::optional<fs::path> {
      if (flag) return fs::path(*flag);
      if (j.contains(key)) {
        fs::path p = j.at(key).get<std::string>();
        return p.is_relative() ? fc.base / p : p;
      }
      return std::nullopt;
    };
    const auto num = [&]<class T>(const std::optional<T>& flag, const char* key, T fallback) -> T {
      if (flag) return *flag;
      if (j.contains(key)) return j.at(key).get<T>();
      return fallback;
    };

    rc.routing.tau_l = num(f.tau_l, "tau_l", rc.routing.tau_l);
    rc.tau_m_given = f.tau_m.has_value() || j.contains("tau_m");
    rc.routing.tau_m = num(f.tau_m, "tau_m", rc.routing.tau_m);
    rc.routing.tier_h.depth = num(f.depth, "depth", rc.routing.tier_h.depth);
    rc.routing.tier_h.budget = num(f.budget, "budget", rc.routing.tier_h.budget);
    if (auto m = str(f.prompt_mode, "prompt_mode")) rc.routing.tier_h.prompt_mode = parse_prompt_mode(*m);
    if (f.mask_rate) rc.mask_rate = f.mask_rate;
    else if (j.contains("mask_rate")) rc.mask_rate = j.at("mask_rate").get<double>();
    if (auto b = str(f.backend, "backend")) rc.backend = *b;
    rc.parallelism = num(f.parallelism, "parallelism", rc.parallelism);
    rc.seed = num(f.seed, "seed", rc.seed);
    if (auto o = str(f.out, "out")) rc.out = fs::path(*o);
    if (j.contains("cost")) {
      const auto& c = j.at("cost");
      rc.cost.t_l = c.value("t_l", rc.cost.t_l);
      rc.cost.t_m = c.value("t_m", rc.cost.t_m);
      rc.cost.t_h = c.value("t_h", rc.cost.t_h);
    }
    if (j.contains("http")) {
      const auto& h = j.at("http");
      rc.http.endpoint = h.value("endpoint", std::string());
      rc.http.model = h.value("model", std::string());
      rc.http.timeout_seconds = h.value("timeout_seconds", rc.http.timeout_seconds);
    }
    if (j.contains("service")) {
      rc.host = j.at("service").value("host", rc.host);
      rc.port = j.at("service").value("port", rc.port);
    }
    rc.routing.validate();
    if (rc.parallelism < 1) throw Error(ErrorKind::InvalidArgument, "parallelism must be at least 1");

    if (!need_task) return rc;

    const auto world = in_path(f.world, "world");
    std::optional<std::string> task_id = str(f.task_id, "task_id");
    if (world) {
      if (!fs::exists(*world / "world.json") && !task_id) {
        throw Error(ErrorKind::Io, "not an exported world (world.json missing)", world->string());
      }
      rc.paths = world_paths(*world, task_id ? *task_id : world_task_id(*world));
    } else if (!task_id) {
      throw Error(ErrorKind::InvalidArgument, "give --world, or --task-id with explicit manifest paths");
    } else {
      rc.paths.task_id = *task_id;
    }
    const auto override_path = [&](fs::path& slot, const std::optional<std::string>& flag, const char* key) {
      if (auto p = in_path(flag, key)) slot = *p;
      if (slot.empty()) throw Error(ErrorKind::InvalidArgument, std::string("missing path for '") + key + "'");
    };
    override_path(rc.paths.labels, f.labels, "labels");
    override_path(rc.paths.templates, f.templates, "templates");
    override_path(rc.paths.taxonomy, f.taxonomy, "taxonomy");
    override_path(rc.paths.corpus, f.corpus, "corpus");
    override_path(rc.paths.test, f.test, "test");
    if (auto p = in_path(f.valid, "valid")) rc.paths.valid = *p;
    rc.paths.validate();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, e.what(), f.config);
  }
  return rc;
}

std::unique_ptr<LlmBackend> make_backend(const RunConfig& rc) {
  if (rc.backend.starts_with("mock:")) return std::make_unique<MockBackend>(MockBackend::parse(rc.backend.substr(5)));
  if (rc.backend == "http") return std::make_unique<HttpBackend>(HttpBackendConfig::from_environment(rc.http));
  throw Error(ErrorKind::InvalidArgument, "backend must be mock:<mode> or http", rc.backend);
}

struct Session {
  RunConfig rc;
  LoadedTask task;
  std::unique_ptr<LlmBackend> backend;
  std::optional<SweepResult> tau_m_selection;
};

/// Loading and validation; every failure here exits 1.
Session open_session(const Flags& flags) {
  auto rc = resolve(flags, true);
  auto task = load_task(rc.paths);
  auto backend = make_backend(rc);
  if (rc.mask_rate) {
    const auto mask_seed = CounterRng(rc.seed).substream("route-mask").next_u64();
    rc.routing.mask = sample_mask(task.assets.taxonomy, *rc.mask_rate, mask_seed);
  }
  return Session{std::move(rc), std::move(task), std::move(backend), std::nullopt};
}

/// τ_M is chosen on the validation split unless given explicitly.
void settle_tau_m(Session& s) {
  if (s.rc.tau_m_given || s.task.valid.empty()) return;
  const auto points = validation_points(s.task.valid, s.task.assets, s.rc.routing.mask);
  s.tau_m_selection = select_tau_m(points, s.rc.routing.tau_l, kDefaultTauMGrid, s.task.assets.labels.size());
  s.rc.routing.tau_m = s.tau_m_selection->selected;
}

void print_error(const std::exception& e) { std::cerr << "error: " << e.what() << "\n"; }

/// Runs `load` (failures → 1) then `run` (failures → 2).
template <class Load, class Run>
int phased(Load&& load, Run&& run) {
  try {
    load();
  } catch (const std::exception& e) {
    print_error(e);
    return kInvalid;
  }
  try {
    return run();
  } catch (const std::exception& e) {
    print_error(e);
    return kRuntime;
  }
}

void write_table(const Table& t, const std::string& kind, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  ojson j = {{"kind", kind}, {"header", t.header}, {"rows", t.rows}, {"data", t.json}};
  write_file(dir / (stem + ".json"), j.dump(2) + "\n");
  write_file(dir / (stem + ".txt"), t.text());
  write_file(dir / (stem + ".csv"), t.csv());
}

RunSummary make_summary(const Session& s, const BatchResult& b) {
  RunSummary sum;
  sum.task_id = s.task.assets.labels.task_id();
  sum.class_names = s.task.assets.labels.class_names();
  sum.stats = b.stats;
  sum.cost = s.rc.cost;
  sum.config = s.rc.routing;
  sum.backend = s.backend->describe();
  sum.errors = b.errors;
  return sum;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const std::vector<std::string>& manifests, const std::optional<std::string>& out) {
  std::vector<std::vector<CorpusRecord>> loaded;
  return phased(
      [&] {
        if (out && manifests.size() != 1) throw Error(ErrorKind::InvalidArgument, "--out takes exactly one manifest");
        for (const auto& m : manifests) {
          loaded.push_back(load_corpus(m));
          const auto& recs = loaded.back();
          std::cout << m << ": " << recs.size() << " records, D=" << recs.front().embedding.dimension()
                    << ", checksum ok, all rows normalized\n";
        }
      },
      [&] {
        if (out) {
          const auto m = save_corpus(loaded.front(), *out);
          std::cout << "wrote " << (fs::path(*out) / "manifest.json").string() << " (sha256 " << m.checksum_sha256
                    << ")\n";
        }
        return kOk;
      });
}

int cmd_gen_world(const std::string& config, const std::optional<std::uint64_t>& seed, const std::string& out) {
  WorldConfig wc;
  return phased(
      [&] {
        if (!config.empty()) {
          if (!fs::exists(config)) throw Error(ErrorKind::Io, "world config not found", config);
          wc = load_world_config(config);
        }
        if (seed) wc.seed = *seed;
        wc.validate();
      },
      [&] {
        const auto world = generate_world(wc);
        for (const auto& w : world.warnings) std::cerr << "warning: " << w << "\n";
        export_world(world, out);
        std::cout << "world '" << world.task_id << "' written to " << out << " (test " << world.test.size()
                  << ", valid " << world.valid.size() << ", corpus " << world.corpus.size() << ", D "
                  << wc.dimension << ")\n";
        return kOk;
      });
}

int cmd_route(const Flags& flags) {
  std::optional<Session> s;
  return phased([&] { s = open_session(flags); },
                [&] {
                  settle_tau_m(*s);
                  const fs::path out = s->rc.out.value_or("run");
                  const auto batch = route_batch(s->task.test, s->task.assets, s->rc.routing, *s->backend,
                                                 s->rc.cost, s->rc.parallelism);
                  const auto summary = make_summary(*s, batch);
                  fs::create_directories(out);
                  write_file(out / "outcomes.jsonl", render_outcomes_jsonl(batch.outcomes, summary));
                  write_file(out / "transcript.jsonl", render_transcript_jsonl(batch.outcomes));
                  write_file(out / "timing.jsonl", render_timing_jsonl(batch.outcomes));
                  if (s->tau_m_selection) write_table(tau_m_table(*s->tau_m_selection), "tau_m", out, "tau_m_selection");

                  const auto& st = batch.stats;
                  std::printf("routed %zu samples (tau_L=%.4g, tau_M=%.4g%s): L %zu, M %zu, H %zu; expected cost %.4f\n",
                              st.n, s->rc.routing.tau_l, s->rc.routing.tau_m,
                              s->tau_m_selection ? " selected on validation" : "", st.count_l, st.count_m,
                              st.count_h, st.expected_cost);
                  std::printf("outcomes: %s\n", (out / "outcomes.jsonl").string().c_str());
                  for (const auto& e : batch.errors) std::cerr << "sample " << e.sample_id << ": " << e.message << "\n";
                  return batch.errors.empty() ? kOk : kRuntime;
                });
}

int cmd_eval(const std::string& outcomes, const std::optional<std::string>& out, const std::string& format) {
  RunArtifact art;
  return phased(
      [&] {
        if (!fs::exists(outcomes)) throw Error(ErrorKind::Io, "outcome file not found", outcomes);
        art = read_outcomes_jsonl(outcomes);
        if (format != "text" && format != "json" && format != "csv") {
          throw Error(ErrorKind::InvalidArgument, "format must be text, json or csv", format);
        }
      },
      [&] {
        const auto report = evaluate_outcomes(art.outcomes, art.summary.class_names, art.summary.task_id,
                                              art.summary.cost);
        const auto text = render_eval_text(report, art.summary);
        const auto json = eval_to_json(report, art.summary).dump(2) + "\n";
        const auto csv = render_eval_csv(report);
        if (out) {
          fs::create_directories(*out);
          write_file(fs::path(*out) / "eval.txt", text);
          write_file(fs::path(*out) / "eval.json", json);
          write_file(fs::path(*out) / "eval.csv", csv);
        }
        std::cout << (format == "json" ? json : format == "csv" ? csv : text);
        return kOk;
      });
}

int cmd_sweep_tau(const Flags& flags, const std::string& which, std::vector<double> taus) {
  std::optional<Session> s;
  return phased(
      [&] {
        if (which != "l" && which != "m") throw Error(ErrorKind::InvalidArgument, "--which must be l or m", which);
        s = open_session(flags);
        if (which == "m" && s->task.valid.empty()) {
          throw Error(ErrorKind::EmptySweep, "tau_M selection needs a validation split");
        }
      },
      [&] {
        Table t;
        if (which == "m") {
          if (taus.empty()) taus = kDefaultTauMGrid;
          const auto points = validation_points(s->task.valid, s->task.assets, s->rc.routing.mask);
          t = tau_m_table(select_tau_m(points, s->rc.routing.tau_l, taus, s->task.assets.labels.size()));
        } else {
          if (taus.empty()) taus = {0.20, 0.30, 0.45, 0.60};
          settle_tau_m(*s);
          t = tau_l_table(sweep_tau_l(s->task.assets, s->task.test, taus, s->rc.routing, *s->backend, s->rc.cost,
                                      s->rc.parallelism),
                          s->rc.routing.tau_m);
        }
        if (s->rc.out) write_table(t, which == "m" ? "tau_m" : "tau_l", *s->rc.out, "sweep_tau_" + which);
        std::cout << t.text();
        return kOk;
      });
}

int cmd_ablate_mask(const Flags& flags, const std::vector<double>& rates, std::size_t repeats) {
  std::optional<Session> s;
  return phased(
      [&] {
        if (repeats < 1) throw Error(ErrorKind::InvalidArgument, "--repeats must be at least 1");
        s = open_session(flags);
      },
      [&] {
        auto stream = CounterRng(s->rc.seed).substream("mask-ablation");
        std::vector<std::uint64_t> seeds(repeats);
        for (auto& seed : seeds) seed = stream.next_u64();
        const auto t = mask_table(ablate_masking(s->task.assets, s->task.test, rates, seeds));
        if (s->rc.out) write_table(t, "mask", *s->rc.out, "ablate_mask");
        std::cout << t.text();
        return kOk;
      });
}

int cmd_ablate_depth(const Flags& flags, const std::vector<std::size_t>& depths) {
  std::optional<Session> s;
  return phased([&] { s = open_session(flags); },
                [&] {
                  const auto t = depth_table(ablate_depth(s->task.assets, s->task.test, depths, s->rc.routing,
                                                          *s->backend, s->rc.parallelism));
                  if (s->rc.out) write_table(t, "depth", *s->rc.out, "ablate_depth");
                  std::cout << t.text();
                  return kOk;
                });
}

/// Re-renders a saved table (.json from a sweep) or an outcome file.
int cmd_report(const std::string& input, const std::string& format) {
  std::optional<Table> table;
  std::optional<RunArtifact> art;
  return phased(
      [&] {
        if (!fs::exists(input)) throw Error(ErrorKind::Io, "input not found", input);
        if (format != "text" && format != "csv" && format != "json") {
          throw Error(ErrorKind::InvalidArgument, "format must be text, csv or json", format);
        }
        if (fs::path(input).extension() == ".jsonl") {
          art = read_outcomes_jsonl(input);
          return;
        }
        try {
          const auto j = nlohmann::json::parse(read_file(input));
          table = Table{j.at("header").get<std::vector<std::string>>(),
                        j.at("rows").get<std::vector<std::vector<std::string>>>(), j.at("data")};
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorKind::Parse, e.what(), input);
        }
      },
      [&] {
        if (art) {
          const auto report = evaluate_outcomes(art->outcomes, art->summary.class_names, art->summary.task_id,
                                                art->summary.cost);
          if (format == "csv") std::cout << render_eval_csv(report);
          else if (format == "json") std::cout << eval_to_json(report, art->summary).dump(2) << "\n";
          else std::cout << render_eval_text(report, art->summary);
        } else {
          if (format == "csv") std::cout << table->csv();
          else if (format == "json") std::cout << table->json.dump(2) << "\n";
          else std::cout << table->text();
        }
        return kOk;
      });
}

int cmd_serve(const Flags& flags, const std::optional<std::string>& host, const std::optional<int>& port) {
  std::optional<Session> s;
  return phased(
      [&] {
        s = open_session(flags);
        if (host) s->rc.host = *host;
        if (port) s->rc.port = *port;
      },
      [&] {
        settle_tau_m(*s);
        ClassificationService service(s->task.assets, s->task.test, s->rc.routing, *s->backend, s->rc.cost);
        httplib::Server server;
        service.mount(server);
        std::cerr << "serving task '" << s->task.assets.labels.task_id() << "' on " << s->rc.host << ":"
                  << s->rc.port << " (tau_L=" << s->rc.routing.tau_l << ", tau_M=" << s->rc.routing.tau_m << ")\n";
        if (!server.listen(s->rc.host, s->rc.port)) {
          throw Error(ErrorKind::Io, "cannot listen", s->rc.host + ":" + std::to_string(s->rc.port));
        }
        return kOk;
      });
}

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Run config file (.toml or .json)");
  cmd->add_option("--world", f.world, "Exported world directory");
  cmd->add_option("--task-id", f.task_id, "Task id (defaults to the world's)");
  cmd->add_option("--labels", f.labels, "Label-text manifest");
  cmd->add_option("--templates", f.templates, "Descriptor option manifest");
  cmd->add_option("--taxonomy", f.taxonomy, "Taxonomy and rule-table file");
  cmd->add_option("--corpus", f.corpus, "Retrieval corpus manifest");
  cmd->add_option("--test", f.test, "Manifest of records to route");
  cmd->add_option("--valid", f.valid, "Validation manifest (tau_M selection)");
  cmd->add_option("--seed", f.seed, "Root seed");
  cmd->add_option("--tau-l", f.tau_l, "Tier-L margin threshold (default 0.20)");
  cmd->add_option("--tau-m", f.tau_m, "Tier-M margin threshold (default: selected on validation, else 0.08)");
  cmd->add_option("--depth", f.depth, "Retrieval depth (default 3)");
  cmd->add_option("--budget", f.budget, "Backend calls per escalated sample (default 1)");
  cmd->add_option("--backend", f.backend, "mock:<majority|fixed:CLASS|garbage|echo_first> or http");
  cmd->add_option("--prompt-mode", f.prompt_mode, "with_evidence or reports_only");
  cmd->add_option("--mask-rate", f.mask_rate, "Fraction of descriptor groups to mask");
  cmd->add_option("--parallelism", f.parallelism, "Samples in flight (default 1)");
  cmd->add_option("--out", f.out, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence-gated three-tier zero-shot classification over frozen embeddings"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  Flags flags;

  std::vector<std::string> ingest_manifests;
  std::optional<std::string> ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Validate and normalize embedding manifests");
  ingest->add_option("manifests", ingest_manifests, "manifest.json files")->required();
  ingest->add_option("--out", ingest_out, "Write a normalized copy of the (single) corpus here");

  std::string world_config;
  std::optional<std::uint64_t> world_seed;
  std::string world_out = "world";
  auto* gen = app.add_subcommand("gen-world", "Generate and export a synthetic world");
  gen->add_option("--config", world_config, "World config (.toml or .json)");
  gen->add_option("--seed", world_seed, "Overrides the config seed");
  gen->add_option("--out", world_out, "Output directory")->capture_default_str();

  auto* route = app.add_subcommand("route", "Route the test split and write an outcome file");
  add_run_flags(route, flags);

  std::string eval_outcomes;
  std::optional<std::string> eval_out;
  std::string eval_format = "text";
  auto* eval = app.add_subcommand("eval", "AUROC and tier-stratified report for an outcome file");
  eval->add_option("--outcomes", eval_outcomes, "outcomes.jsonl from route")->required();
  eval->add_option("--out", eval_out, "Also write eval.txt/json/csv here");
  eval->add_option("--format", eval_format, "text, json or csv")->capture_default_str();

  std::string sweep_which = "l";
  std::vector<double> sweep_taus;
  auto* sweep = app.add_subcommand("sweep-tau", "Threshold sweep (tau_L on test, or tau_M on validation)");
  add_run_flags(sweep, flags);
  sweep->add_option("--which", sweep_which, "l or m")->capture_default_str();
  sweep->add_option("--taus", sweep_taus, "Comma-separated thresholds")->delimiter(',');

  std::vector<double> mask_rates = {0.0, 0.2, 0.5};
  std::size_t mask_repeats = 5;
  auto* amask = app.add_subcommand("ablate-mask", "Tier-M AUROC under random descriptor masking");
  add_run_flags(amask, flags);
  amask->add_option("--rates", mask_rates, "Comma-separated mask rates")->delimiter(',')->capture_default_str();
  amask->add_option("--repeats", mask_repeats, "Masks per rate")->capture_default_str();

  std::vector<std::size_t> depths = {1, 3, 5, 8};
  auto* adepth = app.add_subcommand("ablate-depth", "Tier-H AUROC versus retrieval depth");
  add_run_flags(adepth, flags);
  adepth->add_option("--depths", depths, "Comma-separated depths")->delimiter(',')->capture_default_str();

  std::string report_input;
  std::string report_format = "text";
  auto* report = app.add_subcommand("report", "Render a saved table or outcome file");
  report->add_option("input", report_input, "outcomes.jsonl or a table .json")->required();
  report->add_option("--format", report_format, "text, csv or json")->capture_default_str();

  std::optional<std::string> serve_host;
  std::optional<int> serve_port;
  auto* serve = app.add_subcommand("serve", "Serve /classify, /stats and /healthz");
  add_run_flags(serve, flags);
  serve->add_option("--host", serve_host, "Bind address (default 127.0.0.1)");
  serve->add_option("--port", serve_port, "Port (default 8080)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto parsed = app.get_subcommands();
    std::cerr << (parsed.empty() ? app.help() : parsed.front()->help());
    return kInvalid;
  }

  if (ingest->parsed()) return cmd_ingest(ingest_manifests, ingest_out);
  if (gen->parsed()) return cmd_gen_world(world_config, world_seed, world_out);
  if (route->parsed()) return cmd_route(flags);
  if (eval->parsed()) return cmd_eval(eval_outcomes, eval_out, eval_format);
  if (sweep->parsed()) return cmd_sweep_tau(flags, sweep_which, sweep_taus);
  if (amask->parsed()) return cmd_ablate_mask(flags, mask_rates, mask_repeats);
  if (adepth->parsed()) return cmd_ablate_depth(flags, depths);
  if (report->parsed()) return cmd_report(report_input, report_format);
  if (serve->parsed()) return cmd_serve(flags, serve_host, serve_port);
  return kInvalid;
}
