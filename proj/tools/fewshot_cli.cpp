#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fewshot/bias.hpp"
#include "fewshot/grammar.hpp"
#include "fewshot/protocol.hpp"
#include "fewshot/seq2seq.hpp"
#include "fewshot/service.hpp"
#include "fewshot/sim.hpp"

namespace {

using namespace fewshot;
using nlohmann::json;

std::string read_file(const std::string& path) {
  if (path == "-") {
    std::stringstream buf;
    buf << std::cin.rdbuf();
    return buf.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, std::string_view data) {
  if (path == "-") {
    std::cout << data;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::Io, "cannot write " + path);
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::Format, path + ": " + e.what());
  }
}

ExperimentSpec read_spec(const std::string& path) {
  try {
    return read_json(path).get<ExperimentSpec>();
  } catch (const json::exception& e) {
    throw Error(Errc::Format, path + ": " + e.what());
  }
}

std::vector<Session> read_sessions(const std::string& path) { return read_sessions_jsonl(read_file(path)); }

int cmd_interpret(const std::string& text, const std::string& lexicon_path, bool display) {
  const Lexicon lex = lexicon_path.empty() ? Lexicon::canonical() : read_json(lexicon_path).get<Lexicon>();
  try {
    const auto out = interpret(Instruction::parse(text), lex);
    std::cout << to_string(out, display) << '\n';
    return 0;
  } catch (const Error& e) {
    if (e.code() == Errc::MalformedInstruction || e.code() == Errc::UnknownWord) {
      std::cerr << e.what() << '\n';
      return 2;
    }
    throw;
  }
}

int cmd_gen_exp(int exp, std::uint64_t seed, const std::string& out) {
  if (exp < 1 || exp > 3) throw Error(Errc::InvalidConfig, "--exp must be 1, 2 or 3");
  const auto spec = generate_experiment(static_cast<ExperimentKind>(exp - 1), seed);
  write_file(out, json(spec).dump(2) + "\n");
  return 0;
}

int cmd_grade(const std::string& sessions_path, const std::string& out) {
  const auto sessions = read_sessions(sessions_path);
  std::vector<ParticipantResult> results;
  for (const auto& s : sessions) results.push_back(grade_session(s));
  json j = {{"schema", "fewshot.grades/1"}, {"participants", results}};
  j["summary"] = results.empty() ? json(nullptr) : json(aggregate(results));
  write_file(out, j.dump(2) + "\n");
  return 0;
}

int cmd_analyze(const std::string& sessions_path, const std::string& spec_path, const std::string& out,
                const std::string& design_out) {
  const auto sessions = read_sessions(sessions_path);
  if (!spec_path.empty()) {
    const auto spec = read_spec(spec_path);
    for (const auto& s : sessions)
      if (s.spec() != spec)
        throw Error(Errc::InvalidConfig, "session " + s.participant_id + " was not run on the given spec");
  }
  const auto report = bias_report(sessions);
  write_file(out, json(report).dump(2) + "\n");
  if (!design_out.empty()) write_file(design_out, design_csv(report.trials.design));
  return 0;
}

// Config file: {"model": ModelConfig, "train": TrainConfig}; both optional.
int cmd_train(const std::string& spec_path, const std::string& config_path, const std::string& out) {
  const auto spec = read_spec(spec_path);
  json cfg = config_path.empty() ? json::object() : read_json(config_path);
  for (const auto& [k, v] : cfg.items())
    if (k != "model" && k != "train") throw Error(Errc::InvalidConfig, "unknown config field: " + k);
  const auto mc = cfg.value("model", json::object()).get<seq2seq::ModelConfig>();
  const auto tc = cfg.value("train", json::object()).get<seq2seq::TrainConfig>();
  const auto split = seq2seq::generalization_split(spec);
  const auto init = seq2seq::init_model(mc, split.vocab, mix_seed(tc.seed, 0));
  const auto res = seq2seq::train(init, split.train, tc);
  std::ofstream os(out, std::ios::binary);
  if (!os) throw Error(Errc::Io, "cannot write " + out);
  seq2seq::save_params(os, res.params);
  json summary = {{"train_acc", seq2seq::exact_match(res.params, split.train)},
                  {"test_acc", seq2seq::exact_match(res.params, split.test)},
                  {"final_loss", res.loss_trace.empty() ? json(nullptr) : json(res.loss_trace.back())},
                  {"parameters", res.params.size()}};
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& out, int seeds, int presentations) {
  const auto spec = spec_path.empty() ? canonical_exp1() : read_spec(spec_path);
  seq2seq::TrainConfig tc;
  tc.presentations = presentations;
  const auto split = seq2seq::generalization_split(spec);
  std::vector<seq2seq::RunResult> rows;
  for (const auto& arch : seq2seq::default_architectures()) {
    for (int s = 0; s < seeds; ++s) {
      rows.push_back(seq2seq::run_one(split, arch, static_cast<std::uint64_t>(s), tc));
      const auto& r = rows.back();
      std::fprintf(stderr, "%s h=%d seed=%d train=%.3f test=%.3f\n", r.architecture.c_str(), r.hidden, s,
                   r.train_acc, r.test_acc);
    }
  }
  write_file(out, seq2seq::sweep_csv(rows));
  return 0;
}

int cmd_simulate(const std::string& spec_path, const std::string& profile_path, int n, std::uint64_t seed,
                 const std::string& out) {
  if (n < 0) throw Error(Errc::InvalidConfig, "--n must be nonnegative");
  const auto spec = read_spec(spec_path);
  const json profile = profile_path.empty() ? json::object() : read_json(profile_path);
  const auto pop = sim::population_from_json(profile, n, seed);
  write_file(out, write_sessions_jsonl(sim::simulate_population(spec, pop)));
  return 0;
}

service::ServerConfig read_server_config(const std::string& path) {
  return service::server_config_from_json(path.empty() ? json::object() : read_json(path));
}

int cmd_serve(const std::string& config_path) {
  service::SessionService svc(read_server_config(config_path));
  const auto& cfg = svc.config();
  std::fprintf(stderr, "serving %s on http://%s:%d (data in %s, %zu sessions loaded)\n",
               std::string(to_string(cfg.kind)).c_str(), cfg.host.c_str(), cfg.port, cfg.data_dir.c_str(),
               svc.store().size());
  service::serve(svc);
  return 0;
}

int cmd_export(const std::string& config_path, const std::string& kind, bool complete, const std::string& out) {
  service::SessionService svc(read_server_config(config_path));
  std::optional<ExperimentKind> k;
  if (!kind.empty()) k = parse_experiment_kind(kind);
  write_file(out, svc.export_sessions(k, complete));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot instruction learning: grammar, experiments, analysis, baselines and service"};
  app.require_subcommand(1);

  std::string text, lexicon, out = "-", spec, sessions, config, profile, design, kind;
  int exp = 1, n = 100, seeds = 5, presentations = 10000;
  std::uint64_t seed = 0;
  bool display = false, complete = false;

  auto* interp = app.add_subcommand("interpret", "Print the denotation of an instruction");
  interp->add_option("instruction", text, "Instruction words, space separated")->required();
  interp->add_option("--lexicon", lexicon, "Lexicon JSON file (default: canonical lexicon)");
  interp->add_flag("--display", display, "Print color names instead of COLORk");

  auto* gen = app.add_subcommand("gen-exp", "Generate an experiment specification");
  gen->add_option("--exp", exp, "Experiment 1, 2 or 3")->required();
  gen->add_option("--seed", seed, "Generation seed")->required();
  gen->add_option("--out", out, "Output file (- for stdout)");

  auto* grade = app.add_subcommand("grade", "Grade sessions");
  grade->add_option("--sessions", sessions, "Sessions JSONL file")->required();
  grade->add_option("--out", out, "Output file (- for stdout)");

  auto* analyze = app.add_subcommand("analyze", "Bias analysis report");
  analyze->add_option("--sessions", sessions, "Sessions JSONL file")->required();
  analyze->add_option("--spec", spec, "Check every session against this spec");
  analyze->add_option("--out", out, "Report JSON (- for stdout)");
  analyze->add_option("--design-csv", design, "Write the regression design matrix as CSV");

  auto* train = app.add_subcommand("train", "Train a sequence-to-sequence baseline");
  train->add_option("--spec", spec, "Curriculum spec JSON")->required();
  train->add_option("--config", config, "JSON with optional model and train sections");
  train->add_option("--out", out, "Parameter file")->required();

  auto* sweep = app.add_subcommand("sweep", "Architecture and seed sweep of the baselines");
  sweep->add_option("--spec", spec, "Curriculum spec JSON (default: canonical)");
  sweep->add_option("--out", out, "Results CSV")->required();
  sweep->add_option("--seeds", seeds, "Seeds per architecture")->check(CLI::PositiveNumber);
  sweep->add_option("--presentations", presentations, "Training presentations")->check(CLI::NonNegativeNumber);

  auto* simulate = app.add_subcommand("simulate", "Simulate participants");
  simulate->add_option("--spec", spec, "Spec JSON")->required();
  simulate->add_option("--profile", profile, "Bias profile or population JSON (default: perfect)");
  simulate->add_option("--n", n, "Number of participants");
  simulate->add_option("--seed", seed, "Population seed");
  simulate->add_option("--out", out, "Sessions JSONL (- for stdout)");

  auto* serve = app.add_subcommand("serve", "Run the experiment server");
  serve->add_option("--config", config, "Server config JSON");

  auto* exp_cmd = app.add_subcommand("export", "Export sessions from a data directory");
  exp_cmd->add_option("--config", config, "Server config JSON");
  exp_cmd->add_option("--kind", kind, "Only this experiment kind");
  exp_cmd->add_flag("--complete", complete, "Only complete sessions");
  exp_cmd->add_option("--out", out, "Sessions JSONL (- for stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*interp) return cmd_interpret(text, lexicon, display);
    if (*gen) return cmd_gen_exp(exp, seed, out);
    if (*grade) return cmd_grade(sessions, out);
    if (*analyze) return cmd_analyze(sessions, spec, out, design);
    if (*train) return cmd_train(spec, config, out);
    if (*sweep) return cmd_sweep(spec, out, seeds, presentations);
    if (*simulate) return cmd_simulate(spec, profile, n, seed, out);
    if (*serve) return cmd_serve(config);
    if (*exp_cmd) return cmd_export(config, kind, complete, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
