// Acceptance harness: one PASS/FAIL line per primary criterion.
//
//   acceptance [--only NAME]... [--cli PATH] [--seeds N]
//
// Exit status is nonzero when any selected criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fewshot/bias.hpp"
#include "fewshot/grammar.hpp"
#include "fewshot/protocol.hpp"
#include "fewshot/seq2seq.hpp"
#include "fewshot/service.hpp"
#include "fewshot/sim.hpp"
#include "grammar_oracle.hpp"
#include "sim_oracle.hpp"

#ifndef FEWSHOT_CLI_PATH
#define FEWSHOT_CLI_PATH "fewshot"
#endif

namespace {

using namespace fewshot;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- grammar

Outcome grammar_golden() {
  const auto lex = Lexicon::canonical();
  const std::pair<const char*, const char*> cases[] = {
      {"dax fep", "RED RED RED"},
      {"wif blicket dax", "GREEN RED GREEN"},
      {"dax kiki lug", "BLUE RED"},
      {"wif blicket dax kiki lug", "BLUE GREEN RED GREEN"},
      {"lug blicket wif", "BLUE GREEN BLUE"},
  };
  int ok = 0;
  std::string bad;
  for (auto [in, out] : cases) {
    const auto got = interpret(Instruction::parse(in), lex);
    if (got == parse_output(out)) ++ok;
    else bad += std::string(" '") + in + "' gave " + to_string(got);
  }
  return {ok == 5, fmt("%d/5 mappings exact", ok) + bad};
}

Outcome oracle_equivalence() {
  const auto lex = Lexicon::canonical();
  constexpr std::size_t kMaxWords = 6;
  const auto lang = oracle::language(lex, kMaxWords);
  const auto& words = lex.words();

  // every word string up to six words: the parser accepts exactly the
  // oracle's language and agrees on each denotation
  std::size_t checked = 0, accepted = 0, mismatches = 0;
  std::vector<std::size_t> idx;
  std::function<void()> walk = [&] {
    if (!idx.empty()) {
      std::vector<std::string> ws;
      std::string key;
      for (auto i : idx) {
        ws.push_back(words[i]);
        key += (key.empty() ? "" : " ") + words[i];
      }
      const auto got = try_interpret(Instruction(ws), lex);
      const auto it = lang.find(key);
      ++checked;
      if (got) ++accepted;
      if (got.has_value() != (it != lang.end())) ++mismatches;
      else if (got && (it->second.size() != 1 || *it->second.begin() != oracle::ids(*got))) ++mismatches;
    }
    if (idx.size() == kMaxWords) return;
    for (std::size_t w = 0; w < words.size(); ++w) {
      idx.push_back(w);
      walk();
      idx.pop_back();
    }
  };
  walk();

  // the enumerator lists the same language
  std::size_t enumerated = 0;
  for (const auto& [instr, out] : enumerate_instructions(lex, {}, kMaxWords)) {
    ++enumerated;
    const auto it = lang.find(instr.str());
    if (it == lang.end() || *it->second.begin() != oracle::ids(out)) ++mismatches;
  }
  if (enumerated != lang.size()) ++mismatches;
  return {mismatches == 0 && accepted == lang.size(),
          fmt("%zu word strings, %zu well-formed, %zu enumerated, %zu mismatches", checked, accepted, enumerated,
              mismatches)};
}

// ---------------------------------------------------------------- seq2seq

Outcome rnn_sweep(int n_seeds) {
  const auto spec = canonical_exp1();
  const auto archs = seq2seq::default_architectures();
  const auto rows = seq2seq::run_generalization_experiment(spec, archs, n_seeds);
  bool ok = true;
  double worst_train = 1, worst_test = 0;
  std::ostringstream table;
  for (const auto& s : seq2seq::summarize(rows)) {
    table << fmt("\n    %-10s h=%-3d train=%.3f test=%.3f", s.architecture.c_str(), s.hidden, s.mean_train_acc,
                 s.mean_test_acc);
    if (s.hidden >= 25) {
      worst_train = std::min(worst_train, s.mean_train_acc);
      ok = ok && s.mean_train_acc >= 0.95;
    }
    worst_test = std::max(worst_test, s.mean_test_acc);
    ok = ok && s.mean_test_acc <= 0.10;
  }
  return {ok, fmt("%zu architectures x %d seeds; min mean train (h>=25) %.3f, max mean test %.3f", archs.size(),
                  n_seeds, worst_train, worst_test) +
                  table.str()};
}

double max_gradient_error(const seq2seq::ModelConfig& cfg, int n_coords) {
  using namespace seq2seq;
  const auto split = generalization_split(canonical_exp1());
  auto p = init_model(cfg, split.vocab, 11);
  for (auto& x : p.theta) x *= 6.25;
  Network<double> net(p.config, p.vocab);
  const auto& item = split.train[5];
  const auto input = p.vocab.encode_input(item.instruction);
  const auto target = p.vocab.encode_target(*item.target);
  const ForwardOptions opt{true, 1.0};
  std::vector<double> grad(p.size(), 0.0);
  Rng r(99);
  net.loss(p.theta.data(), input, target, opt, &r, grad.data());
  const double eps = 1e-4;
  Rng pick(5);
  double worst = 0;
  for (int k = 0; k < n_coords; ++k) {
    const auto i = uniform_index(pick, p.size());
    auto th = p.theta;
    th[i] += eps;
    Rng a(99);
    const double lp = net.loss(th.data(), input, target, opt, &a);
    th[i] -= 2 * eps;
    Rng b(99);
    const double lm = net.loss(th.data(), input, target, opt, &b);
    const double fd = (lp - lm) / (2 * eps);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max(std::abs(fd) + std::abs(grad[i]), 1e-10));
  }
  return worst;
}

Outcome gradient_check() {
  const double plain = max_gradient_error({2, 4, 0.3, false, 0}, 250);
  const double attn = max_gradient_error({1, 4, 0.3, true, 0}, 250);
  return {plain < 1e-4 && attn < 1e-4,
          fmt("hidden=4, 250 coordinates each: max rel. error %.2e (2-layer), %.2e (attention)", plain, attn)};
}

// ---------------------------------------------------------------- simulation / analysis

sim::BiasProfile curriculum_profile(double correct, double oto, double fwd, double lapse, double catch_miss) {
  sim::BiasProfile p;
  p.p_correct = correct;
  p.p_one_to_one = oto;
  p.p_forward_concat = fwd;
  p.p_lapse = lapse;
  p.p_catch_miss = catch_miss;
  return p;
}

sim::BiasProfile me_profile(double p_me, double counter, double pool, double catch_miss) {
  sim::BiasProfile p;
  p.p_me = p_me;
  p.me_counter_logit = counter;
  p.me_pool_logit = pool;
  p.p_catch_miss = catch_miss;
  return p;
}

// Monotone ME effects: more contradicting words and a larger pool both raise ME violation.
sim::SimulatedPopulation me_population() {
  return {{{"strong", me_profile(0.97, 0.5, 0.6, 0.01), 600}, {"weak", me_profile(0.9, 0.4, 0.3, 0.03), 400}}, 2024};
}

Outcome pipeline_closure() {
  bool ok = true;
  std::ostringstream detail;

  const auto exp1 = generate_exp1(31);
  const sim::SimulatedPopulation cur{
      {{"a", curriculum_profile(0.6, 0.5, 0.3, 0.2, 0.02), 500}, {"b", curriculum_profile(0.75, 0.2, 0.6, 0.2, 0.05), 500}},
      1001};
  const auto rep = bias_report(sim::simulate_population(exp1, cur));
  oracle::CurriculumExpectation e;
  for (const auto& g : cur.groups)
    e.add(oracle::curriculum_expectation(exp1, g.profile), g.count * oracle::p_included(exp1, g.profile));
  const double oto = *rep.curriculum.one_to_one_share(), kiki = *rep.curriculum.kiki_no_reverse_share();
  ok = ok && std::abs(oto - e.one_to_one_share()) <= 0.03 && std::abs(kiki - e.kiki_share()) <= 0.03;
  detail << fmt("one-to-one share %.3f vs %.3f; kiki-no-reverse share %.3f vs %.3f", oto, e.one_to_one_share(), kiki,
                e.kiki_share());

  const auto exp2 = generate_exp2(32);
  const auto pop = me_population();
  const auto rep2 = bias_report(sim::simulate_population(exp2, pop));
  double worst = 0;
  for (const auto& cell : rep2.trials.me_cells) {
    double num = 0, den = 0;
    for (const auto& g : pop.groups) {
      const double w = g.count * oracle::p_included(exp2, g.profile);
      num += w * oracle::me_follow(g.profile, cell.n_contradictory, cell.pool_size > 2);
      den += w;
    }
    const double diff = std::abs(cell.rate() - num / den);
    worst = std::max(worst, diff);
    detail << fmt("\n    ME n=%d pool=%d: %.3f vs %.3f (n=%zu)", cell.n_contradictory, cell.pool_size, cell.rate(),
                  num / den, cell.n);
  }
  ok = ok && rep2.trials.me_cells.size() == 6 && worst <= 0.03;
  return {ok, fmt("n=1000 per population, max ME cell deviation %.3f; ", worst) + detail.str()};
}

Outcome regression_recovery() {
  bool ok = true;
  std::ostringstream detail;

  const Eigen::Vector3d truth(-1.0, 0.8, 1.1);
  Rng rng(1);
  std::vector<MeRow> rows;
  for (int i = 0; i < 5000; ++i) {
    MeRow r{static_cast<int>(uniform_index(rng, 3)), uniform_index(rng, 2) ? 6 : 2, false};
    const double eta = truth[0] + truth[1] * r.n_contradictory + truth[2] * (r.pool_size > 2);
    r.me_violated = bernoulli(rng, 1.0 / (1.0 + std::exp(-eta)));
    rows.push_back(r);
  }
  const auto fit = fit_me_logistic(rows);
  for (int k = 0; k < 3; ++k) {
    const double dev = std::abs(fit.beta[k] - truth[k]) / fit.se[k];
    ok = ok && dev <= 2.0;
    detail << fmt("%s%s %.3f (true %.1f, %.2f SE)", k ? "; " : "synthetic n=5000: ", fit.names[k].c_str(),
                  fit.beta[k], truth[k], dev);
  }

  const auto rep = bias_report(sim::simulate_population(generate_exp2(33), me_population()));
  if (!rep.trials.fit) {
    ok = false;
    detail << "; simulated fit failed: " << rep.trials.fit_error;
  } else {
    const auto& f = *rep.trials.fit;
    ok = ok && f.beta[1] > 0 && f.beta[2] > 0 && f.z[1] > 2 && f.z[2] > 2;
    detail << fmt("; simulated Exp2 (%zu rows): n_contradictory b=%.3f z=%.2f, large_pool b=%.3f z=%.2f",
                  rep.trials.design.size(), f.beta[1], f.z[1], f.beta[2], f.z[2]);
  }

  bool raised = false;
  try {
    fit_me_logistic(std::vector<MeRow>(200, MeRow{1, 6, true}));
  } catch (const Error& e) {
    raised = e.code() == Errc::Separation || e.code() == Errc::DegenerateDesign;
    detail << "; identical outcomes -> " << to_string(e.code());
  }
  ok = ok && raised;
  return {ok, detail.str()};
}

// ---------------------------------------------------------------- determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

// Fills a data directory through the service with simulated participants.
void populate_store(const fs::path& dir) {
  service::ServerConfig cfg;
  cfg.data_dir = dir.string();
  cfg.seed_policy = service::SeedPolicy::Fresh;
  cfg.entropy_seed = 5;
  auto t = std::make_shared<std::int64_t>(0);
  service::SessionService svc(cfg, [t] { return (*t)++; });
  const auto profile = curriculum_profile(0.7, 0.5, 0.3, 0.2, 0.05);
  for (int i = 0; i < 6; ++i) {
    const auto kind = static_cast<ExperimentKind>(i % 3);
    const auto created = svc.create_session(std::string(to_string(kind)));
    const std::string id = created.at("session_id");
    const auto spec = generate_experiment(kind, created.at("seed").get<std::uint64_t>());
    Rng rng(static_cast<std::uint64_t>(i));
    const auto respond = sim::make_responder(spec, profile, rng);
    for (;;) {
      const auto step = svc.next_item(id);
      if (step.at("status") == "done") break;
      const Replay r = replay(spec, svc.store().get(id)->records);
      std::vector<std::string> symbols;
      for (auto c : respond(*r.pending)) symbols.push_back(c.name());
      svc.submit_response(id, r.pending->item->id, symbols);
    }
  }
}

Outcome determinism(const std::string& cli) {
  const fs::path dir = fs::temp_directory_path() / ("fewshot-accept-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const std::string& name) { return (dir / name).string(); };
  std::ofstream(p("profile.json"))
      << R"({"groups":[{"name":"a","count":1,"profile":{"p_correct":0.6,"p_one_to_one":0.5,"p_forward_concat":0.3,"p_lapse":0.2,"p_catch_miss":0.05}},)"
      << R"({"name":"b","count":1,"profile":{"p_me":0.9,"me_counter_logit":0.5,"me_pool_logit":0.5}}]})";
  std::ofstream(p("train.json"))
      << R"({"model":{"layers":1,"hidden":16,"dropout":0.1,"attention":true},"train":{"presentations":400,"seed":3}})";

  std::vector<std::pair<std::string, bool>> checks;
  auto twice = [&](const std::string& name, const std::string& cmd_a, const std::string& cmd_b,
                   const std::string& out_a, const std::string& out_b) {
    const bool ran = run(cmd_a) == 0 && run(cmd_b) == 0;
    const auto a = slurp(out_a), b = slurp(out_b);
    checks.emplace_back(name, ran && !a.empty() && a == b);
  };
  for (int exp : {1, 2, 3}) {
    const std::string e = std::to_string(exp);
    twice("gen-exp " + e, cli + " gen-exp --exp " + e + " --seed 9 --out " + p("spec" + e + "a.json"),
          cli + " gen-exp --exp " + e + " --seed 9 --out " + p("spec" + e + "b.json"), p("spec" + e + "a.json"),
          p("spec" + e + "b.json"));
    twice("simulate " + e,
          cli + " simulate --spec " + p("spec" + e + "a.json") + " --profile " + p("profile.json") +
              " --n 40 --seed 4 --out " + p("sim" + e + "a.jsonl"),
          cli + " simulate --spec " + p("spec" + e + "b.json") + " --profile " + p("profile.json") +
              " --n 40 --seed 4 --out " + p("sim" + e + "b.jsonl"),
          p("sim" + e + "a.jsonl"), p("sim" + e + "b.jsonl"));
  }
  twice("train", cli + " train --spec " + p("spec1a.json") + " --config " + p("train.json") + " --out " + p("a.bin"),
        cli + " train --spec " + p("spec1a.json") + " --config " + p("train.json") + " --out " + p("b.bin"), p("a.bin"),
        p("b.bin"));

  populate_store(dir / "store_a");
  populate_store(dir / "store_b");
  std::ofstream(p("serve_a.json")) << nlohmann::json{{"data_dir", p("store_a")}}.dump();
  std::ofstream(p("serve_b.json")) << nlohmann::json{{"data_dir", p("store_b")}}.dump();
  twice("export", cli + " export --config " + p("serve_a.json") + " --out " + p("export_a.jsonl"),
        cli + " export --config " + p("serve_b.json") + " --out " + p("export_b.jsonl"), p("export_a.jsonl"),
        p("export_b.jsonl"));
  twice("re-export", cli + " export --config " + p("serve_a.json") + " --out " + p("export_a2.jsonl"),
        cli + " export --config " + p("serve_a.json") + " --out " + p("export_a3.jsonl"), p("export_a2.jsonl"),
        p("export_a3.jsonl"));

  fs::remove_all(dir);
  std::string detail;
  bool ok = true;
  for (const auto& [name, same] : checks) {
    ok = ok && same;
    detail += (detail.empty() ? "" : ", ") + name + (same ? " identical" : " DIFFERS");
  }
  return {ok, detail};
}

// ---------------------------------------------------------------- exclusion

Outcome exclusion_logic() {
  const auto spec = generate_exp1(17);
  std::vector<std::string> catch_ids;
  for (const auto& s : spec.stages)
    for (const auto& it : s.test)
      if (it.is_catch) catch_ids.push_back(it.id);
  auto wrong = [](const Item& it) {
    OutputSeq out = *it.target;
    out.push_back(out.front());
    return out;
  };
  bool ok = catch_ids.size() >= 2;
  std::string detail;
  for (std::size_t misses : {0u, 1u, 2u}) {
    const auto s = run_session(spec, "p", [&](const PendingStep& step) {
      const auto pos = std::find(catch_ids.begin(), catch_ids.end(), step.item->id);
      if (pos != catch_ids.end() && static_cast<std::size_t>(pos - catch_ids.begin()) < misses) return wrong(*step.item);
      return *step.item->target;
    });
    const auto res = grade_session(s);
    ok = ok && res.excluded == (misses >= 2);
    detail += fmt("%zu missed -> excluded=%s; ", misses, res.excluded ? "true" : "false");
  }
  for (std::size_t failed = 0; failed < spec.stages.size(); ++failed) {
    const auto s = run_session(spec, "p", [&](const PendingStep& step) {
      if (step.phase == Phase::Quiz && step.stage_index == failed) return wrong(*step.item);
      return *step.item->target;
    });
    const auto res = grade_session(s);
    for (std::size_t k = 0; k < res.stages.size(); ++k) ok = ok && res.stages[k].excluded == (k == failed);
    ok = ok && !res.excluded;
    const auto agg = aggregate(std::vector<ParticipantResult>{res});
    ok = ok && !agg.per_stage.contains(std::string(to_string(spec.stages[failed].kind)));
  }
  detail += fmt("quiz failure in each of %zu stages excludes only that stage", spec.stages.size());
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<std::string> only;
  std::string cli = FEWSHOT_CLI_PATH;
  int seeds = 5;
  app.add_option("--only", only, "Run only these criteria (by name)");
  app.add_option("--cli", cli, "Path to the command-line tool");
  app.add_option("--seeds", seeds, "Seeds per architecture in the baseline sweep")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"grammar-golden", grammar_golden},
      {"oracle-equivalence", oracle_equivalence},
      {"rnn-failure", [&] { return rnn_sweep(seeds); }},
      {"gradient-check", gradient_check},
      {"pipeline-closure", pipeline_closure},
      {"regression-recovery", regression_recovery},
      {"determinism", [&] { return determinism(cli); }},
      {"exclusion-logic", exclusion_logic},
  };
  const std::map<std::string, double> budget_s = {
      {"grammar-golden", 1},       {"oracle-equivalence", 10}, {"rnn-failure", 1800},
      {"gradient-check", 60},      {"pipeline-closure", 120},  {"regression-recovery", 120},
      {"determinism", 300},        {"exclusion-logic", 10},
  };

  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double limit = budget_s.at(name);
    const bool pass = o.pass && secs <= limit;
    failed += pass ? 0 : 1;
    std::printf("%s %-20s %.2fs (limit %.0fs)  %s\n", pass ? "PASS" : "FAIL", name.c_str(), secs, limit,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
