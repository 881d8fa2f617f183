// Copyright 2026 The prefdrive Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// prefdrive command line: questionnaire wizard, strategy table, single-scene
// planning and batch experiments.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prefdrive.hpp"

namespace fs = std::filesystem;
using namespace prefdrive;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNoPlan = 2;
constexpr int kExitIncomplete = 3;

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------- wizard

std::string question_text(const QuestionKey& k) {
  std::ostringstream os;
  os << "A " << to_string(k.b) << " target in the " << to_string(k.l) << " lane, "
     << to_string(k.r) << " of you, " << to_string(k.f) << " than you, doing "
     << to_string(k.t_m) << " while you do " << to_string(k.e_m) << ".\n"
     << "  clearance in meters, 'd' = I don't care, 'q' = stop for now " << k.str() << ": ";
  return os.str();
}

int run_wizard(const std::string& out_path, const std::string& profile) {
  std::map<QuestionKey, MarginAnswer> answers;
  std::string name = profile;
  if (fs::exists(out_path)) {
    auto in = open_input(out_path);
    const ResponseSet prev = parse_responses_partial(parse_json_document(in));
    answers = prev.answers();
    if (name.empty()) name = prev.profile_name();
    std::cout << "resuming " << out_path << " with " << answers.size() << " answers\n";
  }
  auto save = [&](bool incomplete) {
    write_file(out_path, serialize_responses(ResponseSet(name, answers), incomplete));
  };

  std::vector<QuestionKey> todo;
  for (const auto& [key, used] : enumerate_keys()) {
    if (used && !answers.contains(key)) todo.push_back(key);
  }
  std::size_t asked = 0;
  for (const auto& key : todo) {
    bool done = false;
    while (!done) {
      std::cout << '[' << (answers.size() + 1) << '/' << (answers.size() + todo.size() - asked)
                << "] " << question_text(key) << std::flush;
      std::string line;
      if (!std::getline(std::cin, line) || line == "q") {
        std::cout << '\n';
        save(true);
        std::cout << "saved partial answers to " << out_path << '\n';
        return kExitIncomplete;
      }
      line.erase(0, line.find_first_not_of(" \t"));
      line.erase(line.find_last_not_of(" \t\r") + 1);
      try {
        if (line == "d") {
          answers[key] = MarginAnswer::dont_care();
        } else {
          std::size_t used_chars = 0;
          const double m = std::stod(line, &used_chars);
          if (used_chars != line.size()) throw std::invalid_argument(line);
          answers[key] = MarginAnswer::meters(m);
        }
        done = true;
      } catch (const std::exception&) {
        std::cout << "  please enter a non-negative number, 'd' or 'q'\n";
      }
    }
    ++asked;
    save(true);
  }
  save(false);
  std::cout << "wrote " << answers.size() << " answers to " << out_path << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ plan

struct PlanArgs {
  std::string scene, responses, dump_space, dump_qp, svg;
  std::vector<int> ids;
  int jobs = 1;
};

int run_plan(const PlanArgs& a) {
  Scene scene;
  ResponseSet responses;
  try {
    auto in = open_input(a.scene);
    scene = load_scene(in);
    auto rin = open_input(a.responses);
    responses = load_responses(rin);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }

  PlannerConfig cfg;
  cfg.jobs = a.jobs;
  cfg.only_ids = a.ids;
  PlanResult r;
  try {
    r = plan(scene, responses, cfg);
  } catch (const NoFeasiblePlan& e) {
    std::cout << nlohmann::json{{"error", "no_feasible_plan"}, {"message", e.what()}}.dump(2)
              << '\n';
    return kExitNoPlan;
  }
  nlohmann::json diag = diagnostics_json(r, 0);
  nlohmann::json traj = nlohmann::json::array();
  for (const auto& s : r.trajectory.states) traj.push_back({s.x, s.y, s.v, s.psi});
  diag["trajectory"] = std::move(traj);
  std::cout << diag.dump(2) << '\n';

  if (!a.dump_space.empty()) write_file(a.dump_space, space_csv(r.space));
  if (!a.dump_qp.empty()) {
    const EgoState x0{scene.ego.x, scene.ego.y, scene.ego.v, scene.ego.psi, 0.0, 0.0};
    SolverConfig sc = cfg.solver;
    for (const auto& rep : r.reports) {
      if (rep.id == r.selected_id && rep.relaxed) {
        sc.speed_from = std::max(sc.speed_from, sc.relaxed_speed_from);
      }
    }
    const StrategyCatalog cat = catalog(cfg.speeds);
    const QpProblem qp = assemble(strategy_by_id(cat, r.selected_id), scene, r.space, x0,
                                  linearize(x0, cfg.space.dt, sc.vehicle), sc);
    std::ostringstream os;
    write_qp_triplets(os, condense(qp.ocp));
    write_file(a.dump_qp, os.str());
  }
  if (!a.svg.empty()) {
    std::vector<std::pair<double, double>> path;
    for (const auto& s : r.trajectory.states) path.emplace_back(s.x, s.y);
    write_file(a.svg, space_svg(r.space, scene, path));
  }
  // The emergency stop is not one of the considered strategies.
  return r.fallback ? kExitNoPlan : kExitOk;
}

// ----------------------------------------------------------------- bench

struct BenchArgs {
  int scenario = 1;
  int runs = 30;
  std::uint64_t seed = 1;
  std::string responses, out;
  int jobs = 1;
  bool baseline = false;
};

int run_bench(const BenchArgs& a) {
  ResponseSet responses;
  try {
    auto in = open_input(a.responses);
    responses = load_responses(in);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }

  std::vector<SimConfig> cfgs;
  for (int i = 0; i < a.runs; ++i) cfgs.push_back(scenario_preset(a.scenario, a.seed + i));
  const std::string ours = responses.profile_name().empty() ? "preference-aware"
                                                            : responses.profile_name();
  std::vector<std::pair<std::string, std::vector<SimLog>>> batches;
  batches.emplace_back(ours, run_batch(cfgs, responses, a.jobs));
  if (a.baseline) {
    for (auto& c : cfgs) c.baseline = true;
    batches.emplace_back("baseline", run_batch(cfgs, responses, a.jobs));
  }

  std::vector<BatchRow> rows;
  for (const auto& [name, logs] : batches) rows.push_back(aggregate(name, logs));
  const std::string title = "scenario " + std::to_string(a.scenario) + ", " +
                            std::to_string(a.runs) + " runs from seed " + std::to_string(a.seed);
  const std::string text = report_text(title, rows);
  std::cout << text;

  if (!a.out.empty()) {
    fs::create_directories(a.out);
    const fs::path dir(a.out);
    nlohmann::json report = {{"scenario", a.scenario},
                             {"runs", a.runs},
                             {"seed", a.seed},
                             {"rows", report_json(rows)}};
    nlohmann::json per_run = nlohmann::json::array();
    for (const auto& [name, logs] : batches) {
      for (const auto& log : logs) {
        const std::string stem = name + "_seed" + std::to_string(log.config.seed);
        write_file(dir / (stem + ".csv"), log_csv(log));
        nlohmann::json s = summary_json(log);
        s["planner"] = name;
        per_run.push_back(std::move(s));
      }
    }
    report["per_run"] = std::move(per_run);
    write_file(dir / "report.json", report.dump(2) + "\n");
    write_file(dir / "report.txt", text);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference-aware highway planner"};
  app.require_subcommand(1);

  std::string wizard_out = "responses.json", wizard_profile;
  auto* wizard = app.add_subcommand("wizard", "Answer the clearance questionnaire");
  wizard->add_option("--out", wizard_out, "Response file (resumed if it exists)");
  wizard->add_option("--profile", wizard_profile, "Profile name stored in the file");

  bool dump = false;
  auto* cat = app.add_subcommand("catalog", "Print the strategy table");
  cat->add_flag("--dump", dump, "CSV output");

  PlanArgs pa;
  auto* plan_cmd = app.add_subcommand("plan", "Run one planning cycle on a scene");
  plan_cmd->add_option("--scene", pa.scene, "Scene JSON")->required();
  plan_cmd->add_option("--responses", pa.responses, "Response JSON")->required();
  plan_cmd->add_option("--strategy", pa.ids, "Only consider these strategy ids")
      ->delimiter(',')
      ->check(CLI::Range(1, kStrategyCount));
  plan_cmd->add_option("--jobs", pa.jobs, "Worker threads")->check(CLI::PositiveNumber);
  plan_cmd->add_option("--dump-space", pa.dump_space, "Write the selected corridor as CSV");
  plan_cmd->add_option("--dump-qp", pa.dump_qp, "Write the selected QP as triplets");
  plan_cmd->add_option("--svg", pa.svg, "Write an SVG of corridor and trajectory");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Closed-loop batch experiment");
  bench->add_option("--scenario", ba.scenario, "1, 2 (2 lanes) or 3 (3 lanes, mixed sizes)")
      ->check(CLI::Range(1, 3));
  bench->add_option("--runs", ba.runs, "Number of seeds")->check(CLI::PositiveNumber);
  bench->add_option("--seed", ba.seed, "First seed");
  bench->add_option("--responses", ba.responses, "Response JSON")->required();
  bench->add_option("--jobs", ba.jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  bench->add_flag("--baseline", ba.baseline, "Also run the preference-agnostic baseline");
  bench->add_option("--out", ba.out, "Directory for report and per-run CSVs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (*wizard) return run_wizard(wizard_out, wizard_profile);
    if (*cat) {
      const StrategyCatalog c = catalog();
      if (dump) {
        std::cout << catalog_csv(c);
      } else {
        for (const auto& s : c) std::cout << s.id << '\t' << s.description << '\n';
      }
      return kExitOk;
    }
    if (*plan_cmd) return run_plan(pa);
    if (*bench) return run_bench(ba);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
