// Copyright 2026 The mixq Authors
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


// mixq command-line tool. Exit codes: 0 ok, 1 usage, 2 validation, 3 runtime.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mixq/codegen.hpp"
#include "mixq/error.hpp"
#include "mixq/eval.hpp"
#include "mixq/explorer.hpp"
#include "mixq/hwsim.hpp"
#include "mixq/proxy.hpp"
#include "mixq/sampler.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mixq::cli {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

std::uint64_t default_seed() {
  const char* env = std::getenv("MIXQ_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(std::string("MIXQ_SEED is not an unsigned integer: ") + env);
  }
}

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Run manifest. The copy embedded in artifacts has no timestamps so that
// reruns are byte-identical; the sidecar adds them.
struct Manifest {
  std::string command;
  json config;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string started;

  json embedded() const {
    const auto dump = config.dump();
    return {{"command", command},
            {"config_hash", fnv1a64_hex({reinterpret_cast<const std::uint8_t*>(dump.data()), dump.size()})},
            {"seed", seed},
            {"inputs", inputs},
            {"outputs", outputs}};
  }

  void write_sidecar(const fs::path& artifact) const {
    auto j = embedded();
    j["config"] = config;
    j["started"] = started;
    j["finished"] = iso_now();
    write_text(fs::path(artifact.string() + ".run.json"), j.dump(2) + "\n");
  }

  static void write_text(const fs::path& path, const std::string& text) {
    write_file_bytes(path, std::span<const std::uint8_t>(
                               reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
};

json read_json(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  Manifest::write_text(path, j.dump(2) + "\n");
}

BitwidthSet parse_bits(const std::string& spec) {
  if (spec == "qat") return BitwidthSet::qat();
  if (spec == "ptq") return BitwidthSet::ptq();
  std::vector<int> bits;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      bits.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("bad bitwidth list '" + spec + "'");
    }
  }
  return BitwidthSet::from(bits);
}

ProxyKind parse_kind(const std::string& s) {
  if (s == "linear") return ProxyKind::kLinearCbops;
  if (s == "tree") return ProxyKind::kTreeCbops;
  return proxy_kind_from_string(s);
}

HwConfig resolve_hw(const std::string& spec) {
  if (spec == "cpu-tiny") return HwConfig::cpu_tiny();
  if (spec == "cpu-small") return HwConfig::cpu_small();
  if (spec == "cpu-high") return HwConfig::cpu_high();
  if (spec == "systolic") return HwConfig::systolic_32x16();
  return load_hw_config(spec);
}

// ---- profile ---------------------------------------------------------------

struct ProfileArgs {
  std::string hw, plan, bits = "qat", out;
};

int cmd_profile(const ProfileArgs& a, std::uint64_t seed) {
  Manifest m{"profile", {{"hw", a.hw}, {"plan", a.plan}, {"bits", a.bits}}, seed, {a.hw}, {a.out}, iso_now()};
  const auto hw = resolve_hw(a.hw);
  BenchmarkPlan plan = BenchmarkPlan::default_plan();
  if (!a.plan.empty()) {
    plan = load_plan(a.plan);
    m.inputs.push_back(a.plan);
  }
  if (plan.matmul.empty() && plan.conv2d.empty()) {
    throw ValidationError("benchmark plan has no kernels");
  }
  const auto profile = run_kernel_benchmarks(hw, plan, parse_bits(a.bits));
  auto j = to_json(profile);
  j["manifest"] = m.embedded();
  write_json(a.out, j);
  m.write_sidecar(a.out);
  std::cout << "profile: " << profile.records.size() << " records on " << profile.hardware_id
            << " -> " << a.out << "\n";
  return kExitOk;
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
  std::string profile, kind = "linear", out;
  double holdout = 0.2;
};

int cmd_fit(const FitArgs& a, std::uint64_t seed) {
  Manifest m{"fit", {{"profile", a.profile}, {"kind", a.kind}, {"holdout", a.holdout}}, seed,
             {a.profile}, {a.out}, iso_now()};
  const auto profile = load_profile(a.profile);
  FitOptions opt;
  opt.seed = seed;
  opt.holdout_fraction = a.holdout;
  opt.forest.seed = seed;
  const auto model = fit_proxy(profile, parse_kind(a.kind), opt);
  auto j = model.to_json();
  j["manifest"] = m.embedded();
  write_json(a.out, j);
  m.write_sidecar(a.out);
  std::cout << "fit: " << to_string(model.kind()) << " holdout R2 " << model.report().r2
            << " -> " << a.out << "\n";
  return kExitOk;
}

// ---- explore ---------------------------------------------------------------

struct ExploreArgs {
  std::string network, mode = "oracle", bits = "qat", proxy = "bops", dataset, out;
  double ratio = 0.0;
  std::optional<double> constraint;
  int budget = 48;
  int n_init = 16;
  int pretrain_epochs = 20;
  std::optional<std::uint64_t> oracle_seed;
  bool no_protect_ends = false;
};

int cmd_explore(const ExploreArgs& a, std::uint64_t seed) {
  Manifest m{"explore",
             {{"network", a.network}, {"mode", a.mode}, {"bits", a.bits}, {"proxy", a.proxy},
              {"ratio", a.ratio}, {"budget", a.budget}, {"n_init", a.n_init},
              {"dataset", a.dataset}, {"protect_ends", !a.no_protect_ends}},
             seed, {a.network}, {a.out}, iso_now()};
  if (a.constraint) m.config["constraint"] = *a.constraint;

  const auto net = load_network(a.network);
  SearchConfig cfg;
  cfg.mode = search_mode_from_string(a.mode);
  cfg.ratio = a.ratio;
  cfg.absolute = a.constraint;
  cfg.budget = a.budget;
  cfg.seed = seed;
  cfg.sampler.bitwidths = parse_bits(a.bits);
  cfg.sampler.n_init = a.n_init;
  cfg.sampler.protect_ends = !a.no_protect_ends;
  if (a.constraint && a.ratio == 0.0) cfg.ratio = 1.0;
  cfg.validate();

  const auto& set = cfg.sampler.bitwidths;
  std::optional<CostTable> cost;
  if (a.proxy == "bops") {
    cost = CostTable::bops(net, set);
  } else {
    const auto model = load_proxy(a.proxy);
    cfg.cost_kind = to_string(model.kind());
    cost = CostTable::proxy(model, net, set);
    m.inputs.push_back(a.proxy);
  }

  Evaluator eval;
  std::optional<SyntheticOracle> oracle;
  std::optional<Dataset> data;
  if (cfg.mode == SearchMode::kOracle) {
    oracle = SyntheticOracle::make(net.size(), a.oracle_seed.value_or(seed));
    m.config["oracle_seed"] = a.oracle_seed.value_or(seed);
    eval = [&](const QuantScheme& s) { return oracle->accuracy(s); };
  } else {
    if (!net.has_weights()) throw ValidationError("ptq/qat search needs a network with weights");
    if (a.dataset.empty()) throw ValidationError("ptq/qat search needs --dataset");
    data = load_dataset(a.dataset);
    m.inputs.push_back(a.dataset);
    if (cfg.mode == SearchMode::kPtq) {
      eval = [&](const QuantScheme& s) { return ptq_evaluate(net, s, *data); };
    } else {
      TrainConfig pre;
      pre.epochs = a.pretrain_epochs;
      pre.seed = seed;
      eval = [&, pre](const QuantScheme& s) {
        return qat_evaluate(net, s, *data, pre, QatBudget::kShort, seed);
      };
    }
  }

  SearchResult result;
  try {
    result = explore(*cost, cfg, eval);
  } catch (const SearchAborted& e) {
    SearchResult partial;
    partial.state = e.partial();
    auto j = to_json(partial, cfg);
    j["aborted"] = e.what();
    j["network"] = net.name;
    j["manifest"] = m.embedded();
    write_json(a.out + ".partial", j);
    throw;
  }
  auto j = to_json(result, cfg);
  j["network"] = net.name;
  j["manifest"] = m.embedded();
  write_json(a.out, j);
  m.write_sidecar(a.out);
  std::cout << "explore: best " << result.best.to_string() << " accuracy " << result.accuracy
            << " cost " << result.cost << " / " << result.state.constraint << " after "
            << result.state.samples.size() << " evaluations -> " << a.out << "\n";
  return kExitOk;
}

// ---- codegen ---------------------------------------------------------------

struct CodegenArgs {
  std::string result, network, out;
};

int cmd_codegen(const CodegenArgs& a, std::uint64_t seed) {
  Manifest m{"codegen", {{"result", a.result}, {"network", a.network}}, seed,
             {a.result, a.network}, {}, iso_now()};
  const auto res = result_from_json(read_json(a.result));
  const auto net = load_network(a.network);
  if (!net.has_weights()) {
    throw ValidationError("network '" + net.name + "' has no weights to deploy");
  }
  const auto plan = build_plan(net, res.best);
  const fs::path out(a.out);
  const auto files = emit_source(plan, out);
  for (const auto& f : files) m.outputs.push_back((out / f.name).string());
  auto manifest = read_json(out / "manifest.json");
  manifest["run"] = m.embedded();
  write_json(out / "manifest.json", manifest);
  m.write_sidecar(out / "manifest.json");
  std::cout << "codegen: " << plan.calls.size() << " kernel calls, arena " << plan.arena_bytes
            << " bytes -> " << out.string() << "\n";
  for (const auto& n : plan.notes) std::cout << "note: " << n << "\n";
  return kExitOk;
}

// ---- report ----------------------------------------------------------------

struct ReportArgs {
  std::string runs, out;
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

int cmd_report(const ReportArgs& a, std::uint64_t seed) {
  Manifest m{"report", {{"runs", a.runs}}, seed, {}, {a.out}, iso_now()};
  if (!fs::is_directory(a.runs)) throw IoError("not a directory: " + a.runs);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.runs)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".json" &&
        name.find(".run.json") == std::string::npos) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::ostringstream table, traces;
  table << "file,network,mode,cost_kind,ratio,constraint,budget,seed,evaluations,best_scheme,"
           "accuracy,cost\n";
  traces << "file,sample,best_accuracy\n";
  int rows = 0;
  for (const auto& f : files) {
    const auto j = read_json(f);
    if (!j.contains("trace") || !j.contains("best")) continue;  // not a search result
    const auto r = result_from_json(j);
    const auto& c = j.value("config", json::object());
    const auto name = f.filename().string();
    table << csv_field(name) << "," << csv_field(j.value("network", "")) << ","
          << c.value("mode", "") << "," << c.value("cost_kind", "") << ","
          << c.value("constraint_ratio", 0.0) << "," << r.state.constraint << "," << c.value("budget", 0)
          << "," << c.value("seed", std::uint64_t{0}) << "," << r.state.samples.size() << ","
          << csv_field(r.best.to_string()) << "," << r.accuracy << "," << r.cost << "\n";
    for (std::size_t i = 0; i < r.state.trace.size(); ++i) {
      traces << csv_field(name) << "," << i << "," << r.state.trace[i] << "\n";
    }
    m.inputs.push_back(f.string());
    ++rows;
  }
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  Manifest::write_text(out, table.str());
  fs::path trace_path = out;
  trace_path.replace_extension(".trace.csv");
  Manifest::write_text(trace_path, traces.str());
  m.outputs.push_back(trace_path.string());
  m.write_sidecar(out);
  std::cout << "report: " << rows << " results -> " << out.string() << ", " << trace_path.string()
            << "\n";
  return kExitOk;
}

// ---- fixture ---------------------------------------------------------------

struct FixtureArgs {
  std::string out;
  std::uint64_t fixture_seed = 7;
};

int cmd_fixture(const FixtureArgs& a, std::uint64_t seed) {
  Manifest m{"fixture", {{"fixture_seed", a.fixture_seed}}, seed, {}, {}, iso_now()};
  const fs::path out(a.out);
  fs::create_directories(out / "hw");
  const auto fx = make_tiny_mlp(a.fixture_seed);
  save_network(fx.net, out / "tiny_mlp.json");
  save_dataset(fx.data, out / "tiny_mlp.data.bin");
  for (const auto& hw : {HwConfig::cpu_tiny(), HwConfig::cpu_small(), HwConfig::cpu_high(),
                         HwConfig::systolic_32x16()}) {
    write_json(out / "hw" / (hw.id + ".json"), to_json(hw));
    m.outputs.push_back((out / "hw" / (hw.id + ".json")).string());
  }
  write_json(out / "benchmark_plan.json", to_json(BenchmarkPlan::default_plan()));
  m.outputs.insert(m.outputs.end(), {(out / "tiny_mlp.json").string(),
                                     (out / "tiny_mlp.weights.bin").string(),
                                     (out / "tiny_mlp.data.bin").string(),
                                     (out / "benchmark_plan.json").string()});
  m.write_sidecar(out / "tiny_mlp.json");
  std::cout << "fixture: tiny MLP (float accuracy " << fx.net.float_accuracy << "), hardware "
            << "presets and benchmark plan -> " << out.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"mixq: mixed-precision quantization search and deployment"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed_opt;

  ProfileArgs pa;
  auto* profile = app.add_subcommand("profile", "Benchmark kernels on a simulated target");
  profile->add_option("--hw", pa.hw, "Hardware config JSON or preset (cpu-tiny, cpu-small, cpu-high, systolic)")->required();
  profile->add_option("--plan", pa.plan, "Benchmark plan JSON (default: built-in plan)");
  profile->add_option("--bits", pa.bits, "qat, ptq or a comma list")->capture_default_str();
  profile->add_option("--out", pa.out, "Output profile JSON")->required();

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit a latency proxy to a profile");
  fit->add_option("--profile", fa.profile, "Profile JSON")->required();
  fit->add_option("--kind", fa.kind, "linear, tree, bops, linear-bops, linear-cbops, tree-cbops")
      ->capture_default_str();
  fit->add_option("--holdout", fa.holdout, "Holdout fraction")->capture_default_str();
  fit->add_option("--out", fa.out, "Output proxy JSON")->required();

  ExploreArgs ea;
  auto* exp = app.add_subcommand("explore", "Search a bitwidth scheme under a cost constraint");
  exp->add_option("--network", ea.network, "Network JSON")->required();
  exp->add_option("--mode", ea.mode, "ptq, qat or oracle")->capture_default_str();
  exp->add_option("--bits", ea.bits, "qat, ptq or a comma list")->capture_default_str();
  auto* ratio = exp->add_option("--constraint-ratio", ea.ratio, "Fraction of the uniform max-bit cost");
  auto* absolute = exp->add_option("--constraint", ea.constraint, "Absolute cost constraint");
  ratio->excludes(absolute);
  exp->add_option("--proxy", ea.proxy, "bops or a fitted proxy JSON")->capture_default_str();
  exp->add_option("--budget", ea.budget, "Evaluation budget")->capture_default_str();
  exp->add_option("--n-init", ea.n_init, "Initial samples")->capture_default_str();
  exp->add_option("--dataset", ea.dataset, "Dataset container for ptq/qat");
  exp->add_option("--pretrain-epochs", ea.pretrain_epochs, "Float training epochs (qat budget)")
      ->capture_default_str();
  exp->add_option("--oracle-seed", ea.oracle_seed, "Synthetic oracle seed (default: --seed)");
  exp->add_flag("--no-protect-ends", ea.no_protect_ends, "Do not pin first/last layers");
  exp->add_option("--out", ea.out, "Output result JSON")->required();

  CodegenArgs ca;
  auto* gen = app.add_subcommand("codegen", "Emit deployable C source for a search result");
  gen->add_option("--result", ca.result, "Result JSON")->required();
  gen->add_option("--network", ca.network, "Network JSON with weights")->required();
  gen->add_option("--out", ca.out, "Output directory")->required();

  ReportArgs ra;
  auto* rep = app.add_subcommand("report", "Tabulate result files into CSV");
  rep->add_option("--runs", ra.runs, "Directory of result JSON files")->required();
  rep->add_option("--out", ra.out, "Output CSV (traces go to <stem>.trace.csv)")->required();

  FixtureArgs xa;
  auto* fix = app.add_subcommand("fixture", "Write the tiny-MLP fixture, hardware presets and benchmark plan");
  fix->add_option("--out", xa.out, "Output directory")->required();
  fix->add_option("--fixture-seed", xa.fixture_seed, "Fixture seed")->capture_default_str();

  for (auto* sub : {profile, fit, exp, gen, rep, fix}) {
    sub->add_option("--seed", seed_opt, "RNG seed (default: $MIXQ_SEED or 0)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const std::uint64_t seed = seed_opt ? *seed_opt : default_seed();
    if (*profile) return cmd_profile(pa, seed);
    if (*fit) return cmd_fit(fa, seed);
    if (*exp) {
      if (!ratio->count() && !absolute->count()) {
        std::cerr << "error: explore needs --constraint-ratio or --constraint\n";
        return kExitUsage;
      }
      return cmd_explore(ea, seed);
    }
    if (*gen) return cmd_codegen(ca, seed);
    if (*rep) return cmd_report(ra, seed);
    if (*fix) return cmd_fixture(xa, seed);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InfeasibleConstraint& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace mixq::cli

int main(int argc, char** argv) { return mixq::cli::run(argc, argv); }
