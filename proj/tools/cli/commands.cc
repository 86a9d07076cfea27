#include "cli/commands.h"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "cfx/classifier.h"
#include "cfx/constraints.h"
#include "cfx/dataset.h"
#include "cfx/engine.h"
#include "cfx/error.h"
#include "cfx/evaluation.h"
#include "cfx/json_io.h"
#include "cfx/ranks.h"
#include "cfx/session.h"
#include "cli/http_server.h"

namespace cfx::cli {
namespace {

using nlohmann::json;

// Flag combinations that are well-formed for CLI11 but invalid for us.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataFlags {
  std::string data;
  std::string stats;
  double split = 0.8;
  std::uint64_t split_seed = 0;
};

void AddDataFlags(CLI::App* sub, DataFlags& d) {
  sub->add_option("--data", d.data, "CSV dataset (header row required)");
  sub->add_option("--stats", d.stats, "stats JSON exported by `train --stats-out`");
  sub->add_option("--split", d.split, "train fraction of the split")
      ->capture_default_str();
  sub->add_option("--split-seed", d.split_seed, "seed of the train/test split")
      ->capture_default_str();
}

struct EngineFlags {
  EngineConfig config;
  std::string metric = "mad_manhattan";
};

void AddEngineFlags(CLI::App* sub, EngineFlags& e) {
  EngineConfig& c = e.config;
  sub->add_option("--k", c.k, "counterfactuals per request")->capture_default_str();
  sub->add_option("--lambda1", c.lambda1, "proximity weight")->capture_default_str();
  sub->add_option("--lambda2", c.lambda2, "diversity weight")->capture_default_str();
  sub->add_option("--step-size", c.step_size)->capture_default_str();
  sub->add_option("--max-iterations", c.max_iterations)->capture_default_str();
  sub->add_option("--tol", c.convergence_tol, "objective change tolerance")
      ->capture_default_str();
  sub->add_option("--window", c.convergence_window, "convergence window")
      ->capture_default_str();
  sub->add_option("--desired-class", c.desired_class)->capture_default_str();
  sub->add_option("--metric", e.metric, "mad_manhattan | mahalanobis_sq")
      ->capture_default_str();
}

EngineConfig ResolveEngine(const EngineFlags& e) {
  EngineConfig c = e.config;
  try {
    c.metric = ParseContinuousMetric(e.metric);
    c.Validate();
  } catch (const Error& err) {
    throw UsageError(err.what());
  }
  return c;
}

struct DataContext {
  DatasetStats stats;
  std::optional<LoadedDataset> dataset;
};

DataContext LoadData(const DataFlags& d, const Schema& schema) {
  DataContext ctx;
  if (!d.data.empty()) {
    ctx.dataset = LoadDatasetFile(d.data, schema, d.split, d.split_seed);
    ctx.stats = ctx.dataset->stats;
  }
  if (!d.stats.empty()) {
    ctx.stats = DatasetStats::Load(d.stats, schema);
  } else if (d.data.empty()) {
    throw UsageError("one of --data or --stats is required");
  }
  return ctx;
}

void WriteJson(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------- train

struct TrainFlags {
  std::string schema;
  DataFlags data;
  TrainingConfig training;
  std::uint64_t seed = 0;
  std::string out = "model.json";
  std::string stats_out;
};

int Train(const TrainFlags& f, std::ostream& out) {
  if (f.data.data.empty()) throw UsageError("--data is required");
  const Schema schema = Schema::Load(f.schema);
  const LoadedDataset ds =
      LoadDatasetFile(f.data.data, schema, f.data.split, f.data.split_seed);
  const LinearModel model =
      TrainLinearModel(ds.train, f.training, f.seed, schema.Fingerprint());
  model.Save(f.out);
  if (!f.stats_out.empty()) WriteJson(f.stats_out, ds.stats.ToJson(schema));
  out << std::fixed << std::setprecision(4)
      << "train rows: " << ds.train.size() << "  test rows: " << ds.test.size()
      << '\n'
      << "train accuracy: " << Accuracy(model, ds.train) << '\n'
      << "held-out accuracy: " << Accuracy(model, ds.test) << '\n'
      << "model written to " << f.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- explain

struct ExplainFlags {
  std::string model;
  std::string schema;
  DataFlags data;
  EngineFlags engine;
  std::string instance;
  std::string rows;
  std::string condition = "c2";
  std::string constraints;
  std::string gamma;
  std::uint64_t seed = 0;
  std::string out;
  std::string csv;
};

std::vector<std::size_t> ParseRows(const std::string& text) {
  std::vector<std::size_t> rows;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || !std::all_of(item.begin(), item.end(), ::isdigit)) {
      throw UsageError("--rows expects comma-separated row indices");
    }
    rows.push_back(std::stoul(item));
  }
  return rows;
}

int Explain(const ExplainFlags& f, std::ostream& out) {
  const Condition condition = [&] {
    try {
      return ParseCondition(f.condition);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }();
  if (condition != Condition::kC3GlobalAndLocal && !f.gamma.empty()) {
    throw UsageError("--gamma is not allowed under " +
                     std::string(ConditionName(condition)) +
                     " (gamma is fixed to 1; use c3)");
  }
  if (condition != Condition::kC1Unconstrained && f.constraints.empty()) {
    throw UsageError("--constraints is required for c2 and c3");
  }
  if (condition == Condition::kC3GlobalAndLocal && f.gamma.empty()) {
    throw UsageError("--gamma is required for c3");
  }
  if (f.instance.empty() == f.rows.empty()) {
    throw UsageError("exactly one of --instance or --rows is required");
  }
  EngineConfig config = ResolveEngine(f.engine);
  config.condition = condition;
  config.seed = f.seed;

  const Schema schema = Schema::Load(f.schema);
  const LinearModel model = LinearModel::Load(f.model, schema);
  const DataContext data = LoadData(f.data, schema);
  const CompiledConstraints constraints =
      f.constraints.empty()
          ? CompiledConstraints::None(schema)
          : CompiledConstraints::Compile(CausalConstraintSet::Load(f.constraints), schema);
  const PerturbationWeights weights =
      f.gamma.empty() ? PerturbationWeights::Uniform(schema)
                      : PerturbationWeights::FromJson(ParseJsonArgument(f.gamma), schema);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (weights[i] < kGammaMin || weights[i] > kGammaMax) {
      throw UsageError("gamma for '" + schema.feature(i).name + "' is outside [1, 5]");
    }
  }

  auto test_row = [&](std::size_t r) -> const Instance& {
    if (!data.dataset) throw UsageError("row indices need --data");
    if (r >= data.dataset->test.size()) {
      throw UsageError("row " + std::to_string(r) + " outside the test split (" +
                       std::to_string(data.dataset->test.size()) + " rows)");
    }
    return data.dataset->test.rows[r];
  };

  if (!f.rows.empty()) {
    std::vector<Instance> instances;
    for (std::size_t r : ParseRows(f.rows)) instances.push_back(test_row(r));
    const auto batch = GenerateBatch(instances, model, schema, data.stats,
                                     weights, constraints, config);
    json doc = json::array();
    std::size_t failed = 0;
    for (const BatchItem& item : batch) {
      if (item.result) {
        doc.push_back(ResultToJson(*item.result, schema));
      } else {
        doc.push_back({{"error", item.error}});
        ++failed;
      }
    }
    if (f.out.empty()) {
      out << doc.dump(2) << '\n';
    } else {
      WriteJson(f.out, doc);
      out << "wrote " << batch.size() - failed << " results (" << failed
          << " failed) to " << f.out << '\n';
    }
    return kExitOk;
  }

  const bool is_row = std::all_of(f.instance.begin(), f.instance.end(), ::isdigit);
  const Instance x =
      is_row ? test_row(std::stoul(f.instance))
             : schema.MakeInstance(schema.ValuesFromJson(ParseJsonArgument(f.instance)));
  const CFResult result =
      Generate(x, model, schema, data.stats, weights, constraints, config);
  const json doc = ResultToJson(result, schema);
  if (!f.csv.empty()) {
    std::ofstream csv(f.csv);
    if (!csv) throw Error(ErrorCode::kIo, "cannot write " + f.csv);
    WriteResultCsv(result, schema, csv);
  }
  if (f.out.empty()) {
    out << doc.dump(2) << '\n';
  } else {
    WriteJson(f.out, doc);
    const auto valid = std::count(doc.at("valid").begin(), doc.at("valid").end(), true);
    out << "wrote " << result.counterfactuals.size() << " counterfactuals ("
        << valid << " valid) to " << f.out << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateFlags {
  std::vector<std::string> runs;
  std::string schema;
  std::string constraints;
  std::string ranks;
  std::vector<int> ks = {1, 2, 3};
  std::string out;
};

int Evaluate(const EvaluateFlags& f, std::ostream& out, std::ostream& err) {
  if (f.runs.empty() == f.ranks.empty()) {
    throw UsageError("exactly one of --runs or --ranks is required");
  }
  if (!f.ranks.empty()) {
    std::vector<RankRow> rows;
    try {
      rows = LoadRankCsv(f.ranks);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kIo) throw;
      err << "invalid rank file: " << e.what() << '\n';
      return kExitUsage;
    }
    const TopKTable table = SummarizeRanks(rows, f.ks);
    table.PrintTable(out);
    if (!f.out.empty()) WriteJson(f.out, table.ToJson());
    return kExitOk;
  }

  if (f.schema.empty()) throw UsageError("--runs needs --schema");
  const Schema schema = Schema::Load(f.schema);
  const CompiledConstraints constraints =
      f.constraints.empty()
          ? CompiledConstraints::None(schema)
          : CompiledConstraints::Compile(CausalConstraintSet::Load(f.constraints), schema);
  std::vector<CFResult> results;
  for (const std::string& path : f.runs) {
    const json doc = ReadJsonFile(path);
    if (doc.is_array()) {
      for (const json& item : doc) {
        if (!item.contains("error")) results.push_back(ResultFromJson(item, schema));
      }
    } else {
      results.push_back(ResultFromJson(doc, schema));
    }
  }
  const RunReport report = EvaluateRun(results, constraints, schema);
  report.PrintTable(out);
  if (!f.out.empty()) WriteJson(f.out, report.ToJson());
  return kExitOk;
}

// ---------------------------------------------------------------- serve

struct ServeFlags {
  std::string model;
  std::string schema;
  DataFlags data;
  EngineFlags engine;
  std::string constraints;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin;
  std::string ranks_out = "ranks.csv";
  std::uint64_t id_seed = 0;
};

std::atomic<HttpServer*> g_server{nullptr};

extern "C" void StopOnSignal(int) {
  if (HttpServer* s = g_server.load()) s->Stop();
}

int Serve(const ServeFlags& f, std::ostream& out, std::ostream& err) {
  ServiceContext ctx;
  ctx.schema = Schema::Load(f.schema);
  ctx.model = std::make_shared<LinearModel>(LinearModel::Load(f.model, ctx.schema));
  DataContext data = LoadData(f.data, ctx.schema);
  ctx.stats = data.stats;
  if (data.dataset) ctx.instances = data.dataset->test.rows;
  if (!f.constraints.empty()) {
    ctx.constraints = CompiledConstraints::Compile(
        CausalConstraintSet::Load(f.constraints), ctx.schema);
  }
  ctx.engine = ResolveEngine(f.engine);
  ctx.ranks_path = f.ranks_out;
  ctx.id_seed = f.id_seed;
  SessionService service(std::move(ctx));

  HttpServer server(service, {f.host, f.port, f.cors_origin});
  if (!server.Bind()) {
    err << "cannot bind " << f.host << ':' << f.port << " (address in use?)\n";
    return kExitFailure;
  }
  g_server = &server;
  std::signal(SIGINT, StopOnSignal);
  std::signal(SIGTERM, StopOnSignal);
  out << "serving on http://" << f.host << ':' << f.port << std::endl;
  const bool ok = server.Listen();
  g_server = nullptr;
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Feasible counterfactual explanations for binary classifiers", "cfx"};
  app.require_subcommand(1);

  TrainFlags train;
  CLI::App* train_cmd = app.add_subcommand("train", "train the linear classifier");
  train_cmd->add_option("--schema", train.schema, "schema JSON")->required();
  AddDataFlags(train_cmd, train.data);
  train_cmd->get_option("--data")->required();
  train_cmd->add_option("--epochs", train.training.epochs)->capture_default_str();
  train_cmd->add_option("--lr", train.training.learning_rate)->capture_default_str();
  train_cmd->add_option("--batch-size", train.training.batch_size)->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "initialization/shuffle seed")
      ->capture_default_str();
  train_cmd->add_option("--out", train.out, "model JSON")->capture_default_str();
  train_cmd->add_option("--stats-out", train.stats_out, "write MAD/std stats JSON");

  ExplainFlags explain;
  CLI::App* explain_cmd = app.add_subcommand("explain", "generate counterfactuals");
  explain_cmd->add_option("--model", explain.model)->required();
  explain_cmd->add_option("--schema", explain.schema)->required();
  AddDataFlags(explain_cmd, explain.data);
  AddEngineFlags(explain_cmd, explain.engine);
  explain_cmd->add_option("--instance", explain.instance,
                          "test-split row index, inline JSON object, or JSON file");
  explain_cmd->add_option("--rows", explain.rows,
                          "comma-separated test-split rows (batch mode)");
  explain_cmd->add_option("--condition", explain.condition, "c1 | c2 | c3")
      ->capture_default_str();
  explain_cmd->add_option("--constraints", explain.constraints, "constraint JSON");
  explain_cmd->add_option("--gamma", explain.gamma, "gamma JSON object or file (c3)");
  explain_cmd->add_option("--seed", explain.seed)->capture_default_str();
  explain_cmd->add_option("--out", explain.out, "result JSON (default: stdout)");
  explain_cmd->add_option("--csv", explain.csv, "result CSV, one row per CF");

  EvaluateFlags evaluate;
  CLI::App* evaluate_cmd =
      app.add_subcommand("evaluate", "summarize runs or ranking studies");
  evaluate_cmd->add_option("--runs", evaluate.runs, "result JSON files");
  evaluate_cmd->add_option("--schema", evaluate.schema);
  evaluate_cmd->add_option("--constraints", evaluate.constraints);
  evaluate_cmd->add_option("--ranks", evaluate.ranks, "rank CSV");
  evaluate_cmd->add_option("--ks", evaluate.ks, "top-k cut-offs")->capture_default_str();
  evaluate_cmd->add_option("--out", evaluate.out, "report JSON");

  ServeFlags serve;
  CLI::App* serve_cmd = app.add_subcommand("serve", "run the session HTTP service");
  serve_cmd->add_option("--model", serve.model)->required();
  serve_cmd->add_option("--schema", serve.schema)->required();
  AddDataFlags(serve_cmd, serve.data);
  AddEngineFlags(serve_cmd, serve.engine);
  serve_cmd->add_option("--constraints", serve.constraints);
  serve_cmd->add_option("--host", serve.host)->capture_default_str();
  serve_cmd->add_option("--port", serve.port)->capture_default_str();
  serve_cmd->add_option("--cors-origin", serve.cors_origin,
                        "allowed browser origin for the UI");
  serve_cmd->add_option("--ranks-out", serve.ranks_out)->capture_default_str();
  serve_cmd->add_option("--id-seed", serve.id_seed)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    if (auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front()) {
      err << "run with --help for usage (" << sub->get_name() << ")\n";
    }
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return Train(train, out);
    if (explain_cmd->parsed()) return Explain(explain, out);
    if (evaluate_cmd->parsed()) return Evaluate(evaluate, out, err);
    if (serve_cmd->parsed()) return Serve(serve, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error (" << ErrorCodeName(e.code()) << "): " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace cfx::cli
