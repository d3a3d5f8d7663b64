// Command-line front end for the detection pipeline.
//
// Exit codes: 0 success, 2 usage error, 3 data/schema error, 4 numerical failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <agcfdia/pipeline.hpp>

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  std::string out;
  std::string format = "csv";
  std::string classifier = "rf";
  std::optional<double> fdr_q;
  bool timings = false;
  std::string input;
  std::string mask;
  std::string test;
};

agcfdia::PipelineConfig load_config(const Options& o) {
  auto config = o.config.empty() ? agcfdia::default_pipeline_config(o.seed)
                                 : agcfdia::load_pipeline_config(o.config, o.seed);
  if (o.threads > 0) config.dataset.threads = o.threads;
  if (o.fdr_q) config.fdr_q = *o.fdr_q;
  try {
    config.validate();
  } catch (const agcfdia::InvalidArgument& e) {
    throw agcfdia::FormatError(std::string("config: ") + e.what());
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  namespace pl = agcfdia::pipeline;
  Options o;
  CLI::App app{"False data injection detection for two-area AGC"};
  app.require_subcommand(1);
  app.add_option("--config", o.config, "JSON run configuration (defaults when omitted)");
  app.add_option("--seed", o.seed, "Override the master seed");
  app.add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  auto add_out = [&](CLI::App* c, const char* what) { c->add_option("--out", o.out, what)->required(); };
  auto add_format = [&](CLI::App* c) {
    c->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"json", "csv", "table"}));
  };

  auto* simulate = app.add_subcommand("simulate", "Simulate one scenario; writes trajectory.csv and trajectory.svg");
  simulate->add_option("scenario", o.input, "Scenario JSON")->required();
  add_out(simulate, "Output directory");

  auto* gen = app.add_subcommand("gen-dataset", "Generate the labeled trajectory dataset");
  add_out(gen, "Dataset directory");

  auto* split = app.add_subcommand("split", "Stratified split into <out>/train and <out>/test");
  split->add_option("dataset", o.input, "Dataset directory")->required();
  add_out(split, "Output directory");

  auto* featurize = app.add_subcommand("featurize", "Extract the 300-column feature matrix");
  featurize->add_option("dataset", o.input, "Dataset directory")->required();
  add_out(featurize, "Feature CSV");

  auto* select = app.add_subcommand("select", "Fit the FDR feature mask on a training matrix");
  select->add_option("train", o.input, "Training feature CSV")->required();
  select->add_option("--fdr-q", o.fdr_q, "False discovery rate level")->check(CLI::Range(0.0, 1.0));
  add_out(select, "Mask JSON");

  auto* train = app.add_subcommand("train", "Train one classifier on the masked training matrix");
  train->add_option("train", o.input, "Training feature CSV")->required();
  train->add_option("mask", o.mask, "Mask JSON")->required();
  train->add_option("--classifier", o.classifier, "Classifier")
      ->check(CLI::IsMember({"dt", "rf", "gnb", "knn", "svm", "gbt"}));
  add_out(train, "Model JSON");

  auto* evaluate = app.add_subcommand("evaluate", "Score a model; writes report.<ext> and confusion.svg");
  evaluate->add_option("model", o.input, "Model JSON")->required();
  evaluate->add_option("test", o.test, "Test feature CSV")->required();
  evaluate->add_option("mask", o.mask, "Mask JSON")->required();
  add_format(evaluate);
  add_out(evaluate, "Output directory");

  auto* bench = app.add_subcommand("bench", "Full pipeline over all configured classifiers");
  bench->add_option("--fdr-q", o.fdr_q, "False discovery rate level")->check(CLI::Range(0.0, 1.0));
  bench->add_flag("--timings", o.timings, "Record stage timings in the manifest (breaks byte-identical reruns)");
  add_format(bench);
  add_out(bench, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    const auto config = load_config(o);
    const std::size_t threads = config.dataset.threads;
    if (simulate->parsed()) {
      const auto traj = pl::simulate(config, o.input, o.out);
      std::cout << "wrote " << traj.size() << " rows to " << (std::filesystem::path(o.out) / "trajectory.csv").string()
                << '\n';
    } else if (gen->parsed()) {
      const auto ds = pl::gen_dataset(config, o.out);
      std::cout << "wrote " << ds.samples.size() << " samples to " << o.out << '\n';
    } else if (split->parsed()) {
      const auto parts = pl::split_dataset(config, o.input, o.out);
      std::cout << "train " << parts.first.samples.size() << ", test " << parts.second.samples.size() << '\n';
    } else if (featurize->parsed()) {
      const auto fm = pl::featurize(o.input, o.out, threads);
      std::cout << "wrote " << fm.rows() << " x " << fm.cols() << " features to " << o.out << '\n';
    } else if (select->parsed()) {
      const auto mask = pl::select(o.input, config.fdr_q, o.out, threads);
      std::cout << "kept " << mask.kept_indices.size() << " of " << mask.names.size() << " features\n";
    } else if (train->parsed()) {
      const auto model = pl::train(o.input, o.mask, config.classifier(o.classifier), o.out, threads);
      std::cout << "trained " << agcfdia::ml::display_name(model.tag()) << " on " << model.feature_count()
                << " features\n";
    } else if (evaluate->parsed()) {
      const auto format = agcfdia::evaluate::parse_format(o.format);
      const auto report = pl::evaluate(o.input, o.test, o.mask, o.out, format, threads);
      std::cout << agcfdia::evaluate::render(report, agcfdia::evaluate::Format::Table);
    } else if (bench->parsed()) {
      pl::BenchOptions options;
      options.format = agcfdia::evaluate::parse_format(o.format);
      options.record_timings = o.timings;
      const auto result = pl::bench(config, o.out, options);
      std::cout << "kept " << result.mask.kept_indices.size() << " of " << result.mask.names.size()
                << " features\n"
                << agcfdia::evaluate::render(result.reports, agcfdia::evaluate::Format::Table);
    }
    return 0;
  } catch (const agcfdia::NonFiniteState& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const agcfdia::GenerationExhausted& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const agcfdia::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
