// probekit command-line entry point.
//
// Exit codes: 0 ok, 1 usage/config error, 2 data/validation error,
// 3 numeric or internal failure.

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "probekit/error.hpp"
#include "probekit/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

probekit::RunConfig config_from(const std::string& path) {
  if (!std::filesystem::exists(path)) throw probekit::UsageError("config file not found: " + path);
  return probekit::load_run_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probekit: layer-wise minimal-pair probing and output-probability scoring"};
  app.set_version_flag("--version", std::string("probekit ") + probekit::kToolVersion);
  app.require_subcommand(1);

  std::string config_path;
  auto add_config = [&](CLI::App* sub) { sub->add_option("-c,--config", config_path, "run config (TOML)")->required(); };

  auto* validate = app.add_subcommand("validate", "check datasets, stores and score dumps");
  add_config(validate);

  probekit::BuildCompsOptions comps;
  std::string overlay, annotations;
  auto* build = app.add_subcommand("build-comps", "build conceptual minimal pairs from a concept/property table");
  build->add_option("--table", comps.table, "concept/property table (JSON)")->required();
  build->add_option("--overlay", overlay, "correction overlay (JSON or CSV)");
  build->add_option("--language", comps.language, "language code")->capture_default_str();
  build->add_option("-o,--out", comps.out_pairs, "output pair file (.jsonl or .csv)")->required();
  build->add_option("--annotations", annotations, "also write concept annotations (JSONL) for meaning prompts");

  probekit::FixtureOptions fx;
  auto* fixtures = app.add_subcommand("fixtures", "write a synthetic run directory with a planted signal");
  fixtures->add_option("-o,--out", fx.out_dir, "output directory")->required();
  fixtures->add_option("--seed", fx.seed)->capture_default_str();
  fixtures->add_option("--pairs", fx.n_pairs, "pairs per task")->capture_default_str();
  fixtures->add_option("--form-tasks", fx.n_form_tasks)->capture_default_str();
  fixtures->add_option("--meaning-tasks", fx.n_meaning_tasks)->capture_default_str();
  fixtures->add_option("--layers", fx.n_layers)->capture_default_str();
  fixtures->add_option("--dim", fx.hidden_dim)->capture_default_str();
  fixtures->add_option("--signal-layer", fx.signal_layer)->capture_default_str();
  fixtures->add_option("--separation", fx.separation)->capture_default_str();
  fixtures->add_option("--direct-accuracy", fx.direct_accuracy)->capture_default_str();
  fixtures->add_option("--meta-accuracy", fx.meta_accuracy)->capture_default_str();
  fixtures->add_option("--models", fx.models, "model names")->capture_default_str();
  fixtures->add_option("--workers", fx.workers, "worker count written into run.toml")->capture_default_str();

  unsigned workers = 0;
  auto* probe = app.add_subcommand("probe", "probe every (task, layer) of every model");
  add_config(probe);
  probe->add_option("-j,--workers", workers, "override run.workers");

  auto* analyze = app.add_subcommand("analyze", "curves, saturation, differences, tests and plots");
  add_config(analyze);

  bool emit_prompts = false;
  auto* psycholing = app.add_subcommand("psycholing", "direct and metalinguistic accuracy");
  add_config(psycholing);
  psycholing->add_flag("--emit-prompts", emit_prompts, "write prompt batches (JSONL) for the extractor");

  auto* report = app.add_subcommand("report", "collect tables into report.json and report.md");
  add_config(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (validate->parsed()) return probekit::cmd_validate(config_from(config_path), std::cerr) ? kOk : kData;
    if (build->parsed()) {
      if (!overlay.empty()) comps.overlay = overlay;
      if (!annotations.empty()) comps.out_annotations = annotations;
      probekit::cmd_build_comps(comps, std::cerr);
    } else if (fixtures->parsed()) {
      probekit::cmd_fixtures(fx, std::cerr);
    } else if (probe->parsed()) {
      auto config = config_from(config_path);
      if (workers > 0) config.workers = workers;
      probekit::cmd_probe(config, std::cerr);
    } else if (analyze->parsed()) {
      probekit::cmd_analyze(config_from(config_path), std::cerr);
    } else if (psycholing->parsed()) {
      probekit::cmd_psycholing(config_from(config_path), std::cerr, emit_prompts);
    } else if (report->parsed()) {
      probekit::cmd_report(config_from(config_path), std::cerr);
    }
  } catch (const probekit::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const probekit::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const probekit::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kNumeric;
  }
  return kOk;
}
