// Command-line driver: generate synthetic instances, run tEM variants with
// either initialization, evaluate traces, and run the scripted experiment
// suites. Exit codes: 0 pass, 1 property failure, 2 input error, 3 runtime
// inference error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tem/diagnostics.hpp"
#include "tem/experiments.hpp"
#include "tem/generator.hpp"
#include "tem/inference.hpp"
#include "tem/init_seeded.hpp"
#include "tem/init_support.hpp"
#include "tem/model.hpp"
#include "tem/serialization.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitInputError = 2;
constexpr int kExitInferenceError = 3;

void print_assumption_report(const tem::AssumptionReport& report) {
  for (const auto& e : report.entries) {
    std::printf("  [%s] %-28s measured=%-12.6g %s\n", e.holds ? "ok" : "FAIL", e.name.c_str(),
                e.measured_value, e.witness.c_str());
  }
}

int cmd_generate(const std::string& config_path, const std::string& out_path) {
  std::string text;
  try {
    text = tem::read_text_file(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  tem::Instance instance;
  tem::CaseId case_id = tem::CaseId::kCase1;
  try {
    const tem::GenerateConfig config = tem::generate_config_from_json(text);
    case_id = config.case_id == 2 ? tem::CaseId::kCase2 : tem::CaseId::kCase1;
    tem::GenerationParams params = config.params;
    const auto common = params.common;
    params.common.reset();
    instance = config.case_id == 2 ? tem::gen_case2(params) : tem::gen_case1(params);
    if (common) {
      instance = tem::add_common_words(instance, common->kappa, common->mass_exponent,
                                       common->heavy_exponent, common->num_words);
      case_id = tem::CaseId::kCommon;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }

  const tem::AssumptionReport report = tem::verify_assumptions(instance, case_id);
  tem::save_instance(instance, out_path);
  std::printf("instance: K=%d N=%d D=%zu epsilon=%.3g -> %s\n", instance.num_topics(),
              instance.num_words(), instance.docs.size(), instance.epsilon_achieved,
              out_path.c_str());
  print_assumption_report(report);
  if (!report.all_hold()) {
    std::cerr << "assumption check failed\n";
    return kExitPropertyFailure;
  }
  return kExitOk;
}

int cmd_run(const std::string& instance_path, const std::string& init_name,
            const std::string& variant_name_arg, int iters, double epsilon_prime,
            const std::string& out_dir, int threads, bool renormalize, std::uint64_t seed) {
  tem::Instance instance;
  try {
    instance = tem::load_instance(instance_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  const auto variant = tem::variant_from_name(variant_name_arg);
  if (!variant) {
    std::cerr << "error: unknown variant '" << variant_name_arg << "'\n";
    return kExitInputError;
  }

  fs::create_directories(out_dir);
  const fs::path trace_path = fs::path(out_dir) / "trace.csv";
  const fs::path state_path = fs::path(out_dir) / "final_state.json";
  const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  const fs::path phase_path = fs::path(out_dir) / "phase_report.json";

  const auto start = std::chrono::steady_clock::now();
  std::ofstream trace_out(trace_path, std::ios::binary);
  trace_out << tem::kTraceCsvHeader << '\n';

  std::optional<tem::PhaseMonitor> monitor;
  tem::InferenceState init;
  try {
    if (init_name == "oracle_support") {
      init = tem::experiments::oracle_support_state(instance);
    } else if (init_name == "support") {
      tem::SupportInitOptions options;
      options.seed = tem::derive_seed(seed, 77);
      options.threads = threads;
      const auto recovery = tem::find_topic_supports(instance.docs, instance.num_topics(),
                                                     instance.params.max_doc_topics, options);
      std::vector<std::vector<int>> doc_supports;
      doc_supports.reserve(instance.docs.size());
      for (const auto& doc : instance.docs) {
        const double floor =
            doc.length ? 2.0 / std::sqrt(static_cast<double>(*doc.length)) : 0.0;
        doc_supports.push_back(tem::find_document_support(doc, recovery.supports, floor));
      }
      init = tem::build_initial_state(instance.docs, recovery.supports, doc_supports);
    } else if (init_name == "seeded") {
      if (!instance.params.case2) {
        std::cerr << "error: seeded init needs case2 parameters in the instance\n";
        return kExitInputError;
      }
      const auto seeds = tem::select_seed_docs(instance, instance.params.case2->c_l);
      init = tem::seeded_init(seeds, instance.docs);
      monitor.emplace(tem::PhaseMonitor(instance,
                                        tem::match_topics(init.beta, instance.beta_true)));
    } else {
      std::cerr << "error: unknown init '" << init_name << "'\n";
      return kExitInputError;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: initialization failed: " << e.what() << "\n";
    return kExitInferenceError;
  }

  tem::RunOptions options;
  options.outer_iters = iters;
  options.epsilon_prime = epsilon_prime;
  options.threads = threads;
  options.renormalize = renormalize;
  tem::EStepSettings settings;

  auto sink = [&](const tem::ErrorTraceRow& row) {
    trace_out << tem::trace_row_to_csv(row) << '\n';
    trace_out.flush();
  };
  auto observer = [&](const tem::IterationRecord& rec) {
    if (monitor) monitor->observe(rec.state);
  };

  int exit_code = kExitOk;
  tem::RunResult result;
  try {
    result = tem::run_tem(instance, std::move(init), *variant, options, settings, sink, observer);
    tem::save_state(result.state, state_path);
  } catch (const std::exception& e) {
    std::cerr << "inference error: " << e.what() << " (partial trace flushed)\n";
    exit_code = kExitInferenceError;
  }
  if (monitor) tem::write_text_file(phase_path, tem::phase_report_to_json(monitor->report()));

  const double wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  json manifest;
  manifest["command"] = "run";
  manifest["instance"] = instance_path;
  manifest["init"] = init_name;
  manifest["variant"] = variant_name_arg;
  manifest["iters"] = iters;
  manifest["epsilon_prime"] = epsilon_prime;
  manifest["threads"] = threads;
  manifest["renormalize"] = renormalize;
  manifest["seed"] = seed;
  manifest["wall_time_ms"] = wall_ms;  // informational; not covered by determinism
  tem::write_text_file(manifest_path, manifest.dump());

  if (exit_code == kExitOk && !result.trace.rows.empty()) {
    const auto& last = result.trace.rows.back();
    std::printf("run: %d iterations, final C_beta=%.6g C_gamma=%.6g dominant_acc=%.4f\n",
                result.iterations_run, last.c_beta, last.c_gamma, last.dominant_acc);
  }
  return exit_code;
}

int cmd_eval(const std::string& trace_path, const std::string& instance_path,
             double epsilon_prime) {
  tem::ErrorTrace trace;
  tem::Instance instance;
  try {
    trace = tem::load_trace(trace_path);
    instance = tem::load_instance(instance_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  if (trace.rows.empty()) {
    std::cerr << "error: empty trace\n";
    return kExitInputError;
  }

  bool all_pass = true;
  const double target = 1.0 + epsilon_prime;
  const double final_c_beta = trace.rows.back().c_beta;
  const bool accuracy = final_c_beta <= target;
  std::printf("[%s] final_accuracy: C_beta=%.6g target=%.6g\n", accuracy ? "pass" : "FAIL",
              final_c_beta, target);
  all_pass &= accuracy;

  const tem::EvolutionReport evolution =
      tem::check_error_evolution(trace, instance.epsilon_achieved);
  std::printf("[%s] error_evolution: %s\n", evolution.pass ? "pass" : "FAIL",
              evolution.pass ? ("checked " + std::to_string(evolution.pairs_checked) + " steps")
                                 .c_str()
                             : evolution.detail.c_str());
  all_pass &= evolution.pass;

  bool dominant = true;
  for (const auto& row : trace.rows) dominant &= row.dominant_acc >= 1.0;
  std::printf("[%s] dominant_identification\n", dominant ? "pass" : "FAIL");
  all_pass &= dominant;

  return all_pass ? kExitOk : kExitPropertyFailure;
}

int cmd_experiment(const std::string& suite, const std::string& out_dir, int threads) {
  fs::create_directories(out_dir);
  const fs::path aggregate_path = fs::path(out_dir) / "aggregate.csv";
  std::ofstream aggregate(aggregate_path, std::ios::binary);
  bool all_ok = true;

  if (suite == "case1_tem") {
    aggregate << "variant,seed,success,iters_to_target,final_c_beta\n";
    for (tem::Variant variant :
         {tem::Variant::kKlTem, tem::Variant::kIterativeTem, tem::Variant::kIncompleteTem}) {
      for (std::uint64_t seed : tem::experiments::case1_tem_seeds()) {
        const tem::Instance instance =
            tem::gen_case1(tem::experiments::case1_tem_params(seed));
        const auto summary = tem::experiments::run_case1_tem_once(instance, variant, threads);
        const bool ok = summary.reached_target && summary.evolution.pass && summary.dominant_all;
        all_ok &= ok;
        aggregate << tem::variant_name(variant) << ',' << seed << ',' << (ok ? 1 : 0) << ','
                  << summary.iters_to_target << ',' << summary.final_c_beta << '\n';
        tem::save_trace(summary.trace,
                        fs::path(out_dir) / (std::string("trace_") + tem::variant_name(variant) +
                                             "_" + std::to_string(seed) + ".csv"));
        std::printf("case1_tem %-10s seed=%llu %s iters=%d C_beta=%.4f (%.1fs)\n",
                    tem::variant_name(variant), static_cast<unsigned long long>(seed),
                    ok ? "ok" : "FAIL", summary.iters_to_target, summary.final_c_beta,
                    summary.wall_seconds);
      }
    }
  } else if (suite == "case1_support") {
    aggregate << "seed,success,false_positive_pairs,yes_pairs\n";
    int successes = 0;
    for (std::uint64_t seed : tem::experiments::case1_support_seeds()) {
      const auto summary = tem::experiments::run_case1_support_once(seed, threads);
      const bool ok = summary.topics_exact && summary.docs_exact;
      successes += ok ? 1 : 0;
      all_ok &= summary.false_positive_pairs == 0;
      aggregate << seed << ',' << (ok ? 1 : 0) << ',' << summary.false_positive_pairs << ','
                << summary.yes_pairs << '\n';
      std::printf("case1_support seed=%llu %s false_positives=%lld (%.1fs)\n",
                  static_cast<unsigned long long>(seed), ok ? "ok" : "FAIL",
                  static_cast<long long>(summary.false_positive_pairs), summary.wall_seconds);
    }
    all_ok &= successes >= 4;  // Theorem-2 style probabilistic guarantee
  } else if (suite == "case2_seeded") {
    aggregate << "seed,success,iters_to_target,final_c_beta,offanchor_identified_t,"
                 "klestimate_violations\n";
    for (std::uint64_t seed : tem::experiments::case2_seeded_seeds()) {
      const auto summary = tem::experiments::run_case2_seeded_once(seed, threads);
      const bool ok = summary.reached_target && summary.dominant_all &&
                      summary.klestimate_violations == 0 &&
                      summary.offanchor_identified_t >= 0 && summary.offanchor_identified_t <= 40;
      all_ok &= ok;
      aggregate << seed << ',' << (ok ? 1 : 0) << ',' << summary.iters_to_target << ','
                << summary.final_c_beta << ',' << summary.offanchor_identified_t << ','
                << summary.klestimate_violations << '\n';
      tem::save_trace(summary.trace,
                      fs::path(out_dir) / ("trace_seeded_" + std::to_string(seed) + ".csv"));
      std::printf("case2_seeded seed=%llu %s iters=%d offanchor_t=%d (%.1fs)\n",
                  static_cast<unsigned long long>(seed), ok ? "ok" : "FAIL",
                  summary.iters_to_target, summary.offanchor_identified_t, summary.wall_seconds);
    }
  } else if (suite == "common_words") {
    aggregate << "variant,seed,success,iters_to_target,final_restricted_c_beta\n";
    for (tem::Variant variant :
         {tem::Variant::kKlTem, tem::Variant::kIterativeTem, tem::Variant::kIncompleteTem}) {
      for (std::uint64_t seed : tem::experiments::common_words_seeds()) {
        const auto summary = tem::experiments::run_common_words_once(seed, variant, threads);
        const bool ok = summary.reached_restricted_target;
        all_ok &= ok;
        aggregate << tem::variant_name(variant) << ',' << seed << ',' << (ok ? 1 : 0) << ','
                  << summary.iters_to_restricted_target << ',' << summary.final_restricted_c_beta
                  << '\n';
        std::printf("common_words %-10s seed=%llu %s iters=%d (%.1fs)\n",
                    tem::variant_name(variant), static_cast<unsigned long long>(seed),
                    ok ? "ok" : "FAIL", summary.iters_to_restricted_target, summary.wall_seconds);
      }
    }
  } else if (suite == "dirichlet_checks") {
    aggregate << "num_samples,sparsity_violation_rate,max_tail_prob_ratio,correlation_deviation\n";
    const auto result = tem::experiments::run_dirichlet_checks(424242);
    aggregate << result.num_samples << ',' << result.sparsity_violation_rate << ','
              << result.max_tail_prob_ratio << ',' << result.correlation_deviation << '\n';
    std::printf(
        "dirichlet_checks: sparsity_violation_rate=%.6g max_tail_ratio=%.4f correlation_dev=%.4f\n",
        result.sparsity_violation_rate, result.max_tail_prob_ratio, result.correlation_deviation);
    const double k = 50.0;
    all_ok = result.sparsity_violation_rate <= 2.0 / (k * k) && result.max_tail_prob_ratio <= 3.0;
  } else {
    std::cerr << "error: unknown suite '" << suite << "'\n";
    return kExitInputError;
  }

  std::printf("suite %s: %s (aggregate written to %s)\n", suite.c_str(),
              all_ok ? "all pass" : "FAILURES", aggregate_path.string().c_str());
  return all_ok ? kExitOk : kExitPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thresholded variational EM laboratory for synthetic topic models"};
  app.require_subcommand(1);

  std::string config_path, out_path = "instance.json";
  CLI::App* generate = app.add_subcommand("generate", "Synthesize an instance from a JSON config");
  generate->add_option("config", config_path, "JSON config path")->required();
  generate->add_option("-o,--out", out_path, "Output instance path");

  std::string instance_path, init_name = "oracle_support", variant = "kl_tem",
              run_out_dir = "run_out";
  int iters = 100;
  double epsilon_prime = 0.1;
  int threads = 1;
  std::string renormalize_flag = "on";
  std::uint64_t seed = 0;
  CLI::App* run = app.add_subcommand("run", "Run a tEM variant on an instance");
  run->add_option("instance", instance_path, "Instance JSON path")->required();
  run->add_option("--init", init_name, "support | seeded | oracle_support");
  run->add_option("--variant", variant, "kl_tem | iterative | incomplete | vanilla");
  run->add_option("--iters", iters, "Outer iteration cap");
  run->add_option("--epsilon-prime", epsilon_prime, "Target accuracy (stop at C_beta <= 1+eps')");
  run->add_option("--threads", threads, "E-step worker threads");
  run->add_option("--renormalize", renormalize_flag, "on | off");
  run->add_option("--seed", seed, "Seed for pair sampling in support init");
  run->add_option("-o,--out", run_out_dir, "Output directory");

  std::string trace_path, eval_instance_path;
  double eval_epsilon = 0.1;
  CLI::App* eval = app.add_subcommand("eval", "Check a recorded trace against the convergence laws");
  eval->add_option("trace", trace_path, "Trace CSV path")->required();
  eval->add_option("instance", eval_instance_path, "Instance JSON path")->required();
  eval->add_option("--epsilon-prime", eval_epsilon, "Accuracy target");

  std::string suite, exp_out_dir = "experiment_out";
  int exp_threads = 4;
  CLI::App* experiment = app.add_subcommand("experiment", "Run a scripted multi-seed suite");
  experiment->add_option("suite", suite,
                         "case1_support | case1_tem | case2_seeded | common_words | "
                         "dirichlet_checks")
      ->required();
  experiment->add_option("-o,--out", exp_out_dir, "Output directory");
  experiment->add_option("--threads", exp_threads, "E-step worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (generate->parsed()) return cmd_generate(config_path, out_path);
    if (run->parsed()) {
      if (renormalize_flag != "on" && renormalize_flag != "off") {
        std::cerr << "error: --renormalize expects on|off\n";
        return kExitInputError;
      }
      return cmd_run(instance_path, init_name, variant, iters, epsilon_prime, run_out_dir, threads,
                     renormalize_flag == "on", seed);
    }
    if (eval->parsed()) return cmd_eval(trace_path, eval_instance_path, eval_epsilon);
    if (experiment->parsed()) return cmd_experiment(suite, exp_out_dir, exp_threads);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInferenceError;
  }
  return kExitInputError;
}
