#pragma once

#include <filesystem>
#include <string>

#include "tem/generator.hpp"
#include "tem/inference.hpp"
#include "tem/init_seeded.hpp"
#include "tem/model.hpp"

namespace tem {

// JSON documents use lowercase snake_case keys. The beta matrix is stored
// row-major dense; document frequencies and gammas are stored sparse as
// [index, value] pairs. Non-finite values serialize as the string "inf".

std::string instance_to_json(const Instance& instance);
Instance instance_from_json(const std::string& text);
void save_instance(const Instance& instance, const std::filesystem::path& path);
Instance load_instance(const std::filesystem::path& path);

// Generation config: the GenerationParams fields plus "case": 1 or 2.
struct GenerateConfig {
  GenerationParams params;
  int case_id = 1;
};
GenerateConfig generate_config_from_json(const std::string& text);

std::string state_to_json(const InferenceState& state);
InferenceState state_from_json(const std::string& text);
void save_state(const InferenceState& state, const std::filesystem::path& path);

// Trace CSV columns, in order:
// t,C_beta,C_gamma,kl_beta_max,dominant_acc,estep_objective_mean
std::string trace_row_to_csv(const ErrorTraceRow& row);
std::string trace_to_csv(const ErrorTrace& trace);
ErrorTrace trace_from_csv(const std::string& text);
void save_trace(const ErrorTrace& trace, const std::filesystem::path& path);
ErrorTrace load_trace(const std::filesystem::path& path);
extern const char* const kTraceCsvHeader;

std::string phase_report_to_json(const PhaseReport& report);
std::string assumption_report_to_json(const AssumptionReport& report);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace tem
