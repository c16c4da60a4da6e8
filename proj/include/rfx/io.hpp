#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfx/env.hpp"
#include "rfx/francis.hpp"
#include "rfx/lemma_lab.hpp"

namespace rfx {

using Json = nlohmann::json;

Json env_to_json(const LinearMdp& env);
/// Throws kInvalidInput on schema errors; the result is not validated.
LinearMdp env_from_json(const Json& j);

Json reward_to_json(const RewardSpec& reward);
/// Checks theta lengths against env.
RewardSpec reward_from_json(const Json& j, const LinearMdp& env);

Json record_to_json(const ExplorationRecord& r);
ExplorationRecord record_from_json(const Json& j);

Json report_to_json(const RunReport& report);
Json lemma_to_json(const LemmaTestResult& r);

/// Whole-file helpers; IO failures throw kIo, parse failures kInvalidInput.
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// One record per line.
std::string dataset_to_jsonl(const ExplorationDataset& data);
ExplorationDataset dataset_from_jsonl(const std::string& text, int horizon);

void save_env(const std::filesystem::path& path, const LinearMdp& env);
LinearMdp load_env(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const ExplorationDataset& data);
ExplorationDataset load_dataset(const std::filesystem::path& path, int horizon);

inline constexpr const char* kCsvHeader = "seed,algorithm,episodes,epsilon,reward_id,v_star,v_pi,subopt,wall_ms";
std::string csv_row(const EvalRow& row);

}  // namespace rfx
