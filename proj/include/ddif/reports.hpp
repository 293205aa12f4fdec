#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddif/image.hpp"
#include "ddif/localization.hpp"
#include "ddif/safety.hpp"
#include "ddif/toy_world.hpp"

namespace ddif {

// One line of the score report: {"prompt_id":..., "score":..., "d_mal":...,
// "d_ben":..., "route":...}. Returned without a trailing newline.
std::string score_record_line(const std::string& prompt_id, const SafetyDecision& decision);

void write_score_jsonl(const std::string& path,
                       std::span<const std::pair<std::string, SafetyDecision>> records);

struct SweepRow {
    double value = 0.0;
    double flag_rate = 0.0;
    // Bypass rate is undefined when no prompt was flagged; the CSV cell
    // stays empty in that case.
    std::optional<double> bypass_rate;
};

void write_sweep_csv(const std::string& path, std::span<const SweepRow> rows);

// Raw sensitivity values, one CSV row per grid row, full precision.
void write_sensitivity_csv(const std::string& path, const SensitivityMap& map);

// Min-max normalized view for visual inspection; a constant map maps to
// all zeros.
Image sensitivity_to_image(const SensitivityMap& map);

std::string scene_to_json(const PlantedScene& scene);
void write_scene_json(const std::string& path, const PlantedScene& scene);

// key=value lines, sorted by key. Every artifact-producing command drops
// one of these next to its outputs.
void write_manifest(const std::string& path, const std::map<std::string, std::string>& entries);

}  // namespace ddif
