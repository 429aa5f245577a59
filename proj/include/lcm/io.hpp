#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lcm/simulator.hpp"
#include "lcm/trainer.hpp"

namespace lcm {

// File formats are documented in docs/SCHEMA.md.

std::string version_string();

// Dataset: one JSON record per line with fields user, chosen, choice_set.
// The first line is a meta record ({"meta": {...}}) carrying the version
// string and any provenance key-values; readers skip it.
void write_dataset(const std::filesystem::path& path,
                   const std::vector<ChoiceObservation>& observations,
                   const std::vector<std::pair<std::string, std::string>>& meta = {});
std::vector<ChoiceObservation> read_dataset(const std::filesystem::path& path);

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);
GroundTruth read_ground_truth(const std::filesystem::path& path);

// Versioned checkpoint with the TrainConfig embedded; kernel parameters are
// stored with both raw and derived values at full precision.
void write_checkpoint(const std::filesystem::path& path, const FittedModel& model);
FittedModel read_checkpoint(const std::filesystem::path& path);

// Delimiter-separated report with `# key<TAB>value` header lines carrying the
// resolved config and version.
struct Report {
    std::vector<std::pair<std::string, std::string>> header;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};
void write_report(const std::filesystem::path& path, const Report& report);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace lcm
