#pragma once

#include <string>
#include <vector>

#include "ddif/trainer.hpp"

namespace ddif {

// Prompt dataset TSV: one record per line,
//   <prompt_id> \t <label 0|1> \t <v1> <v2> ... <vd>
// label 0 is malicious, 1 benign. All records must share one dimension.
std::vector<PromptRecord> load_dataset_tsv(const std::string& path);
void save_dataset_tsv(const std::vector<PromptRecord>& records, const std::string& path);

}  // namespace ddif
