#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "snn/trainer.hpp"

namespace snn {

// Flat UTF-8 key=value configuration. '#' starts a comment; blank lines are
// skipped. Unknown keys are fatal so typos cannot silently corrupt a run.
using KVMap = std::map<std::string, std::string>;

KVMap parse_kv_file(const std::filesystem::path& path);
KVMap parse_kv_pairs(const std::vector<std::string>& pairs);

RunConfig run_config_from_kv(const KVMap& kv);
KVMap kv_from_run_config(const RunConfig& run);
void write_kv_file(const KVMap& kv, const std::filesystem::path& path);

}  // namespace snn
