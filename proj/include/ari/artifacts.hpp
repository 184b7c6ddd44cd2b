#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ari/featurize.hpp"
#include "ari/rules.hpp"

namespace ari {

// features.bin: magic ARIX, version, feature space, vocab hash, then
// (id, row of doubles) per example. Row order is corpus order.
void save_features(const std::filesystem::path& path, const FeatureMatrix& feats);
FeatureMatrix load_features(const std::filesystem::path& path);

// firings.bin: magic ARIF, version, rule ids, then (id, votes) per example;
// abstain is serialized as -1.
void save_firings(const std::filesystem::path& path, const FiringTable& table,
                  const std::vector<std::string>& rule_ids);

struct LoadedFirings {
    FiringTable table;
    std::vector<std::string> rule_ids;
};
LoadedFirings load_firings(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace ari
