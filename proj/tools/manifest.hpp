#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

namespace powerlearn::cli {

std::string sha256_file(const std::filesystem::path& path);
std::string utc_timestamp();

// Written next to every output. Only the two timestamps vary between
// identical runs.
struct RunManifest {
    std::vector<std::string> command_line;
    nlohmann::ordered_json config;
    std::string corpus_sha256;
    std::uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> outputs;

    nlohmann::ordered_json to_json() const;
    void save(const std::filesystem::path& path) const;
};

const char* tool_version();

}  // namespace powerlearn::cli
