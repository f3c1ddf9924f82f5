#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace peel {

inline constexpr const char* kRunSchema = "peelrun/1";
inline constexpr const char* kRunManifestName = "run_manifest.json";

/// Lowercase hex SHA-256 of a file's bytes. Throws Io.
std::string sha256_file(const std::filesystem::path& path);

struct ArtifactRecord {
    /// Relative to the manifest directory when the file lives below it.
    std::string path;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct StageRecord {
    std::string name;
    std::vector<ArtifactRecord> inputs;
    std::vector<ArtifactRecord> outputs;
    nlohmann::json parameters = nlohmann::json::object();
    double seconds = 0.0;
    /// Set when the stage aborted; outputs are then whatever existed.
    std::string error;
};

struct VerifyIssue {
    std::string stage;
    std::string path;
    std::string problem;
};

class RunManifest {
public:
    explicit RunManifest(std::filesystem::path file) : file_(std::move(file)) {}

    /// Loads `file`, or starts empty when it does not exist.
    static RunManifest open(const std::filesystem::path& file);

    const std::filesystem::path& file() const { return file_; }
    std::filesystem::path directory() const { return file_.parent_path(); }
    const std::vector<StageRecord>& stages() const { return stages_; }

    /// Hashes the listed files now (each must exist) and records the stage,
    /// replacing an earlier stage of the same name. Throws Io.
    void record(const std::string& name, const std::vector<std::filesystem::path>& inputs,
                const std::vector<std::filesystem::path>& outputs, const nlohmann::json& parameters,
                double seconds, const std::string& error = {});

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j, std::filesystem::path file);
    void save() const;

    /// Rehashes every artifact; empty when all match.
    std::vector<VerifyIssue> verify() const;

private:
    ArtifactRecord describe(const std::filesystem::path& path) const;
    std::filesystem::path resolve(const std::string& path) const;

    std::filesystem::path file_;
    std::vector<StageRecord> stages_;
};

}  // namespace peel
