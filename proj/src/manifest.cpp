#include "peel/manifest.hpp"

#include "peel/error.hpp"
#include "peel/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

namespace peel {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::Io, "sha256 unavailable");
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto n = in.gcount();
        if (n > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(n));
    }
    if (in.bad()) throw Error(ErrorCode::Io, "read failed: " + path.string());
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        char b[3];
        std::snprintf(b, sizeof b, "%02x", md[i]);
        hex += b;
    }
    return hex;
}

RunManifest RunManifest::open(const fs::path& file) {
    if (!fs::exists(file)) return RunManifest(file);
    return from_json(io::read_json(file), file);
}

ArtifactRecord RunManifest::describe(const fs::path& path) const {
    if (!fs::is_regular_file(path)) throw Error(ErrorCode::Io, "artifact missing: " + path.string());
    ArtifactRecord r;
    const fs::path abs = fs::weakly_canonical(fs::absolute(path));
    const fs::path base = fs::weakly_canonical(fs::absolute(directory().empty() ? fs::path(".") : directory()));
    const fs::path rel = abs.lexically_relative(base);
    const bool inside = !rel.empty() && *rel.begin() != "..";
    r.path = (inside ? rel : abs).generic_string();
    r.sha256 = sha256_file(path);
    r.bytes = fs::file_size(path);
    return r;
}

fs::path RunManifest::resolve(const std::string& path) const {
    const fs::path p(path);
    return p.is_absolute() ? p : directory() / p;
}

void RunManifest::record(const std::string& name, const std::vector<fs::path>& inputs,
                         const std::vector<fs::path>& outputs, const json& parameters, double seconds,
                         const std::string& error) {
    StageRecord s;
    s.name = name;
    for (const auto& p : inputs) s.inputs.push_back(describe(p));
    for (const auto& p : outputs) s.outputs.push_back(describe(p));
    s.parameters = parameters;
    s.seconds = seconds;
    s.error = error;
    auto it = std::find_if(stages_.begin(), stages_.end(), [&](const StageRecord& r) { return r.name == name; });
    if (it != stages_.end())
        *it = std::move(s);
    else
        stages_.push_back(std::move(s));
}

namespace {

json artifacts_to_json(const std::vector<ArtifactRecord>& list) {
    json a = json::array();
    for (const auto& r : list) a.push_back({{"path", r.path}, {"sha256", r.sha256}, {"bytes", r.bytes}});
    return a;
}

std::vector<ArtifactRecord> artifacts_from_json(const json& a) {
    std::vector<ArtifactRecord> out;
    for (const auto& r : a)
        out.push_back({r.at("path").get<std::string>(), r.at("sha256").get<std::string>(),
                       r.value("bytes", std::uintmax_t{0})});
    return out;
}

}  // namespace

json RunManifest::to_json() const {
    json stages = json::array();
    for (const auto& s : stages_) {
        json j = {{"name", s.name},
                  {"inputs", artifacts_to_json(s.inputs)},
                  {"outputs", artifacts_to_json(s.outputs)},
                  {"parameters", s.parameters},
                  {"seconds", s.seconds}};
        if (!s.error.empty()) j["error"] = s.error;
        stages.push_back(std::move(j));
    }
    return {{"schema", kRunSchema}, {"stages", stages}};
}

RunManifest RunManifest::from_json(const json& j, fs::path file) {
    if (j.value("schema", std::string()) != kRunSchema)
        throw Error(ErrorCode::Format, file.string() + ": schema is not " + kRunSchema);
    RunManifest m(std::move(file));
    for (const auto& s : j.at("stages")) {
        StageRecord r;
        r.name = s.at("name").get<std::string>();
        r.inputs = artifacts_from_json(s.at("inputs"));
        r.outputs = artifacts_from_json(s.at("outputs"));
        r.parameters = s.value("parameters", json::object());
        r.seconds = s.value("seconds", 0.0);
        r.error = s.value("error", std::string());
        m.stages_.push_back(std::move(r));
    }
    return m;
}

void RunManifest::save() const {
    if (!directory().empty()) fs::create_directories(directory());
    io::write_json(file_, to_json());
}

std::vector<VerifyIssue> RunManifest::verify() const {
    std::vector<VerifyIssue> issues;
    for (const auto& s : stages_)
        for (const auto* list : {&s.inputs, &s.outputs})
            for (const auto& r : *list) {
                const fs::path p = resolve(r.path);
                if (!fs::is_regular_file(p)) {
                    issues.push_back({s.name, r.path, "missing"});
                    continue;
                }
                if (sha256_file(p) != r.sha256) issues.push_back({s.name, r.path, "hash mismatch"});
            }
    return issues;
}

}  // namespace peel
