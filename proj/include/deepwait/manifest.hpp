#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "deepwait/error.hpp"

namespace deepwait {

inline constexpr const char* kVersion = "0.1.0";

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/** FNV-1a over the file bytes; cheap, stable, good enough to detect edits. */
inline std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for digesting");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    for (;;) {
        in.read(buf, sizeof buf);
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (got < static_cast<std::streamsize>(sizeof buf)) break;
    }
    return hex64(h);
}

inline std::string now_utc_iso() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct ManifestFile {
    std::string role;
    std::string path;
    std::string digest;
};

/**
 * Record of one CLI run: the command, every resolved flag (duplicates allowed,
 * order preserved), and digests of all files read and written. Re-running the
 * recorded command with the recorded flags must reproduce the outputs byte for
 * byte; only `created` is allowed to differ.
 */
struct RunManifest {
    std::string command;
    std::string version = kVersion;
    std::uint64_t seed = 0;
    std::string created;
    std::vector<std::pair<std::string, std::string>> flags;
    std::vector<ManifestFile> inputs;
    std::vector<ManifestFile> outputs;

    void add_flag(const std::string& key, const std::string& value) {
        flags.emplace_back(key, value);
    }
    void add_input(const std::string& role, const std::filesystem::path& path) {
        inputs.push_back({role, path.string(), file_digest(path)});
    }
    void add_output(const std::string& role, const std::filesystem::path& path) {
        outputs.push_back({role, path.string(), file_digest(path)});
    }

    const std::string* flag(const std::string& key) const {
        for (const auto& [k, v] : flags)
            if (k == key) return &v;
        return nullptr;
    }
    std::vector<std::string> flag_values(const std::string& key) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : flags)
            if (k == key) out.push_back(v);
        return out;
    }
};

inline void save_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["command"] = manifest.command;
    j["version"] = manifest.version;
    j["seed"] = manifest.seed;
    j["created"] = manifest.created.empty() ? now_utc_iso() : manifest.created;
    j["flags"] = nlohmann::ordered_json::array();
    for (const auto& [key, value] : manifest.flags)
        j["flags"].push_back({{"key", key}, {"value", value}});
    auto file_array = [](const std::vector<ManifestFile>& files) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& f : files)
            arr.push_back({{"role", f.role}, {"path", f.path}, {"digest", f.digest}});
        return arr;
    };
    j["inputs"] = file_array(manifest.inputs);
    j["outputs"] = file_array(manifest.outputs);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline RunManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path.string() + "': " + e.what());
    }
    RunManifest manifest;
    try {
        manifest.command = j.at("command").get<std::string>();
        manifest.version = j.at("version").get<std::string>();
        manifest.seed = j.at("seed").get<std::uint64_t>();
        manifest.created = j.at("created").get<std::string>();
        for (const auto& f : j.at("flags"))
            manifest.flags.emplace_back(f.at("key").get<std::string>(),
                                        f.at("value").get<std::string>());
        auto read_files = [](const nlohmann::ordered_json& arr) {
            std::vector<ManifestFile> files;
            for (const auto& f : arr)
                files.push_back({f.at("role").get<std::string>(),
                                 f.at("path").get<std::string>(),
                                 f.at("digest").get<std::string>()});
            return files;
        };
        manifest.inputs = read_files(j.at("inputs"));
        manifest.outputs = read_files(j.at("outputs"));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path.string() + "': not a run manifest: " + e.what());
    }
    return manifest;
}

}  // namespace deepwait
