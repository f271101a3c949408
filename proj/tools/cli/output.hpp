#pragma once

#include "sdelearn/drift_estimator.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace sdelearn::cli {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::filesystem::path& path);

/// Run record written as manifest.json next to the outputs. Carries the full
/// config text, so `sdelearn <command> --config <(jq -r .config_text)` with
/// the recorded seed reproduces the run.
class Manifest {
public:
    Manifest(std::string command, const std::string& config_text, std::string config_path);

    void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
    void add_output(const std::filesystem::path& file);
    /// Hashes every recorded output and writes `dir/manifest.json`.
    void write(const std::filesystem::path& dir) const;

private:
    std::string command_;
    std::string config_text_;
    std::string config_path_;
    nlohmann::json extra_ = nlohmann::json::object();
    std::vector<std::filesystem::path> outputs_;
};

/// Fixed-width text table; numbers are formatted by the caller.
class TextTable {
public:
    explicit TextTable(std::vector<std::string> header) : header_(std::move(header)) {}
    void add_row(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
    std::string render() const;
    std::string csv() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Shortest round-trip representation.
std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& text);

/// f and f^ on a uniform grid over the estimate's basis domain: up to
/// `per_dim` points per coordinate. Columns x1..xd, f1..fd, fhat1..fhatd.
std::string drift_grid_csv(const VectorField& truth, const DriftEstimate& estimate, std::size_t per_dim);

}  // namespace sdelearn::cli
