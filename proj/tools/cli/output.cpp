#include "output.hpp"

#include "sdelearn/error.hpp"

#include <Eigen/Core>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#ifndef SDELEARN_VERSION
#define SDELEARN_VERSION "unknown"
#endif

namespace sdelearn::cli {

std::string sha256_hex(const std::string& data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) {
        throw Error("SHA-256 computation failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return sha256_hex(buf.str());
}

Manifest::Manifest(std::string command, const std::string& config_text, std::string config_path)
    : command_(std::move(command)), config_text_(config_text), config_path_(std::move(config_path)) {}

void Manifest::add_output(const std::filesystem::path& file) { outputs_.push_back(file); }

void Manifest::write(const std::filesystem::path& dir) const {
    nlohmann::json j;
    j["tool"] = "sdelearn";
    j["version"] = SDELEARN_VERSION;
    j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    j["command"] = command_;
    j["config_path"] = config_path_;
    j["config_sha256"] = sha256_hex(config_text_);
    j["config_text"] = config_text_;
    j["parameters"] = extra_;
    nlohmann::json outs = nlohmann::json::array();
    for (const auto& f : outputs_) {
        outs.push_back({{"file", f.filename().string()}, {"sha256", sha256_file(f)}});
    }
    j["outputs"] = outs;
    write_text(dir / "manifest.json", j.dump(2) + "\n");
}

std::string TextTable::render() const {
    std::vector<std::size_t> width(header_.size());
    for (std::size_t c = 0; c < header_.size(); ++c) width[c] = header_[c].size();
    for (const auto& row : rows_) {
        for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < width.size(); ++c) {
            const std::string cell = c < cells.size() ? cells[c] : "";
            out << (c ? "  " : "") << std::left << std::setw(static_cast<int>(width[c])) << cell;
        }
        out << '\n';
    };
    line(header_);
    std::vector<std::string> rule;
    for (auto w : width) rule.emplace_back(w, '-');
    line(rule);
    for (const auto& row : rows_) line(row);
    return out.str();
}

std::string TextTable::csv() const {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) out << (c ? "," : "") << cells[c];
        out << '\n';
    };
    line(header_);
    for (const auto& row : rows_) line(row);
    return out.str();
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("write failed: " + path.string());
}

std::string drift_grid_csv(const VectorField& truth, const DriftEstimate& estimate, std::size_t per_dim) {
    const Domain dom = estimate.basis().domain();
    const std::size_t d = dom.dim();
    std::ostringstream out;
    for (std::size_t k = 0; k < d; ++k) out << (k ? "," : "") << "x" << k + 1;
    for (std::size_t k = 0; k < d; ++k) out << ",f" << k + 1;
    for (std::size_t k = 0; k < d; ++k) out << ",fhat" << k + 1;
    out << '\n';

    std::size_t total = 1;
    for (std::size_t k = 0; k < d; ++k) total *= per_dim;
    std::vector<double> x(d), f(d), fh(d);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rest = flat;
        for (std::size_t k = d; k-- > 0;) {
            const std::size_t i = rest % per_dim;
            rest /= per_dim;
            const double s = per_dim > 1 ? static_cast<double>(i) / static_cast<double>(per_dim - 1) : 0.5;
            x[k] = dom.lower[k] + s * (dom.upper[k] - dom.lower[k]);
        }
        truth(x, f);
        estimate.eval(x, fh);
        for (std::size_t k = 0; k < d; ++k) out << (k ? "," : "") << format_double(x[k]);
        for (double v : f) out << ',' << format_double(v);
        for (double v : fh) out << ',' << format_double(v);
        out << '\n';
    }
    return out.str();
}

}  // namespace sdelearn::cli
