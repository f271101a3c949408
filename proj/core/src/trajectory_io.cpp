#include "sdelearn/trajectory_io.hpp"

#include "sdelearn/binary_io.hpp"
#include "sdelearn/error.hpp"

#include <charconv>
#include <fstream>
#include <limits>

namespace sdelearn {

namespace {
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kNoiseFlag = 1u;

std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw FormatError(std::string(what) + " exceeds u32 range");
    return static_cast<std::uint32_t>(v);
}
}  // namespace

void write_trajectories(std::ostream& out, const TrajectoryBundle& bundle) {
    binary::write_magic(out, "SDET");
    binary::write_u32(out, kVersion);
    binary::write_u32(out, checked_u32(bundle.dim(), "d"));
    binary::write_u32(out, checked_u32(bundle.steps(), "L"));
    binary::write_u32(out, checked_u32(bundle.count(), "M"));
    binary::write_u32(out, bundle.has_noise() ? kNoiseFlag : 0u);
    binary::write_f64s(out, bundle.grid().times());
    binary::write_f64s(out, bundle.raw_states());
    if (bundle.has_noise()) binary::write_f64s(out, *bundle.raw_noise());
    if (!out) throw FormatError("failed writing trajectory data");
}

void write_trajectories(const std::filesystem::path& path, const TrajectoryBundle& bundle) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    write_trajectories(out, bundle);
}

TrajectoryBundle read_trajectories(std::istream& in) {
    binary::expect_magic(in, "SDET");
    const auto version = binary::read_u32(in, "version");
    if (version != kVersion) throw FormatError("unsupported trajectory file version " + std::to_string(version));
    const std::size_t d = binary::read_u32(in, "d");
    const std::size_t L = binary::read_u32(in, "L");
    const std::size_t M = binary::read_u32(in, "M");
    const auto flags = binary::read_u32(in, "flags");
    if (d == 0 || L < 2 || M == 0) throw FormatError("invalid trajectory header");
    if ((flags & ~kNoiseFlag) != 0) throw FormatError("unknown trajectory flags");

    auto times = binary::read_f64s(in, L, "timestamps");
    auto states = binary::read_f64s(in, M * L * d, "states");
    std::optional<std::vector<double>> noise;
    if (flags & kNoiseFlag) noise = binary::read_f64s(in, M * (L - 1) * d, "noise");
    return TrajectoryBundle(TimeGrid(std::move(times)), d, M, std::move(states), std::move(noise));
}

TrajectoryBundle read_trajectories(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open trajectory file " + path.string());
    return read_trajectories(in);
}

void write_trajectories_csv(std::ostream& out, const TrajectoryBundle& bundle) {
    out << "m,t";
    for (std::size_t k = 1; k <= bundle.dim(); ++k) out << ",x" << k;
    out << '\n';
    char buf[64];
    auto put = [&](double v) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
        (void)ec;
        out.write(buf, end - buf);
    };
    for (std::size_t m = 0; m < bundle.count(); ++m) {
        for (std::size_t l = 0; l < bundle.steps(); ++l) {
            out << m << ',';
            put(bundle.grid()[l]);
            for (double v : bundle.state(m, l)) {
                out << ',';
                put(v);
            }
            out << '\n';
        }
    }
}

void write_trajectories_csv(const std::filesystem::path& path, const TrajectoryBundle& bundle) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    write_trajectories_csv(out, bundle);
}

}  // namespace sdelearn
