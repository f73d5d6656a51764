#include "rbdm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace rbdm {

namespace {

constexpr char kMagic[8] = {'R', 'B', 'D', 'M', 'C', 'K', 'P', 'T'};

void write_u32_le(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

void write_f32_le(std::ostream& os, const std::vector<float>& v) {
    for (float f : v) {
        const uint32_t u = std::bit_cast<uint32_t>(f);
        unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                              static_cast<unsigned char>(u >> 16),
                              static_cast<unsigned char>(u >> 24)};
        os.write(reinterpret_cast<const char*>(b), 4);
    }
}

std::vector<float> read_f32_le(std::istream& is, size_t n, const char* what) {
    std::vector<float> v(n);
    std::vector<unsigned char> buf(n * 4);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<size_t>(is.gcount()) != buf.size()) {
        throw std::runtime_error(std::string("checkpoint: truncated ") + what + " payload");
    }
    for (size_t i = 0; i < n; ++i) {
        const uint32_t u = static_cast<uint32_t>(buf[4 * i]) |
                           static_cast<uint32_t>(buf[4 * i + 1]) << 8 |
                           static_cast<uint32_t>(buf[4 * i + 2]) << 16 |
                           static_cast<uint32_t>(buf[4 * i + 3]) << 24;
        v[i] = std::bit_cast<float>(u);
    }
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::json header;
    header["format_version"] = ckpt.format_version;
    header["schedule"] = {{"T", ckpt.T}, {"kappa", ckpt.kappa}, {"gamma", ckpt.gamma}};
    header["denoiser"] = {{"image_channels", ckpt.denoiser.image_channels},
                          {"base_channels", ckpt.denoiser.base_channels},
                          {"channel_multipliers", ckpt.denoiser.channel_multipliers},
                          {"res_blocks_per_scale", ckpt.denoiser.res_blocks_per_scale},
                          {"timestep_embed_dim", ckpt.denoiser.timestep_embed_dim}};
    header["iteration"] = ckpt.iteration;
    header["master_seed"] = ckpt.master_seed;
    header["param_count"] = ckpt.params.size();
    header["has_optimizer_state"] = ckpt.has_optimizer_state;
    const std::string hs = header.dump();

    if (ckpt.has_optimizer_state &&
        (ckpt.adam_m.size() != ckpt.params.size() || ckpt.adam_v.size() != ckpt.params.size())) {
        throw std::runtime_error("checkpoint: optimizer state length mismatch");
    }

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_u32_le(os, static_cast<uint32_t>(hs.size()));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    write_f32_le(os, ckpt.params);
    if (ckpt.has_optimizer_state) {
        write_f32_le(os, ckpt.adam_m);
        write_f32_le(os, ckpt.adam_v);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);

    char magic[8];
    is.read(magic, sizeof(magic));
    if (is.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path + " (not a checkpoint file)");
    }
    const uint32_t hlen = read_u32_le(is);
    if (!is || hlen == 0 || hlen > (1u << 20)) {
        throw std::runtime_error("checkpoint: implausible header length in " + path);
    }
    std::string hs(hlen, '\0');
    is.read(hs.data(), hlen);
    if (static_cast<uint32_t>(is.gcount()) != hlen) {
        throw std::runtime_error("checkpoint: truncated header in " + path);
    }

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint: header is not valid JSON in " + path + ": " + e.what());
    }

    Checkpoint ckpt;
    try {
        ckpt.format_version = header.at("format_version").get<int>();
        if (ckpt.format_version != 1) {
            throw std::runtime_error("unsupported format_version " +
                                     std::to_string(ckpt.format_version));
        }
        const auto& sch = header.at("schedule");
        ckpt.T = sch.at("T").get<int>();
        ckpt.kappa = sch.at("kappa").get<double>();
        ckpt.gamma = sch.at("gamma").get<double>();
        const auto& den = header.at("denoiser");
        ckpt.denoiser.image_channels = den.at("image_channels").get<int>();
        ckpt.denoiser.base_channels = den.at("base_channels").get<int>();
        ckpt.denoiser.channel_multipliers = den.at("channel_multipliers").get<std::vector<int>>();
        ckpt.denoiser.res_blocks_per_scale = den.at("res_blocks_per_scale").get<int>();
        ckpt.denoiser.timestep_embed_dim = den.at("timestep_embed_dim").get<int>();
        ckpt.iteration = header.at("iteration").get<int64_t>();
        ckpt.master_seed = header.at("master_seed").get<uint64_t>();
        ckpt.has_optimizer_state = header.at("has_optimizer_state").get<bool>();
        const size_t n = header.at("param_count").get<size_t>();

        // The architecture named in the header must account for the payload
        // exactly.
        Denoiser probe(ckpt.denoiser);
        if (probe.param_count() != n) {
            throw std::runtime_error("param_count " + std::to_string(n) +
                                     " does not match the architecture (expected " +
                                     std::to_string(probe.param_count()) + ")");
        }
        ckpt.params = read_f32_le(is, n, "weight");
        if (ckpt.has_optimizer_state) {
            ckpt.adam_m = read_f32_le(is, n, "adam_m");
            ckpt.adam_v = read_f32_le(is, n, "adam_v");
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint: malformed header in " + path + ": " + e.what());
    }

    char extra;
    if (is.read(&extra, 1) && is.gcount() == 1) {
        throw std::runtime_error("checkpoint: trailing bytes after payload in " + path);
    }
    return ckpt;
}

}  // namespace rbdm
