#include "aad/signal_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "aad/error.hpp"

namespace aad {

static_assert(std::endian::native == std::endian::little, "payloads are little-endian");

namespace {

std::vector<char> slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_floats(const std::filesystem::path& path, const std::vector<float>& v)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (!out) throw IngestionError("write failed: " + path.string());
}

std::vector<float> read_floats(const std::filesystem::path& path, std::size_t expected)
{
    const std::vector<char> bytes = slurp(path);
    if (bytes.size() != expected * sizeof(float))
        throw IngestionError(path.string() + ": expected " + std::to_string(expected * sizeof(float)) +
                             " bytes, found " + std::to_string(bytes.size()));
    std::vector<float> v(expected);
    std::memcpy(v.data(), bytes.data(), bytes.size());
    return v;
}

std::uint32_t u32(const char* p)
{
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

std::uint16_t u16(const char* p)
{
    std::uint16_t v;
    std::memcpy(&v, p, 2);
    return v;
}

} // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& payload)
{
    return std::filesystem::path(payload.string() + ".json");
}

void write_f32(const std::filesystem::path& path, const MultiSignal& signal, const nlohmann::json& extra)
{
    const Eigen::MatrixXd& d = signal.data();
    std::vector<float> v(static_cast<std::size_t>(d.size()));
    std::size_t k = 0;
    for (Eigen::Index c = 0; c < d.rows(); ++c)
        for (Eigen::Index i = 0; i < d.cols(); ++i) v[k++] = static_cast<float>(d(c, i));
    write_floats(path, v);

    nlohmann::json meta = extra;
    meta["fs"] = signal.fs();
    meta["channels"] = signal.channels();
    meta["samples"] = signal.length();
    std::ofstream out(sidecar_path(path));
    if (!out) throw IngestionError("cannot write " + sidecar_path(path).string());
    out << meta.dump(2) << '\n';
}

nlohmann::json read_sidecar(const std::filesystem::path& path)
{
    const auto side = sidecar_path(path);
    std::ifstream in(side);
    if (!in) throw IngestionError("missing sidecar " + side.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError(side.string() + ": " + e.what());
    }
}

MultiSignal read_f32(const std::filesystem::path& path)
{
    const nlohmann::json meta = read_sidecar(path);
    std::vector<std::string> channels;
    double fs = 0.0;
    Eigen::Index samples = 0;
    try {
        channels = meta.at("channels").get<std::vector<std::string>>();
        fs = meta.at("fs").get<double>();
        samples = meta.at("samples").get<Eigen::Index>();
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError(sidecar_path(path).string() + ": " + e.what());
    }
    const auto nch = static_cast<Eigen::Index>(channels.size());
    const std::vector<float> v = read_floats(path, static_cast<std::size_t>(nch * samples));
    Eigen::MatrixXd d(nch, samples);
    std::size_t k = 0;
    for (Eigen::Index c = 0; c < nch; ++c)
        for (Eigen::Index i = 0; i < samples; ++i) d(c, i) = v[k++];
    try {
        return MultiSignal(std::move(channels), std::move(d), fs);
    } catch (const Error& e) {
        throw IngestionError(path.string() + ": " + e.what());
    }
}

void write_f32_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m)
{
    std::vector<float> v(static_cast<std::size_t>(m.size()));
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) v[k++] = static_cast<float>(m(r, c));
    write_floats(path, v);
}

Eigen::MatrixXd read_f32_matrix(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols)
{
    const std::vector<float> v = read_floats(path, static_cast<std::size_t>(rows * cols));
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[k++];
    return m;
}

Signal read_wav(const std::filesystem::path& path)
{
    const std::vector<char> b = slurp(path);
    const std::string where = path.string() + ": ";
    if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0)
        throw IngestionError(where + "not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const char* data = nullptr;
    std::size_t data_size = 0;
    std::size_t pos = 12;
    while (pos + 8 <= b.size()) {
        const char* id = b.data() + pos;
        const std::size_t size = u32(id + 4);
        const std::size_t body = pos + 8;
        if (body + size > b.size() && std::memcmp(id, "data", 4) != 0)
            throw IngestionError(where + "truncated chunk");
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (size < 16) throw IngestionError(where + "short fmt chunk");
            format = u16(b.data() + body);
            channels = u16(b.data() + body + 2);
            rate = u32(b.data() + body + 4);
            bits = u16(b.data() + body + 14);
            if (format == 0xFFFE && size >= 26) format = u16(b.data() + body + 24);
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = b.data() + body;
            data_size = std::min(size, b.size() - body);
        }
        pos = body + size + (size & 1);
    }
    if (format != 1) throw IngestionError(where + "only PCM WAV is supported");
    if (bits != 16 && bits != 24) throw IngestionError(where + "only 16/24-bit PCM is supported");
    if (channels == 0 || rate == 0 || data == nullptr) throw IngestionError(where + "missing fmt or data chunk");

    const std::size_t width = bits / 8;
    const std::size_t frames = data_size / (width * channels);
    const double scale = bits == 16 ? 32768.0 : 8388608.0;
    std::vector<double> out(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const auto* p = reinterpret_cast<const unsigned char*>(data + (f * channels + c) * width);
            std::int32_t v;
            if (bits == 16) {
                v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
            } else {
                v = p[0] | (p[1] << 8) | (p[2] << 16);
                if (v & 0x800000) v -= 0x1000000;
            }
            acc += v / scale;
        }
        out[f] = acc / channels;
    }
    return Signal(std::move(out), rate);
}

void write_wav16(const std::filesystem::path& path, const Signal& signal)
{
    const auto n = static_cast<std::uint32_t>(signal.size());
    const auto rate = static_cast<std::uint32_t>(std::lround(signal.fs()));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot write " + path.string());
    auto put32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto put16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
    out.write("RIFF", 4);
    put32(36 + 2 * n);
    out.write("WAVEfmt ", 8);
    put32(16);
    put16(1);
    put16(1);
    put32(rate);
    put32(rate * 2);
    put16(2);
    put16(16);
    out.write("data", 4);
    put32(2 * n);
    for (double x : signal.samples()) {
        const double c = std::clamp(x, -1.0, 1.0);
        put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::min(32767L, std::lround(c * 32768.0)))));
    }
}

std::string file_digest(const std::filesystem::path& path)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : slurp(path)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

} // namespace aad
