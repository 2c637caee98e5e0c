#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "aad/signal.hpp"

namespace aad {

/// Little-endian float32 payload, channel-major, plus `<path>.json` sidecar
/// {"fs", "channels", "samples"} with optional extra keys.
void write_f32(const std::filesystem::path& path, const MultiSignal& signal,
               const nlohmann::json& extra = nlohmann::json::object());
MultiSignal read_f32(const std::filesystem::path& path);
nlohmann::json read_sidecar(const std::filesystem::path& path);

/// Raw float32 matrix payload (rows x cols, row-major), no sidecar.
void write_f32_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_f32_matrix(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols);

std::filesystem::path sidecar_path(const std::filesystem::path& payload);

/// 16- or 24-bit PCM WAV. Multichannel input is averaged to mono; samples
/// are scaled to [-1, 1).
Signal read_wav(const std::filesystem::path& path);
/// 16-bit PCM mono; samples are clipped to [-1, 1].
void write_wav16(const std::filesystem::path& path, const Signal& signal);

/// FNV-1a 64-bit digest of a file's bytes, hex encoded.
std::string file_digest(const std::filesystem::path& path);

} // namespace aad
