#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lpsd/model.hpp"
#include "lpsd/nn.hpp"
#include "lpsd/synthetic.hpp"

// On-disk formats. Everything is little-endian; loads validate magic,
// version and size arithmetic and throw lpsd::FormatError with the byte
// offset on any mismatch — never a silently truncated result.
//
// Dataset ("LPSD", version 1): magic, u16 version, u32 record count, then
// per record u32 n, u32 m, f64 snr_db (NaN = noiseless), f64 mag, and the
// x then y payloads as f32, time fastest within each trace.
//
// Checkpoint ("LPCK", version 1): magic, u16 version, model config (u16
// dims, u32 kappa, u32 hidden, u32 gn_groups, u8 gn_affine, u32 unroll),
// f64 eta_raw, u8 optimizer-state flag, u32 parameter count, then
// length-prefixed named blocks (u16 name length, name, u8 rank, u32 dims,
// f64 data). With optimizer state: u64 step count, then per parameter the
// first and second moment blocks as f64.

namespace lpsd::io {

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

struct OptimizerState {
    std::int64_t step_count = 0;
    std::vector<std::vector<double>> first_moments;
    std::vector<std::vector<double>> second_moments;
};

void save_model(const model::UnrolledModel& m, const std::string& path,
                const OptimizerState* opt_state = nullptr);

struct LoadedModel {
    model::UnrolledModel model;
    std::optional<OptimizerState> opt_state;
};

// expect, when given, is checked against the stored config (kappa, dims,
// hidden, unroll); a mismatch throws lpsd::ConfigError before any tensor is
// built.
LoadedModel load_model(const std::string& path,
                       const std::optional<model::ModelConfig>& expect = {});

// CSV helpers: header row, '.' decimal separator, no quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

void write_csv(const CsvTable& table, const std::string& path);
CsvTable read_csv(const std::string& path);

std::string format_double(double v);

} // namespace lpsd::io
