#pragma once

#include "amnesia/lowrank.hpp"

#include <filesystem>
#include <string>

namespace amnesia {

// Framed binary layout: magic "FMX1", u32 rank, u8 link, u32 M, u32 N,
// u8 bias flags (bit 0 task, bit 1 example), row-major f64 task factors,
// row-major f64 example factors, then the present bias vectors.
std::string encode_factor_model(const FactorModel& f);
FactorModel decode_factor_model(std::string_view bytes);

void save_factor_model(const FactorModel& f, const std::filesystem::path& path);
FactorModel load_factor_model(const std::filesystem::path& path);

// Human-readable JSON rendering for inspection; parses back losslessly.
std::string factor_model_to_json(const FactorModel& f);
FactorModel factor_model_from_json(const std::string& text);

}  // namespace amnesia
