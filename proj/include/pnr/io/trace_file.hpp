#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pnr/trace_set.hpp"

namespace pnr::io {

inline constexpr char kTraceMagic[8] = {'P', 'N', 'R', 'T', 'R', 'A', 'C', 'E'};
inline constexpr std::uint16_t kTraceVersion = 1;

enum class SampleFormat : std::uint16_t { int16 = 0, float64 = 1 };

struct ProbeRange {
  double alpha_sq = 0.0;
  std::uint32_t first_trial = 0;
  std::uint32_t trial_count = 0;
};

struct TraceFile {
  TraceSet traces;  // probe_labels populated from the probe table
  std::vector<ProbeRange> probes;
  SampleFormat format = SampleFormat::float64;
};

//! Binary trace format: magic, version u16, trial_count u32, sample_count
//! u32, sample_format u16, probe_count u32, probe table (alpha_sq f64,
//! first_trial u32, trial_count u32 per probe), then the row-major payload.
//! Everything little-endian. int16 payloads are rounded and clamped on
//! write and widened to double on read.
void write_trace_file(const std::filesystem::path& path, const TraceSet& traces,
                      const std::vector<double>& probe_alpha_sq,
                      SampleFormat format = SampleFormat::float64);

TraceFile read_trace_file(const std::filesystem::path& path);

}  // namespace pnr::io
