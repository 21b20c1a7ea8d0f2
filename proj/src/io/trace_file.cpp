#include "pnr/io/trace_file.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "pnr/errors.hpp"

namespace pnr::io {

namespace {

// The formats are little-endian by definition; these helpers keep the
// serialization independent of the host representation of integers.
void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
  const unsigned char* data;
  std::size_t size;
  std::size_t at = 0;

  void need(std::size_t n) const {
    if (at + n > size) throw IoError("trace file: truncated header");
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(data[at] | (data[at + 1] << 8));
    at += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[at + i]) << (8 * i);
    at += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(data[at + i]) << (8 * i);
    at += 8;
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
};

std::vector<ProbeRange> ranges_from_labels(const std::vector<int>& labels,
                                           const std::vector<double>& alpha_sq) {
  std::vector<ProbeRange> out(alpha_sq.size());
  for (std::size_t k = 0; k < alpha_sq.size(); ++k) out[k].alpha_sq = alpha_sq[k];
  if (labels.empty()) {
    if (alpha_sq.size() > 1) throw IoError("trace file: unlabeled traces with several probes");
    if (!out.empty()) out[0].trial_count = 0;
    return out;
  }
  int prev = -1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int k = labels[i];
    if (k < 0 || static_cast<std::size_t>(k) >= alpha_sq.size())
      throw IoError("trace file: probe label out of range");
    if (k < prev) throw IoError("trace file: probe labels must be grouped in order");
    if (k != prev) out[static_cast<std::size_t>(k)].first_trial = static_cast<std::uint32_t>(i);
    out[static_cast<std::size_t>(k)].trial_count++;
    prev = k;
  }
  return out;
}

}  // namespace

void write_trace_file(const std::filesystem::path& path, const TraceSet& traces,
                      const std::vector<double>& probe_alpha_sq, SampleFormat format) {
  const auto trials = static_cast<std::uint32_t>(traces.trial_count());
  const auto samples = static_cast<std::uint32_t>(traces.sample_count());
  const auto ranges = ranges_from_labels(traces.probe_labels, probe_alpha_sq);

  std::string header;
  header.append(kTraceMagic, sizeof(kTraceMagic));
  put_u16(header, kTraceVersion);
  put_u32(header, trials);
  put_u32(header, samples);
  put_u16(header, static_cast<std::uint16_t>(format));
  put_u32(header, static_cast<std::uint32_t>(ranges.size()));
  for (const auto& r : ranges) {
    put_f64(header, r.alpha_sq);
    put_u32(header, r.first_trial);
    put_u32(header, r.trial_count);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  if (format == SampleFormat::float64) {
    std::string row;
    for (Eigen::Index i = 0; i < traces.trial_count(); ++i) {
      row.clear();
      for (Eigen::Index t = 0; t < traces.sample_count(); ++t) put_f64(row, traces.data(i, t));
      out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
  } else {
    std::string row;
    for (Eigen::Index i = 0; i < traces.trial_count(); ++i) {
      row.clear();
      for (Eigen::Index t = 0; t < traces.sample_count(); ++t) {
        const double clamped = std::clamp(std::round(traces.data(i, t)), -32768.0, 32767.0);
        put_u16(row, static_cast<std::uint16_t>(static_cast<std::int16_t>(clamped)));
      }
      out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

TraceFile read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};
  r.need(sizeof(kTraceMagic));
  if (std::memcmp(bytes.data(), kTraceMagic, sizeof(kTraceMagic)) != 0)
    throw IoError("trace file: bad magic");
  r.at = sizeof(kTraceMagic);
  if (r.u16() != kTraceVersion) throw IoError("trace file: unsupported version");

  TraceFile file;
  const std::uint32_t trials = r.u32();
  const std::uint32_t samples = r.u32();
  const std::uint16_t format = r.u16();
  if (format > 1) throw IoError("trace file: unknown sample format");
  file.format = static_cast<SampleFormat>(format);
  const std::uint32_t probes = r.u32();
  file.probes.resize(probes);
  for (auto& range : file.probes) {
    range.alpha_sq = r.f64();
    range.first_trial = r.u32();
    range.trial_count = r.u32();
  }

  const std::size_t sample_size = file.format == SampleFormat::float64 ? 8 : 2;
  const std::size_t expected =
      static_cast<std::size_t>(trials) * samples * sample_size;
  if (bytes.size() - r.at != expected)
    throw IoError("trace file: payload length does not match header");

  file.traces.data.resize(trials, samples);
  if (file.format == SampleFormat::float64) {
    for (std::uint32_t i = 0; i < trials; ++i)
      for (std::uint32_t t = 0; t < samples; ++t) file.traces.data(i, t) = r.f64();
  } else {
    for (std::uint32_t i = 0; i < trials; ++i)
      for (std::uint32_t t = 0; t < samples; ++t)
        file.traces.data(i, t) = static_cast<double>(static_cast<std::int16_t>(r.u16()));
  }

  file.traces.probe_labels.assign(trials, 0);
  for (std::size_t k = 0; k < file.probes.size(); ++k) {
    const auto& range = file.probes[k];
    if (static_cast<std::size_t>(range.first_trial) + range.trial_count > trials)
      throw IoError("trace file: probe range out of bounds");
    for (std::uint32_t i = 0; i < range.trial_count; ++i)
      file.traces.probe_labels[range.first_trial + i] = static_cast<int>(k);
  }
  return file;
}

}  // namespace pnr::io
