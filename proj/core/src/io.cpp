#include "layerscope/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "layerscope/csv.hpp"
#include "layerscope/error.hpp"

namespace layerscope {

namespace fs = std::filesystem;

namespace {

constexpr std::array<unsigned char, 4> kMagic = {0x4C, 0x41, 0x4D, 0x31};  // "LAM1"
constexpr unsigned char kVersion = 0x01;

[[noreturn]] void io_error(const std::string& code, const std::string& message) {
  throw Error("core-io", code, message);
}

void require_finite(const Matrix& values, DType dtype, const std::string& what) {
  const double limit = dtype == DType::f32 ? static_cast<double>(std::numeric_limits<float>::max())
                                           : std::numeric_limits<double>::max();
  for (Index j = 0; j < values.cols(); ++j) {
    for (Index i = 0; i < values.rows(); ++i) {
      const double v = values(i, j);
      if (!std::isfinite(v) || std::abs(v) > limit) {
        io_error("non-finite", what + ": non-finite value at (" + std::to_string(i) + ", " +
                                   std::to_string(j) + ")");
      }
    }
  }
}

void put_u64(unsigned char* out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out[b] = static_cast<unsigned char>(v >> (8 * b));
}

std::uint64_t get_u64(const unsigned char* in) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(in[b]) << (8 * b);
  return v;
}

std::vector<std::string> default_channel_ids(Index n) {
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(n));
  for (Index c = 0; c < n; ++c) ids.push_back("ch" + std::to_string(c));
  return ids;
}

double parse_number(const std::string& field, const fs::path& path, std::size_t line) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    io_error("malformed-row", path.string() + ":" + std::to_string(line) + ": bad number '" +
                                  field + "'");
  }
  return v;
}

}  // namespace

std::string to_string(Modality m) {
  switch (m) {
    case Modality::fmri: return "fmri";
    case Modality::ecog: return "ecog";
    case Modality::synthetic: return "synthetic";
  }
  return "synthetic";
}

Modality parse_modality(const std::string& text) {
  if (text == "fmri") return Modality::fmri;
  if (text == "ecog") return Modality::ecog;
  if (text == "synthetic") return Modality::synthetic;
  io_error("invalid-manifest", "unknown modality '" + text + "'");
}

Json Manifest::to_json() const {
  Json j;
  j["subject"] = subject;
  j["modality"] = layerscope::to_string(modality);
  j["model"] = model;
  j["layer"] = layer;
  j["extra"] = extra;
  return j;
}

Manifest Manifest::from_json(const Json& j) {
  Manifest m;
  try {
    if (j.contains("subject")) m.subject = j.at("subject").get<std::string>();
    if (j.contains("modality")) m.modality = parse_modality(j.at("modality").get<std::string>());
    if (j.contains("model")) m.model = j.at("model").get<std::string>();
    if (j.contains("layer")) m.layer = j.at("layer").get<int>();
    if (j.contains("extra")) m.extra = j.at("extra").get<std::map<std::string, std::string>>();
  } catch (const Json::exception& e) {
    io_error("invalid-manifest", e.what());
  }
  if (m.layer < 0) io_error("invalid-manifest", "layer must be >= 0");
  return m;
}

ActivationMatrix::ActivationMatrix(Matrix values, Manifest meta, DType dtype)
    : values_(std::move(values)), meta_(std::move(meta)), dtype_(dtype) {
  if (values_.rows() < 2) io_error("invalid-shape", "activation matrix needs n_samples >= 2");
  if (values_.cols() < 1) io_error("invalid-shape", "activation matrix needs n_dims >= 1");
  require_finite(values_, DType::f64, "activation matrix");
}

Sampling Sampling::from_period(double seconds) {
  if (!(seconds > 0.0) || !std::isfinite(seconds))
    io_error("invalid-sampling", "sampling period must be positive");
  Sampling s;
  s.period_ = seconds;
  return s;
}

Sampling Sampling::from_rate(double hz) {
  if (!(hz > 0.0) || !std::isfinite(hz)) io_error("invalid-sampling", "sampling rate must be positive");
  Sampling s;
  s.rate_ = hz;
  return s;
}

Json Sampling::to_json() const {
  Json j;
  if (period_) j["period"] = *period_;
  if (rate_) j["rate"] = *rate_;
  return j;
}

Sampling Sampling::from_json(const Json& j) {
  const bool has_p = j.contains("period");
  const bool has_r = j.contains("rate");
  if (has_p == has_r) io_error("invalid-sampling", "exactly one of period/rate must be present");
  try {
    return has_p ? from_period(j.at("period").get<double>()) : from_rate(j.at("rate").get<double>());
  } catch (const Json::exception& e) {
    io_error("invalid-sampling", e.what());
  }
}

ResponseSeries::ResponseSeries(Matrix values, Sampling sampling, std::vector<std::string> channel_ids,
                               Manifest meta, DType dtype)
    : values_(std::move(values)),
      sampling_(sampling),
      channel_ids_(std::move(channel_ids)),
      meta_(std::move(meta)),
      dtype_(dtype) {
  if (values_.rows() < 1 || values_.cols() < 1) io_error("invalid-shape", "empty response series");
  require_finite(values_, DType::f64, "response series");
  if (channel_ids_.empty()) channel_ids_ = default_channel_ids(values_.cols());
  if (static_cast<Index>(channel_ids_.size()) != values_.cols())
    io_error("invalid-shape", "channel_ids length does not match n_channels");
}

Timeline::Timeline(std::vector<Event> events) : events_(std::move(events)) {
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const Event& e = events_[i];
    if (!std::isfinite(e.onset) || !std::isfinite(e.offset))
      io_error("invalid-event", "event " + std::to_string(i) + " has non-finite timing");
    if (e.offset < e.onset)
      io_error("invalid-event", "event " + std::to_string(i) + " ends before it starts");
    if (i > 0 && e.onset < events_[i - 1].onset)
      io_error("unordered-onsets", "event " + std::to_string(i) + " onset decreases");
  }
}

std::vector<double> Timeline::onsets() const {
  std::vector<double> out;
  out.reserve(events_.size());
  for (const auto& e : events_) out.push_back(e.onset);
  return out;
}

fs::path manifest_path(const fs::path& path) {
  fs::path p = path;
  p += ".manifest";
  return p;
}

void write_manifest(const fs::path& path, const Json& manifest) {
  std::ofstream out(manifest_path(path), std::ios::binary | std::ios::trunc);
  if (!out) io_error("io", "cannot write " + manifest_path(path).string());
  out << manifest.dump(2) << '\n';
  if (!out) io_error("io", "failed writing " + manifest_path(path).string());
}

std::optional<Json> read_manifest(const fs::path& path) {
  const fs::path mp = manifest_path(path);
  if (!fs::exists(mp)) return std::nullopt;
  std::ifstream in(mp, std::ios::binary);
  if (!in) io_error("io", "cannot read " + mp.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    io_error("invalid-manifest", mp.string() + ": " + e.what());
  }
}

void write_lam(const fs::path& path, const Matrix& values, DType dtype, const std::optional<Json>& manifest) {
  if (values.rows() < 1 || values.cols() < 1) io_error("invalid-shape", "cannot write an empty matrix");
  require_finite(values, dtype, "refusing to write " + path.string());

  const std::size_t width = dtype == DType::f32 ? 4 : 8;
  const auto rows = static_cast<std::uint64_t>(values.rows());
  const auto cols = static_cast<std::uint64_t>(values.cols());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("io", "cannot open " + path.string() + " for writing");

  std::array<unsigned char, kLamHeaderBytes> header{};
  std::memcpy(header.data(), kMagic.data(), kMagic.size());
  header[4] = kVersion;
  header[5] = static_cast<unsigned char>(dtype);
  put_u64(header.data() + 8, rows);
  put_u64(header.data() + 16, cols);
  out.write(reinterpret_cast<const char*>(header.data()), header.size());

  std::vector<unsigned char> row_bytes(cols * width);
  for (std::uint64_t i = 0; i < rows; ++i) {
    unsigned char* p = row_bytes.data();
    for (std::uint64_t j = 0; j < cols; ++j) {
      const double v = values(static_cast<Index>(i), static_cast<Index>(j));
      if (dtype == DType::f32) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int b = 0; b < 4; ++b) *p++ = static_cast<unsigned char>(bits >> (8 * b));
      } else {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) *p++ = static_cast<unsigned char>(bits >> (8 * b));
      }
    }
    out.write(reinterpret_cast<const char*>(row_bytes.data()), static_cast<std::streamsize>(row_bytes.size()));
  }
  out.close();
  if (!out) io_error("io", "failed writing " + path.string());

  if (manifest) write_manifest(path, *manifest);
}

LamFile read_lam(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) io_error("not-found", path.string() + ": no such file");
  const auto size = fs::file_size(path, ec);
  if (ec) io_error("io", path.string() + ": " + ec.message());

  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("io", "cannot open " + path.string());

  std::array<unsigned char, kLamHeaderBytes> header{};
  if (size < 4) io_error("truncated", path.string() + ": file shorter than the magic bytes");
  in.read(reinterpret_cast<char*>(header.data()), static_cast<std::streamsize>(std::min<std::uintmax_t>(size, header.size())));
  if (std::memcmp(header.data(), kMagic.data(), kMagic.size()) != 0)
    io_error("bad-magic", path.string() + ": bad magic (expected LAM1)");
  if (size < kLamHeaderBytes) io_error("truncated", path.string() + ": truncated header");
  if (header[4] != kVersion)
    io_error("unsupported-version", path.string() + ": unsupported version " + std::to_string(header[4]));
  if (header[5] != 0x00 && header[5] != 0x01)
    io_error("unsupported-dtype", path.string() + ": unsupported dtype " + std::to_string(header[5]));
  if (header[6] != 0 || header[7] != 0) io_error("bad-header", path.string() + ": reserved bytes are not zero");

  const DType dtype = static_cast<DType>(header[5]);
  const std::uint64_t rows = get_u64(header.data() + 8);
  const std::uint64_t cols = get_u64(header.data() + 16);
  const std::uint64_t width = dtype == DType::f32 ? 4 : 8;
  if (rows == 0 || cols == 0) io_error("invalid-shape", path.string() + ": empty matrix");
  if (rows > std::numeric_limits<std::uint64_t>::max() / cols / width)
    io_error("truncated", path.string() + ": header promises an impossible payload");
  const std::uint64_t payload = rows * cols * width;
  if (size - kLamHeaderBytes < payload)
    io_error("truncated", path.string() + ": truncated payload (expected " + std::to_string(payload) +
                              " bytes, found " + std::to_string(size - kLamHeaderBytes) + ")");
  if (size - kLamHeaderBytes > payload) io_error("size-mismatch", path.string() + ": trailing bytes after payload");

  LamFile file;
  file.dtype = dtype;
  file.values.resize(static_cast<Index>(rows), static_cast<Index>(cols));
  std::vector<unsigned char> row_bytes(cols * width);
  for (std::uint64_t i = 0; i < rows; ++i) {
    in.read(reinterpret_cast<char*>(row_bytes.data()), static_cast<std::streamsize>(row_bytes.size()));
    if (!in) io_error("truncated", path.string() + ": short read");
    const unsigned char* p = row_bytes.data();
    for (std::uint64_t j = 0; j < cols; ++j) {
      double v;
      if (dtype == DType::f32) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(*p++) << (8 * b);
        v = static_cast<double>(std::bit_cast<float>(bits));
      } else {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(*p++) << (8 * b);
        v = std::bit_cast<double>(bits);
      }
      if (!std::isfinite(v))
        io_error("non-finite", path.string() + ": non-finite value at (" + std::to_string(i) + ", " +
                                   std::to_string(j) + ")");
      file.values(static_cast<Index>(i), static_cast<Index>(j)) = v;
    }
  }
  file.manifest = read_manifest(path);
  return file;
}

void write_matrix(const ActivationMatrix& m, const fs::path& path) {
  write_lam(path, m.values(), m.dtype(), m.meta().to_json());
}

void write_matrix(const ResponseSeries& r, const fs::path& path) {
  Json j = r.meta().to_json();
  j["sampling"] = r.sampling().to_json();
  j["channel_ids"] = r.channel_ids();
  write_lam(path, r.values(), r.dtype(), j);
}

ActivationMatrix read_activation(const fs::path& path) {
  LamFile file = read_lam(path);
  Manifest meta = file.manifest ? Manifest::from_json(*file.manifest) : Manifest{};
  return ActivationMatrix(std::move(file.values), std::move(meta), file.dtype);
}

ResponseSeries read_response(const fs::path& path, std::optional<Sampling> sampling) {
  LamFile file = read_lam(path);
  Manifest meta;
  std::vector<std::string> ids;
  if (file.manifest) {
    meta = Manifest::from_json(*file.manifest);
    if (!sampling && file.manifest->contains("sampling")) sampling = Sampling::from_json(file.manifest->at("sampling"));
    if (file.manifest->contains("channel_ids")) {
      try {
        ids = file.manifest->at("channel_ids").get<std::vector<std::string>>();
      } catch (const Json::exception& e) {
        io_error("invalid-manifest", e.what());
      }
    }
  }
  if (!sampling)
    io_error("invalid-sampling", path.string() + ": no sampling period/rate in manifest or arguments");
  return ResponseSeries(std::move(file.values), *sampling, std::move(ids), std::move(meta), file.dtype);
}

Timeline read_timeline(const fs::path& path) {
  if (!fs::exists(path)) io_error("not-found", path.string() + ": no such file");
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("io", "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) io_error("malformed-row", path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "label\tonset\toffset")
    io_error("malformed-row", path.string() + ":1: header must be 'label<TAB>onset<TAB>offset'");

  std::vector<Event> events;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3)
      io_error("malformed-row", path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    Event e{fields[0], parse_number(fields[1], path, lineno), parse_number(fields[2], path, lineno)};
    if (e.offset < e.onset)
      io_error("malformed-row", path.string() + ":" + std::to_string(lineno) + ": offset before onset");
    if (!events.empty() && e.onset < events.back().onset)
      io_error("unordered-onsets", path.string() + ":" + std::to_string(lineno) + ": onsets must be non-decreasing");
    events.push_back(std::move(e));
  }
  return Timeline(std::move(events));
}

void write_timeline(const Timeline& timeline, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("io", "cannot open " + path.string() + " for writing");
  out << "label\tonset\toffset\n";
  for (const auto& e : timeline.events()) {
    if (e.label.find_first_of("\t\n") != std::string::npos)
      io_error("invalid-event", "label contains a tab or newline: " + e.label);
    out << e.label << '\t' << format_number(e.onset) << '\t' << format_number(e.offset) << '\n';
  }
  if (!out) io_error("io", "failed writing " + path.string());
}

}  // namespace layerscope
