#pragma once

// Shared data types and the on-disk formats consumed by every module:
//
//  * LAM1 binary matrices: "LAM1", version 0x01, dtype (0x00 f32, 0x01 f64),
//    two zero bytes, u64 rows, u64 cols (little-endian), then row-major
//    little-endian values.
//  * `<path>.manifest` JSON sidecars.
//  * Timeline TSV with the header `label<TAB>onset<TAB>offset`.
//
// Values are always held as f64 in memory; the dtype records how they were
// (or will be) stored.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace layerscope {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Json = nlohmann::json;

enum class DType : std::uint8_t { f32 = 0x00, f64 = 0x01 };

enum class Modality { fmri, ecog, synthetic };

std::string to_string(Modality m);
Modality parse_modality(const std::string& text);

struct Manifest {
  std::string subject;
  Modality modality = Modality::synthetic;
  std::string model;
  int layer = 0;
  std::map<std::string, std::string> extra;

  Json to_json() const;
  static Manifest from_json(const Json& j);
};

// N samples x D ambient dimensions of layer representations.
class ActivationMatrix {
 public:
  explicit ActivationMatrix(Matrix values, Manifest meta = {}, DType dtype = DType::f64);

  const Matrix& values() const noexcept { return values_; }
  Index n_samples() const noexcept { return values_.rows(); }
  Index n_dims() const noexcept { return values_.cols(); }
  const Manifest& meta() const noexcept { return meta_; }
  DType dtype() const noexcept { return dtype_; }

 private:
  Matrix values_;
  Manifest meta_;
  DType dtype_;
};

// Regular sampling, given either as a period (seconds per sample) or a rate.
class Sampling {
 public:
  static Sampling from_period(double seconds);
  static Sampling from_rate(double hz);

  bool has_period() const noexcept { return period_.has_value(); }
  bool has_rate() const noexcept { return rate_.has_value(); }
  double period() const noexcept { return period_ ? *period_ : 1.0 / *rate_; }
  double rate() const noexcept { return rate_ ? *rate_ : 1.0 / *period_; }

  Json to_json() const;
  static Sampling from_json(const Json& j);

 private:
  Sampling() = default;
  std::optional<double> period_;
  std::optional<double> rate_;
};

// n_times x n_channels prediction target (BOLD per TR, or high-gamma per sample).
class ResponseSeries {
 public:
  ResponseSeries(Matrix values, Sampling sampling, std::vector<std::string> channel_ids = {},
                 Manifest meta = {}, DType dtype = DType::f64);

  const Matrix& values() const noexcept { return values_; }
  Index n_times() const noexcept { return values_.rows(); }
  Index n_channels() const noexcept { return values_.cols(); }
  const Sampling& sampling() const noexcept { return sampling_; }
  const std::vector<std::string>& channel_ids() const noexcept { return channel_ids_; }
  const Manifest& meta() const noexcept { return meta_; }
  DType dtype() const noexcept { return dtype_; }

 private:
  Matrix values_;
  Sampling sampling_;
  std::vector<std::string> channel_ids_;
  Manifest meta_;
  DType dtype_;
};

struct Event {
  std::string label;
  double onset = 0.0;
  double offset = 0.0;
};

class Timeline {
 public:
  Timeline() = default;
  explicit Timeline(std::vector<Event> events);

  const std::vector<Event>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }
  std::vector<double> onsets() const;

 private:
  std::vector<Event> events_;
};

// Raw LAM1 payload plus the parsed sidecar, if one exists.
struct LamFile {
  Matrix values;
  DType dtype = DType::f64;
  std::optional<Json> manifest;
};

inline constexpr std::size_t kLamHeaderBytes = 24;

std::filesystem::path manifest_path(const std::filesystem::path& path);

// Writes any finite matrix with at least one row. Non-finite values are
// rejected before the file is opened.
void write_lam(const std::filesystem::path& path, const Matrix& values, DType dtype,
               const std::optional<Json>& manifest = std::nullopt);
LamFile read_lam(const std::filesystem::path& path);

void write_matrix(const ActivationMatrix& m, const std::filesystem::path& path);
void write_matrix(const ResponseSeries& r, const std::filesystem::path& path);

ActivationMatrix read_activation(const std::filesystem::path& path);
// `sampling` overrides (or supplies) the sampling recorded in the sidecar.
ResponseSeries read_response(const std::filesystem::path& path,
                             std::optional<Sampling> sampling = std::nullopt);

Timeline read_timeline(const std::filesystem::path& path);
void write_timeline(const Timeline& timeline, const std::filesystem::path& path);

// Writes `<path>.manifest` with a stable key order.
void write_manifest(const std::filesystem::path& path, const Json& manifest);
std::optional<Json> read_manifest(const std::filesystem::path& path);

}  // namespace layerscope
