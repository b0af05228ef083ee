#pragma once

#include "gdrift/tensor.hpp"
#include "gdrift/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gdrift {

// Malformed or unreadable input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// DTF1: "DTF1", u8 rank, rank x u64 LE dims, float32 LE payload, row-major.
struct TensorFile {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  std::uint64_t count() const;
  friend bool operator==(const TensorFile&, const TensorFile&) = default;
};

std::string encode_tensor(const TensorFile& t);
TensorFile decode_tensor(std::string_view bytes, const std::string& what = "tensor");
TensorFile read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const TensorFile& t);

TensorFile to_tensor_file(const Tensor3& t);
TensorFile to_tensor_file(const Matrix& m);
TensorFile to_tensor_file(const Vector& v);
// Requires rank 3.
Tensor3 tensor3_from_file(const TensorFile& t);
// Any rank, flattened row-major.
Vector vector_from_file(const TensorFile& t);

// Temp file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

// Shortest round-trip decimal, independent of locale.
std::string format_double(double v);

std::string transport_csv(const std::vector<double>& energy, const std::vector<double>& drift);
std::string metrics_csv(const std::vector<StepMetrics>& rows);

// DCK1 training checkpoint, float64 throughout so resumed runs continue
// bit-exactly:
//   "DCK1", u32 version, u64 config hash, u64 step,
//   u64 P, P x f64 params, P x f64 first moments, P x f64 second moments,
//   u64 optimizer step, u64 rows, rows x (u64 step, 6 x f64 metrics).
struct Checkpoint {
  std::uint64_t config_hash = 0;
  TrainState state;
};

std::string encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::string_view bytes, const GeneratorConfig& arch);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint read_checkpoint(const std::filesystem::path& path, const GeneratorConfig& arch);

std::uint64_t fnv1a64(std::string_view s);

}  // namespace gdrift
