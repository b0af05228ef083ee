#include "gdrift/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

namespace gdrift {
namespace {

template <typename T>
void put_le(std::string& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  const U u = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    need(sizeof(T));
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return std::bit_cast<T>(u);
  }

  void expect_magic(std::string_view magic) {
    need(magic.size());
    if (bytes_.substr(pos_, magic.size()) != magic) {
      throw FormatError(what_ + ": bad magic, expected \"" + std::string(magic) + "\"");
    }
    pos_ += magic.size();
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError(what_ + ": truncated at byte " + std::to_string(pos_));
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::string& what() const { return what_; }

 private:
  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t TensorFile::count() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) n *= d;
  return n;
}

std::string encode_tensor(const TensorFile& t) {
  if (t.dims.size() > 255) throw std::invalid_argument("encode_tensor: rank exceeds 255");
  if (t.count() != t.data.size()) throw std::invalid_argument("encode_tensor: payload size does not match dims");
  std::string out = "DTF1";
  out.push_back(static_cast<char>(t.dims.size()));
  for (std::uint64_t d : t.dims) put_le(out, d);
  out.reserve(out.size() + 4 * t.data.size());
  for (float v : t.data) put_le(out, v);
  return out;
}

TensorFile decode_tensor(std::string_view bytes, const std::string& what) {
  Reader r(bytes, what);
  r.expect_magic("DTF1");
  TensorFile t;
  const auto rank = r.get<std::uint8_t>();
  std::uint64_t count = 1;
  for (std::uint8_t i = 0; i < rank; ++i) {
    const auto d = r.get<std::uint64_t>();
    if (d != 0 && count > UINT64_MAX / 4 / d) throw FormatError(what + ": dims overflow");
    count *= d;
    t.dims.push_back(d);
  }
  if (r.remaining() != count * 4) {
    throw FormatError(what + ": payload is " + std::to_string(r.remaining()) + " bytes, dims require " +
                      std::to_string(count * 4));
  }
  t.data.resize(count);
  for (float& v : t.data) v = r.get<float>();
  return t;
}

TensorFile read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path), path.string()); }

void write_tensor(const std::filesystem::path& path, const TensorFile& t) { write_file_atomic(path, encode_tensor(t)); }

TensorFile to_tensor_file(const Tensor3& t) {
  TensorFile f;
  f.dims = {t.n(), t.m(), t.c()};
  for (double v : t.data()) f.data.push_back(static_cast<float>(v));
  return f;
}

TensorFile to_tensor_file(const Matrix& m) {
  TensorFile f;
  f.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) f.data.push_back(static_cast<float>(m(i, j)));
  }
  return f;
}

TensorFile to_tensor_file(const Vector& v) {
  TensorFile f;
  f.dims = {static_cast<std::uint64_t>(v.size())};
  for (Eigen::Index i = 0; i < v.size(); ++i) f.data.push_back(static_cast<float>(v[i]));
  return f;
}

Tensor3 tensor3_from_file(const TensorFile& t) {
  if (t.dims.size() != 3) throw FormatError("expected a rank-3 tensor, got rank " + std::to_string(t.dims.size()));
  Tensor3 out(t.dims[0], t.dims[1], t.dims[2]);
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = t.data[i];
  return out;
}

Vector vector_from_file(const TensorFile& t) {
  Vector v(static_cast<Eigen::Index>(t.data.size()));
  for (std::size_t i = 0; i < t.data.size(); ++i) v[static_cast<Eigen::Index>(i)] = t.data[i];
  return v;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return std::move(ss).str();
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, r.ptr};
}

std::string transport_csv(const std::vector<double>& energy, const std::vector<double>& drift) {
  std::string out = "step,energy_distance,mean_drift_norm\n";
  for (std::size_t i = 0; i < energy.size(); ++i) {
    out += std::to_string(i) + ',' + format_double(energy[i]) + ',' + format_double(drift[i]) + '\n';
  }
  return out;
}

std::string metrics_csv(const std::vector<StepMetrics>& rows) {
  std::string out = "step,l_fid,l_drift,alpha_fid,alpha_drift,grad_norm_fid,grad_norm_drift\n";
  for (const StepMetrics& m : rows) {
    out += std::to_string(m.step);
    for (double v : {m.l_fid, m.l_drift, m.alpha_fid, m.alpha_drift, m.grad_norm_fid, m.grad_norm_drift}) {
      out += ',' + format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::string encode_checkpoint(const Checkpoint& c) {
  const GeneratorState& g = c.state.generator;
  std::string out = "DCK1";
  put_le(out, std::uint32_t{1});
  put_le(out, c.config_hash);
  put_le(out, c.state.step);
  put_le(out, static_cast<std::uint64_t>(g.params.size()));
  for (const Vector* v : {&g.params, &g.opt.m, &g.opt.v}) {
    for (Eigen::Index i = 0; i < v->size(); ++i) put_le(out, (*v)[i]);
  }
  put_le(out, g.opt.t);
  put_le(out, static_cast<std::uint64_t>(c.state.history.size()));
  for (const StepMetrics& m : c.state.history) {
    put_le(out, m.step);
    for (double v : {m.l_fid, m.l_drift, m.alpha_fid, m.alpha_drift, m.grad_norm_fid, m.grad_norm_drift}) put_le(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes, const GeneratorConfig& arch) {
  Reader r(bytes, "checkpoint");
  r.expect_magic("DCK1");
  if (const auto version = r.get<std::uint32_t>(); version != 1) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  c.config_hash = r.get<std::uint64_t>();
  c.state.step = r.get<std::uint64_t>();
  const auto p = r.get<std::uint64_t>();
  if (p != arch.parameter_count()) {
    throw FormatError("checkpoint: holds " + std::to_string(p) + " parameters, architecture needs " +
                      std::to_string(arch.parameter_count()));
  }
  r.need(p * 24);
  GeneratorState& g = c.state.generator;
  g.arch = arch;
  for (Vector* v : {&g.params, &g.opt.m, &g.opt.v}) {
    v->resize(static_cast<Eigen::Index>(p));
    for (Eigen::Index i = 0; i < v->size(); ++i) (*v)[i] = r.get<double>();
  }
  g.opt.t = r.get<std::uint64_t>();
  const auto rows = r.get<std::uint64_t>();
  if (rows > r.remaining() / 56) throw FormatError("checkpoint: truncated metrics history");
  for (std::uint64_t i = 0; i < rows; ++i) {
    StepMetrics m;
    m.step = r.get<std::uint64_t>();
    for (double* v : {&m.l_fid, &m.l_drift, &m.alpha_fid, &m.alpha_drift, &m.grad_norm_fid, &m.grad_norm_drift}) {
      *v = r.get<double>();
    }
    c.state.history.push_back(m);
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file_atomic(path, encode_checkpoint(c));
}

Checkpoint read_checkpoint(const std::filesystem::path& path, const GeneratorConfig& arch) {
  return decode_checkpoint(read_file(path), arch);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace gdrift
