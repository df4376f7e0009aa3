#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cdpr/errors.hpp"
#include "cdpr/synthesis.hpp"

namespace cdpr {

namespace {

constexpr char kMagic[8] = {'C', 'D', 'P', 'R', 'G', 'S', '1', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>(bits >> (8 * i)));
  }
  template <typename M>
  void matrix(const M& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
  std::vector<unsigned char> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& b) : bytes_(b) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw FormatError("gain schedule truncated at byte offset " + std::to_string(pos_) +
                        " (file has " + std::to_string(bytes_.size()) + " bytes)");
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    const double v = std::bit_cast<double>(bits);
    if (!std::isfinite(v)) {
      throw FormatError("gain schedule has non-finite value at byte offset " +
                        std::to_string(pos_));
    }
    pos_ += 8;
    return v;
  }
  template <typename M>
  void matrix(M& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return bytes_.size(); }
  const unsigned char* data() const { return bytes_.data(); }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

void expect_dim(std::uint32_t got, int want, const char* name) {
  if (got != static_cast<std::uint32_t>(want)) {
    throw FormatError(std::string("gain schedule ") + name + " is " + std::to_string(got) +
                      ", expected " + std::to_string(want));
  }
}

}  // namespace

std::vector<unsigned char> encode_schedule(const GainSchedule& s) {
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kMagic), std::end(kMagic));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(s.steps.size()));
  w.u32(kStateDim);
  w.u32(kControlDim);
  w.u32(kMeasDim);
  w.f64(s.dt);
  for (const auto& st : s.steps) {
    w.matrix(st.x_nom);
    w.matrix(st.u_nom);
    w.matrix(st.z_nom);
    w.matrix(st.K);
    w.matrix(st.L);
    w.matrix(st.P);
    w.matrix(st.c);
  }
  return std::move(w.bytes);
}

GainSchedule decode_schedule(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  r.need(sizeof kMagic);
  if (std::memcmp(r.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("gain schedule: bad magic");
  }
  r.skip(sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError("gain schedule: unsupported version " + std::to_string(version));
  }
  const std::uint32_t n = r.u32();
  expect_dim(r.u32(), kStateDim, "state_dim");
  expect_dim(r.u32(), kControlDim, "control_dim");
  expect_dim(r.u32(), kMeasDim, "meas_dim");

  GainSchedule s;
  s.dt = r.f64();
  if (!(s.dt > 0)) throw FormatError("gain schedule: dt must be positive");
  // Refuse absurd N before allocating.
  constexpr std::size_t record = 8 * (6 + 4 + 8 + 24 + 48 + 36 + 6);
  r.need(static_cast<std::size_t>(n) * record);
  s.steps.resize(n);
  for (auto& st : s.steps) {
    r.matrix(st.x_nom);
    r.matrix(st.u_nom);
    r.matrix(st.z_nom);
    r.matrix(st.K);
    r.matrix(st.L);
    r.matrix(st.P);
    r.matrix(st.c);
  }
  if (r.pos() != r.size()) {
    throw FormatError("gain schedule: trailing bytes after offset " + std::to_string(r.pos()));
  }
  s.fold_offsets();
  return s;
}

void save_schedule(const std::string& path, const GainSchedule& schedule) {
  const auto bytes = encode_schedule(schedule);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

GainSchedule load_schedule(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  return decode_schedule(bytes);
}

}  // namespace cdpr
