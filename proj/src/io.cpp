#include "litecd/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace litecd {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes, std::size_t pos = 0) : bytes_(bytes), pos_(pos) {}

  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }

  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw std::runtime_error("truncated data");
  }
  const std::string& bytes_;
  std::size_t pos_;
};

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

// ---------------------------------------------------------------------------
// GridFile

std::string encode_grid(const Grid& g) {
  require(g.height >= 1 && g.width >= 1 && g.channels >= 1, "grid: dimensions must be >= 1");
  require(g.values.size() == g.height * g.width * g.channels, "grid: value count does not match dimensions");
  std::string out = "LGRID " + std::to_string(g.height) + " " + std::to_string(g.width) + " " +
                    std::to_string(g.channels) + "\n";
  out.reserve(out.size() + 4 * g.values.size());
  for (float v : g.values) put_f32(out, v);
  return out;
}

Grid decode_grid(const std::string& bytes) {
  const auto eol = bytes.find('\n');
  if (!starts_with(bytes, "LGRID ") || eol == std::string::npos) contract_fail("grid: missing LGRID header");
  std::istringstream header(bytes.substr(6, eol - 6));
  long long h = 0, w = 0, c = 0;
  std::string extra;
  if (!(header >> h >> w >> c) || (header >> extra) || h < 1 || w < 1 || c < 1)
    contract_fail("grid: malformed header '" + bytes.substr(0, eol) + "'");
  Grid g{static_cast<std::size_t>(h), static_cast<std::size_t>(w), static_cast<std::size_t>(c), {}};
  const std::size_t count = g.height * g.width * g.channels;
  if (bytes.size() - (eol + 1) != 4 * count)
    contract_fail("grid: header declares " + std::to_string(count) + " values but payload has " +
                  std::to_string(bytes.size() - (eol + 1)) + " bytes");
  Reader r(bytes, eol + 1);
  g.values.resize(count);
  for (auto& v : g.values) v = r.f32();
  return g;
}

// ---------------------------------------------------------------------------
// PGM

std::string encode_pgm(const Gray8& img) {
  require(img.values.size() == img.height * img.width && img.height >= 1 && img.width >= 1,
          "pgm: value count does not match dimensions");
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.values.data()), img.values.size());
  return out;
}

Gray8 decode_pgm(const std::string& bytes) {
  if (!starts_with(bytes, "P5")) contract_fail("pgm: not a binary (P5) PGM");
  std::size_t pos = 2;
  auto next_int = [&]() -> long {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) contract_fail("pgm: malformed header");
    return std::stol(bytes.substr(start, pos - start));
  };
  const long w = next_int(), h = next_int(), maxval = next_int();
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) contract_fail("pgm: only 8-bit images are supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    contract_fail("pgm: malformed header");
  ++pos;
  Gray8 img{static_cast<std::size_t>(h), static_cast<std::size_t>(w), {}};
  if (bytes.size() - pos != img.height * img.width)
    contract_fail("pgm: payload size does not match " + std::to_string(w) + "x" + std::to_string(h));
  img.values.assign(bytes.begin() + static_cast<long>(pos), bytes.end());
  return img;
}

// ---------------------------------------------------------------------------
// Files and rasters

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) contract_fail("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) contract_fail("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) contract_fail("failed writing " + path.string());
}

namespace {

template <typename RasterT>
RasterT from_grid(const Grid& g, const std::string& what) {
  if (g.channels != 1) contract_fail(what + ": expected a single-channel grid");
  RasterT r(g.height, g.width);
  for (std::size_t i = 0; i < g.values.size(); ++i)
    r.values[i] = static_cast<typename RasterT::value_type>(g.values[i]);
  return r;
}

template <typename RasterT>
Grid to_grid(const RasterT& r) {
  Grid g{r.height, r.width, 1, {}};
  g.values.reserve(r.values.size());
  for (auto v : r.values) g.values.push_back(static_cast<float>(v));
  return g;
}

}  // namespace

IntensityImage load_intensity(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (starts_with(bytes, "P5")) {
    const Gray8 img = decode_pgm(bytes);
    IntensityImage out(img.height, img.width);
    for (std::size_t i = 0; i < img.values.size(); ++i) out.values[i] = static_cast<float>(img.values[i]);
    return out;
  }
  return from_grid<IntensityImage>(decode_grid(bytes), path.string());
}

ChangeMask load_mask(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  ChangeMask out;
  if (starts_with(bytes, "P5")) {
    const Gray8 img = decode_pgm(bytes);
    out = ChangeMask(img.height, img.width);
    for (std::size_t i = 0; i < img.values.size(); ++i) out.values[i] = img.values[i] != 0;
    return out;
  }
  const Grid g = decode_grid(bytes);
  if (g.channels != 1) contract_fail(path.string() + ": expected a single-channel grid");
  out = ChangeMask(g.height, g.width);
  for (std::size_t i = 0; i < g.values.size(); ++i) out.values[i] = g.values[i] != 0.0f;
  return out;
}

void save_grid(const std::filesystem::path& path, const IntensityImage& img) {
  write_file(path, encode_grid(to_grid(img)));
}
void save_grid(const std::filesystem::path& path, const DifferenceImage& img) {
  write_file(path, encode_grid(to_grid(img)));
}
void save_grid(const std::filesystem::path& path, const ChangeMask& mask) {
  write_file(path, encode_grid(to_grid(mask)));
}

void save_mask_pgm(const std::filesystem::path& path, const ChangeMask& mask) {
  Gray8 img{mask.height, mask.width, {}};
  img.values.reserve(mask.values.size());
  for (auto v : mask.values) img.values.push_back(v ? 255 : 0);
  write_file(path, encode_pgm(img));
}

void save_gray_pgm(const std::filesystem::path& path, const ChangeMask& raw) {
  write_file(path, encode_pgm(Gray8{raw.height, raw.width, raw.values}));
}

void save_intensity_preview(const std::filesystem::path& path, const IntensityImage& img) {
  double mean = 0.0;
  for (float v : img.values) mean += std::sqrt(static_cast<double>(v));
  mean /= static_cast<double>(std::max<std::size_t>(1, img.values.size()));
  const double scale = mean > 0.0 ? 255.0 / (3.0 * mean) : 0.0;
  Gray8 out{img.height, img.width, {}};
  out.values.reserve(img.values.size());
  for (float v : img.values)
    out.values.push_back(static_cast<std::uint8_t>(std::min(255.0, std::round(std::sqrt(static_cast<double>(v)) * scale))));
  write_file(path, encode_pgm(out));
}

// ---------------------------------------------------------------------------
// Checkpoint

std::string encode_checkpoint(const LiteCnn<float>& net) {
  const auto params = net.parameters();
  std::string out = "LCDN1";
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, net.spec().fingerprint());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  std::uint64_t offset = 0;
  for (const auto& p : params) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    const Shape s = p.tensor.shape();
    for (std::size_t d : {s.n, s.c, s.h, s.w}) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    put_le<std::uint64_t>(out, offset);
    offset += 4 * s.numel();
  }
  put_le<std::uint64_t>(out, offset);
  for (const auto& p : params)
    for (float v : p.tensor.data()) put_f32(out, v);
  return out;
}

void decode_checkpoint(const std::string& bytes, LiteCnn<float>& net) {
  try {
    Reader r(bytes);
    if (r.str(5) != "LCDN1") throw ModelMismatch("checkpoint: bad magic (expected LCDN1)");
    const auto version = r.le<std::uint32_t>();
    if (version != kCheckpointVersion)
      throw ModelMismatch("checkpoint: unsupported format version " + std::to_string(version));
    const auto fingerprint = r.le<std::uint64_t>();
    if (fingerprint != net.spec().fingerprint())
      throw ModelMismatch("checkpoint: network fingerprint mismatch (file " + std::to_string(fingerprint) +
                          ", running network " + std::to_string(net.spec().fingerprint()) + ")");
    auto params = net.parameters();
    const auto count = r.le<std::uint32_t>();
    if (count != params.size())
      throw ModelMismatch("checkpoint: holds " + std::to_string(count) + " tensors, network has " +
                          std::to_string(params.size()));
    std::uint64_t expected_offset = 0;
    for (const auto& p : params) {
      const std::string name = r.str(r.le<std::uint32_t>());
      Shape s;
      s.n = r.le<std::uint32_t>();
      s.c = r.le<std::uint32_t>();
      s.h = r.le<std::uint32_t>();
      s.w = r.le<std::uint32_t>();
      const auto offset = r.le<std::uint64_t>();
      if (name != p.name || !(s == p.tensor.shape()))
        throw ModelMismatch("checkpoint: tensor '" + name + "' " + s.str() + " does not match '" + p.name +
                            "' " + p.tensor.shape().str());
      if (offset != expected_offset) throw ModelMismatch("checkpoint: non-contiguous payload offsets");
      expected_offset += 4 * s.numel();
    }
    const auto payload = r.le<std::uint64_t>();
    if (payload != expected_offset || r.remaining() != payload)
      throw ModelMismatch("checkpoint: payload length mismatch");
    for (auto& p : params)
      for (auto& v : p.tensor.data()) v = r.f32();
  } catch (const std::runtime_error& e) {
    if (dynamic_cast<const ModelMismatch*>(&e)) throw;
    throw ModelMismatch(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const LiteCnn<float>& net) {
  write_file(path, encode_checkpoint(net));
}

void load_checkpoint(const std::filesystem::path& path, LiteCnn<float>& net) {
  decode_checkpoint(read_file(path), net);
}

}  // namespace litecd
