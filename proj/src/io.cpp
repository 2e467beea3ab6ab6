#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dmcl/error.hpp"
#include "dmcl/io.hpp"

namespace dmcl {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open '" + path.string() + "'");
  Bytes out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

namespace {

template <typename T>
void put(Bytes& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    require(pos_ + sizeof(T) <= bytes_.size(), ErrorCode::FormatError, "truncated binary data");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void expect(std::string_view magic) {
    require(pos_ + magic.size() <= bytes_.size() &&
                std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) == 0,
            ErrorCode::FormatError, "bad magic, expected '" + std::string(magic) + "'");
    pos_ += magic.size();
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_magic(Bytes& out, std::string_view magic) { out.insert(out.end(), magic.begin(), magic.end()); }

}  // namespace

Bytes encode_feature_map(const FeatureMap& fm) {
  Bytes out;
  out.reserve(16 + fm.values().size() * 4);
  put_magic(out, "FMV1");
  put(out, static_cast<std::uint32_t>(fm.height()));
  put(out, static_cast<std::uint32_t>(fm.width()));
  put(out, static_cast<std::uint32_t>(fm.channels()));
  for (double v : fm.values()) put(out, static_cast<float>(v));
  return out;
}

FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect("FMV1");
  const auto h = r.get<std::uint32_t>();
  const auto w = r.get<std::uint32_t>();
  const auto c = r.get<std::uint32_t>();
  const std::size_t n = std::size_t{h} * w * c;
  require(r.remaining() == n * sizeof(float), ErrorCode::FormatError,
          "feature payload size does not match header");
  std::vector<double> values(n);
  for (double& v : values) v = static_cast<double>(r.get<float>());
  return FeatureMap(h, w, c, std::move(values));
}

void save_feature_map(const std::filesystem::path& path, const FeatureMap& fm) {
  write_file(path, encode_feature_map(fm));
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
  return decode_feature_map(read_file(path));
}

namespace {

constexpr std::string_view kManifestHeader = "item_id\tclass_id\tsplit\tis_query\tfeature_path";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

int parse_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == s.size() && !s.empty(), ErrorCode::FormatError,
          "bad integer '" + s + "' in " + what);
  return v;
}

}  // namespace

std::string encode_manifest(const DatasetManifest& m) {
  std::ostringstream os;
  os << kManifestHeader << '\n';
  for (const auto& e : m.entries)
    os << e.item_id << '\t' << e.class_id << '\t' << to_string(e.split) << '\t'
       << (e.is_query ? 1 : 0) << '\t' << e.feature_path << '\n';
  return os.str();
}

DatasetManifest decode_manifest(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::FormatError, "empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kManifestHeader, ErrorCode::FormatError, "manifest header mismatch");
  DatasetManifest m;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    const std::string where = "manifest line " + std::to_string(lineno);
    require(f.size() == 5, ErrorCode::FormatError, where + ": expected 5 columns");
    require(f[3] == "0" || f[3] == "1", ErrorCode::FormatError, where + ": is_query must be 0 or 1");
    m.entries.push_back({f[0], parse_int(f[1], where), parse_split(f[2]), f[3] == "1", f[4]});
  }
  m.validate();
  return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  const std::string text = encode_manifest(m);
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return decode_manifest(std::string(b.begin(), b.end()));
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  Dataset d;
  d.manifest = load_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  d.features.reserve(d.manifest.entries.size());
  for (const auto& e : d.manifest.entries) d.features.push_back(load_feature_map(base / e.feature_path));
  return d;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& d) {
  save_manifest(dir / "manifest.tsv", d.manifest);
  for (std::size_t i = 0; i < d.manifest.entries.size(); ++i)
    save_feature_map(dir / d.manifest.entries[i].feature_path, d.features[i]);
}

Bytes encode_checkpoint(const Checkpoint& c) {
  c.params.validate();
  require(same_layout(c.params, c.optimizer.velocity), ErrorCode::ShapeMismatch,
          "optimizer velocity does not match parameters");
  Bytes out;
  put_magic(out, "DMCLCKPT");
  put(out, kCheckpointVersion);
  const auto dims = c.params.layer_dims();
  put(out, static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) put(out, static_cast<std::uint32_t>(d));
  put(out, static_cast<std::uint32_t>(c.params.head ? c.params.head->classes() : 0));
  put(out, static_cast<std::int32_t>(c.epoch));
  put(out, c.best_metric);
  put(out, c.config_hash);
  put(out, c.optimizer.lr);
  put(out, c.optimizer.momentum);
  put(out, c.optimizer.weight_decay);
  put(out, c.optimizer.decay_factor);
  put(out, static_cast<std::int32_t>(c.optimizer.decay_period));
  put(out, static_cast<std::uint32_t>(Rng::kAlgorithm.size()));
  put_magic(out, Rng::kAlgorithm);

  const std::size_t payload_start = out.size();
  for (const auto& t : c.params.tensors())
    for (double v : t) put(out, v);
  for (const auto& t : c.optimizer.velocity.tensors())
    for (double v : t) put(out, v);
  const std::uint64_t sum =
      fnv1a64(std::span<const std::uint8_t>(out).subspan(payload_start));
  put(out, sum);
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect("DMCLCKPT");
  const auto version = r.get<std::uint32_t>();
  require(version == kCheckpointVersion, ErrorCode::FormatError,
          "unsupported checkpoint version " + std::to_string(version));
  const auto n_dims = r.get<std::uint32_t>();
  require(n_dims >= 2 && n_dims < 1024, ErrorCode::FormatError, "bad layer count");
  std::vector<std::size_t> dims(n_dims);
  for (auto& d : dims) {
    d = r.get<std::uint32_t>();
    require(d >= 1, ErrorCode::FormatError, "zero layer dim");
  }
  const auto classes = r.get<std::uint32_t>();

  Checkpoint c;
  c.epoch = r.get<std::int32_t>();
  c.best_metric = r.get<double>();
  c.config_hash = r.get<std::uint64_t>();
  c.optimizer.lr = r.get<double>();
  c.optimizer.momentum = r.get<double>();
  c.optimizer.weight_decay = r.get<double>();
  c.optimizer.decay_factor = r.get<double>();
  c.optimizer.decay_period = r.get<std::int32_t>();
  const auto algo_len = r.get<std::uint32_t>();
  std::string algo;
  for (std::uint32_t i = 0; i < algo_len; ++i) algo.push_back(static_cast<char>(r.get<std::uint8_t>()));
  require(algo == Rng::kAlgorithm, ErrorCode::FormatError,
          "checkpoint written with rng '" + algo + "'");

  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    c.params.layers.push_back({Mat(dims[i + 1], dims[i]), Vec(dims[i + 1], 0.0)});
  if (classes > 0) c.params.head = ClassifierHead{Mat(classes, dims.back()), Vec(classes, 0.0)};
  c.optimizer.velocity = zeros_like(c.params);

  const std::size_t payload_start = r.pos();
  const std::size_t n = c.params.parameter_count();
  require(r.remaining() == 2 * n * sizeof(double) + sizeof(std::uint64_t), ErrorCode::FormatError,
          "checkpoint payload size does not match header");
  for (auto t : c.params.tensors())
    for (double& v : t) v = r.get<double>();
  for (auto t : c.optimizer.velocity.tensors())
    for (double& v : t) v = r.get<double>();
  const std::size_t payload_end = r.pos();
  const auto stored = r.get<std::uint64_t>();
  require(stored == fnv1a64(bytes.subspan(payload_start, payload_end - payload_start)),
          ErrorCode::ChecksumMismatch, "checkpoint payload checksum mismatch");
  c.params.validate();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace dmcl
