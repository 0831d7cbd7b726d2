#include "refinery/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace refinery {

namespace {

constexpr char kFeatureMagic[4] = {'F', 'I', 'N', 'F'};
constexpr char kTensorMagic[4] = {'F', 'I', 'N', 'T'};

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& buf, float f) {
  put_u32(buf, std::bit_cast<std::uint32_t>(f));
}

void put_f64(std::string& buf, double d) {
  put_u64(buf, std::bit_cast<std::uint64_t>(d));
}

class Reader {
 public:
  Reader(const std::string& data, const std::string& what)
      : data_(data), what_(what) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | std::uint8_t(data_[pos_ + i]);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | std::uint8_t(data_[pos_ + i]);
    pos_ += 8;
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool exhausted() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) {
      throw Error(ErrorKind::truncated,
                  what_ + ": truncated (need " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_) + ", have " +
                      std::to_string(data_.size() - pos_) + ")");
    }
  }
  const std::string& data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::io, "cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::io, "cannot open " + path.string() + " for write");
  }
  out.write(data.data(), std::streamsize(data.size()));
  if (!out) {
    throw Error(ErrorKind::io, "short write to " + path.string());
  }
}

}  // namespace

void save_features(const FeatureMatrix& m, const std::filesystem::path& path) {
  validate(m);
  std::string buf;
  buf.reserve(24 + m.values.size() * 4);
  buf.append(kFeatureMagic, 4);
  put_u32(buf, 1);
  put_u64(buf, m.n_samples);
  put_u32(buf, std::uint32_t(m.dim));
  put_u32(buf, 0);
  for (double v : m.values) put_f32(buf, float(v));
  write_file(path, buf);
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  const std::string what = path.filename().string();
  Reader r(data, what);
  if (r.bytes(4) != std::string(kFeatureMagic, 4)) {
    throw Error(ErrorKind::format, what + ": bad magic (expected FINF)");
  }
  const std::uint32_t version = r.u32();
  if (version != 1) {
    throw Error(ErrorKind::format,
                what + ": unsupported version " + std::to_string(version));
  }
  const std::uint64_t n = r.u64();
  const std::uint32_t dim = r.u32();
  r.u32();  // reserved
  FeatureMatrix m(n, dim);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const float f = r.f32();
    if (!std::isfinite(f)) {
      throw Error(ErrorKind::invalid_data,
                  what + ": non-finite value at flat index " +
                      std::to_string(i));
    }
    m.values[i] = double(f);
  }
  if (!r.exhausted()) {
    throw Error(ErrorKind::format, what + ": trailing bytes after payload");
  }
  return m;
}

void save_labels(std::span<const int> labels,
                 const std::filesystem::path& path) {
  std::string buf = "sample,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    buf += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
  }
  write_file(path, buf);
}

namespace {

// Parses `sample,label` rows; `row_sink(sample, label)` per data row.
template <typename Sink>
void parse_label_csv(const std::filesystem::path& path, Sink&& row_sink) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::format, path.string() + ": empty label file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "sample,label") {
    throw Error(ErrorKind::format,
                path.string() + ": expected header 'sample,label', got '" +
                    line + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorKind::format, path.string() + ": line " +
                                         std::to_string(line_no) +
                                         ": missing comma");
    }
    try {
      const long long sample = std::stoll(line.substr(0, comma));
      const long long label = std::stoll(line.substr(comma + 1));
      row_sink(sample, label, line_no);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(ErrorKind::format, path.string() + ": line " +
                                         std::to_string(line_no) +
                                         ": not an integer pair");
    }
  }
}

}  // namespace

LabelFile load_labels(const std::filesystem::path& path,
                      std::size_t n_samples) {
  std::vector<int> labels(n_samples, -1);
  std::vector<bool> seen(n_samples, false);
  parse_label_csv(path, [&](long long sample, long long label,
                            std::size_t line_no) {
    if (sample < 0 || std::size_t(sample) >= n_samples) {
      throw Error(ErrorKind::invalid_data,
                  path.string() + ": line " + std::to_string(line_no) +
                      ": sample " + std::to_string(sample) +
                      " outside [0, " + std::to_string(n_samples) + ")");
    }
    if (label < 0) {
      throw Error(ErrorKind::invalid_data,
                  path.string() + ": negative label for sample " +
                      std::to_string(sample));
    }
    if (seen[std::size_t(sample)]) {
      throw Error(ErrorKind::invalid_data,
                  path.string() + ": duplicate row for sample " +
                      std::to_string(sample));
    }
    seen[std::size_t(sample)] = true;
    labels[std::size_t(sample)] = int(label);
  });
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (!seen[i]) {
      throw Error(ErrorKind::invalid_data,
                  path.string() + ": sample " + std::to_string(i) +
                      " has no label row");
    }
  }
  int max_label = -1;
  for (int y : labels) max_label = std::max(max_label, y);
  const int class_count = max_label + 1;
  std::vector<std::size_t> counts(class_count, 0);
  for (int y : labels) ++counts[y];
  for (int c = 0; c < class_count; ++c) {
    if (counts[c] == 0) {
      throw Error(ErrorKind::invalid_data,
                  path.string() + ": class " + std::to_string(c) +
                      " has no samples (label gap)");
    }
  }
  return {std::move(labels), class_count};
}

std::vector<std::vector<int>> load_multilabels(
    const std::filesystem::path& path, std::size_t n_samples) {
  std::vector<std::vector<int>> sets(n_samples);
  parse_label_csv(path, [&](long long sample, long long label,
                            std::size_t line_no) {
    if (sample < 0 || std::size_t(sample) >= n_samples) {
      throw Error(ErrorKind::invalid_data,
                  path.string() + ": line " + std::to_string(line_no) +
                      ": sample " + std::to_string(sample) +
                      " outside [0, " + std::to_string(n_samples) + ")");
    }
    if (label < 0) {
      throw Error(ErrorKind::invalid_data,
                  path.string() + ": negative label for sample " +
                      std::to_string(sample));
    }
    auto& set = sets[std::size_t(sample)];
    for (int existing : set) {
      if (existing == int(label)) return;  // ignore exact duplicates
    }
    set.push_back(int(label));
  });
  return sets;
}

void save_tensors(std::span<const NamedTensor> tensors,
                  const std::filesystem::path& path) {
  std::string buf;
  buf.append(kTensorMagic, 4);
  put_u32(buf, 1);
  put_u32(buf, std::uint32_t(tensors.size()));
  for (const auto& t : tensors) {
    if (t.data.size() != t.rows * t.cols) {
      throw Error(ErrorKind::invalid_data,
                  "tensor " + t.name + ": data length mismatch");
    }
    for (double v : t.data) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::invalid_data,
                    "tensor " + t.name + ": non-finite value");
      }
    }
    put_u32(buf, std::uint32_t(t.name.size()));
    buf += t.name;
    put_u64(buf, t.rows);
    put_u32(buf, std::uint32_t(t.cols));
    for (double v : t.data) put_f64(buf, v);
  }
  write_file(path, buf);
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  const std::string what = path.filename().string();
  Reader r(data, what);
  if (r.bytes(4) != std::string(kTensorMagic, 4)) {
    throw Error(ErrorKind::format, what + ": bad magic (expected FINT)");
  }
  const std::uint32_t version = r.u32();
  if (version != 1) {
    throw Error(ErrorKind::format,
                what + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<NamedTensor> tensors(count);
  for (auto& t : tensors) {
    const std::uint32_t name_len = r.u32();
    t.name = r.bytes(name_len);
    t.rows = r.u64();
    t.cols = r.u32();
    t.data.resize(t.rows * t.cols);
    for (auto& v : t.data) v = r.f64();
  }
  if (!r.exhausted()) {
    throw Error(ErrorKind::format, what + ": trailing bytes after payload");
  }
  return tensors;
}

const NamedTensor& find_tensor(std::span<const NamedTensor> tensors,
                               std::string_view name) {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw Error(ErrorKind::format,
              "tensor container: missing tensor '" + std::string(name) + "'");
}

}  // namespace refinery
