#include "mindist/embedding_set.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "mindist/rng.hpp"

namespace mindist {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::uint8_t kDtypeF64 = 1;
constexpr std::uint8_t kFlagWeights = 1;

// Header is fixed-size: magic(4) + version(4) + dtype(1) + flags(1) + n(8) + d(8).
constexpr std::size_t kHeaderBytes = 26;

template <typename T>
T read_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));  // little-endian host assumed
  return v;
}

[[noreturn]] void throw_truncated(std::size_t offset, const std::string& path) {
  throw FormatError(FormatError::Kind::payload_truncated,
                    "payload truncated at byte offset " + std::to_string(offset) +
                        " in '" + path + "'");
}

EmbeddingSet load_binary(const std::string& path, std::ifstream& in) {
  unsigned char header[kHeaderBytes];
  in.read(reinterpret_cast<char*>(header), kHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes)) {
    throw FormatError(FormatError::Kind::bad_header,
                      "file too short for header (" + std::to_string(in.gcount()) +
                          " bytes) in '" + path + "'");
  }
  if (std::memcmp(header, kMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::bad_magic,
                      "bad magic at byte offset 0 in '" + path + "'");
  }
  auto version = read_le<std::uint32_t>(header + 4);
  if (version != kVersion) {
    throw FormatError(FormatError::Kind::bad_version,
                      "unsupported version " + std::to_string(version) +
                          " at byte offset 4 in '" + path + "'");
  }
  std::uint8_t dtype = header[8];
  if (dtype != kDtypeF32 && dtype != kDtypeF64) {
    throw FormatError(FormatError::Kind::bad_dtype,
                      "unknown dtype " + std::to_string(dtype) +
                          " at byte offset 8 in '" + path + "'");
  }
  std::uint8_t flags = header[9];
  auto n = read_le<std::uint64_t>(header + 10);
  auto d = read_le<std::uint64_t>(header + 18);
  if (n == 0 || d == 0) {
    throw FormatError(FormatError::Kind::bad_header,
                      "declared n=" + std::to_string(n) + ", d=" + std::to_string(d) +
                          "; both must be >= 1 in '" + path + "'");
  }
  constexpr std::uint64_t kMaxElems = std::uint64_t{1} << 34;
  if (n > kMaxElems || d > kMaxElems || n * d > kMaxElems) {
    throw FormatError(FormatError::Kind::bad_header,
                      "declared size n*d too large in '" + path + "'");
  }

  const std::size_t scalar = dtype == kDtypeF32 ? 4 : 8;
  const std::uint64_t count = n * d;
  std::size_t offset = kHeaderBytes;

  Eigen::MatrixXd data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<unsigned char> row(d * scalar);
  for (std::uint64_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (in.gcount() != static_cast<std::streamsize>(row.size())) {
      throw_truncated(offset + static_cast<std::size_t>(in.gcount()), path);
    }
    for (std::uint64_t j = 0; j < d; ++j) {
      double v = dtype == kDtypeF32
                     ? static_cast<double>(read_le<float>(row.data() + j * 4))
                     : read_le<double>(row.data() + j * 8);
      if (!std::isfinite(v)) {
        throw FormatError(FormatError::Kind::non_finite_value,
                          "non-finite value in row " + std::to_string(i) +
                              " (byte offset " + std::to_string(offset + j * scalar) +
                              ") in '" + path + "'");
      }
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
    offset += row.size();
  }

  std::optional<Eigen::VectorXd> weights;
  if (flags & kFlagWeights) {
    Eigen::VectorXd w(static_cast<Eigen::Index>(n));
    std::vector<unsigned char> wbuf(n * scalar);
    in.read(reinterpret_cast<char*>(wbuf.data()), static_cast<std::streamsize>(wbuf.size()));
    if (in.gcount() != static_cast<std::streamsize>(wbuf.size())) {
      throw_truncated(offset + static_cast<std::size_t>(in.gcount()), path);
    }
    for (std::uint64_t i = 0; i < n; ++i) {
      double v = dtype == kDtypeF32
                     ? static_cast<double>(read_le<float>(wbuf.data() + i * 4))
                     : read_le<double>(wbuf.data() + i * 8);
      if (!std::isfinite(v)) {
        throw FormatError(FormatError::Kind::non_finite_value,
                          "non-finite weight for row " + std::to_string(i) + " in '" + path + "'");
      }
      if (v < 0) {
        throw FormatError(FormatError::Kind::negative_weight,
                          "negative weight for row " + std::to_string(i) + " in '" + path + "'");
      }
      w(static_cast<Eigen::Index>(i)) = v;
    }
    offset += wbuf.size();
    weights = std::move(w);
  }

  char extra;
  if (in.read(&extra, 1); in.gcount() != 0) {
    throw FormatError(FormatError::Kind::trailing_data,
                      "unexpected trailing data at byte offset " + std::to_string(offset) +
                          " in '" + path + "'");
  }

  (void)count;
  if (weights) return EmbeddingSet(std::move(data), std::move(*weights));
  return EmbeddingSet(std::move(data));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& field, std::size_t row, const std::string& path) {
  double v = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  while (ptr != last && (*ptr == ' ' || *ptr == '\t' || *ptr == '\r')) ++ptr;
  if (ec != std::errc() || ptr != last) {
    throw FormatError(FormatError::Kind::bad_field,
                      "unparseable value '" + field + "' in data row " + std::to_string(row) +
                          " of '" + path + "'");
  }
  if (!std::isfinite(v)) {
    throw FormatError(FormatError::Kind::non_finite_value,
                      "non-finite value in data row " + std::to_string(row) + " of '" + path + "'");
  }
  return v;
}

EmbeddingSet load_csv(const std::string& path, std::ifstream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(FormatError::Kind::bad_header, "empty CSV file '" + path + "'");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto columns = split_csv_line(line);
  bool has_weight = !columns.empty() && columns.back() == "weight";
  std::size_t d = columns.size() - (has_weight ? 1 : 0);
  if (d == 0) {
    throw FormatError(FormatError::Kind::bad_header,
                      "CSV header declares no data columns in '" + path + "'");
  }

  std::vector<double> values;
  std::vector<double> wvals;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != columns.size()) {
      throw FormatError(FormatError::Kind::bad_field,
                        "data row " + std::to_string(row) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(columns.size()) + " in '" + path + "'");
    }
    for (std::size_t j = 0; j < d; ++j) values.push_back(parse_double(fields[j], row, path));
    if (has_weight) {
      double w = parse_double(fields[d], row, path);
      if (w < 0) {
        throw FormatError(FormatError::Kind::negative_weight,
                          "negative weight in data row " + std::to_string(row) + " of '" + path + "'");
      }
      wvals.push_back(w);
    }
    ++row;
  }
  if (row == 0) {
    throw FormatError(FormatError::Kind::payload_truncated,
                      "CSV file has a header but no data rows: '" + path + "'");
  }

  Eigen::MatrixXd data(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < row; ++i)
    for (std::size_t j = 0; j < d; ++j)
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * d + j];

  if (has_weight) {
    Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(wvals.data(), static_cast<Eigen::Index>(row));
    return EmbeddingSet(std::move(data), std::move(w));
  }
  return EmbeddingSet(std::move(data));
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& src, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = src.row(rows[i]);
  return out;
}

// Partial Fisher-Yates: first m entries of a random permutation of [0, n).
std::vector<Eigen::Index> draw_without_replacement(Eigen::Index n, Eigen::Index m,
                                                   std::uint64_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(seed);
  for (Eigen::Index i = 0; i < m; ++i) {
    auto j = i + static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(m));
  return idx;
}

}  // namespace

EmbeddingSet::EmbeddingSet(Eigen::MatrixXd data) : data_(std::move(data)) { validate(); }

EmbeddingSet::EmbeddingSet(Eigen::MatrixXd data, Eigen::VectorXd weights)
    : data_(std::move(data)), weights_(std::move(weights)) {
  validate();
}

void EmbeddingSet::validate() const {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw InvalidArgument("embedding set requires n >= 1 and d >= 1, got n=" +
                          std::to_string(data_.rows()) + ", d=" + std::to_string(data_.cols()));
  }
  if (!data_.allFinite()) {
    throw InvalidArgument("embedding set contains non-finite entries");
  }
  if (weights_) {
    if (weights_->size() != data_.rows()) {
      throw InvalidArgument("weight vector length " + std::to_string(weights_->size()) +
                            " does not match n=" + std::to_string(data_.rows()));
    }
    if (!weights_->allFinite() || (weights_->array() < 0).any()) {
      throw InvalidArgument("weights must be finite and nonnegative");
    }
    double total = weights_->sum();
    if (std::abs(total - 1.0) > 1e-9) {
      throw InvalidArgument("weights must sum to 1 within 1e-9, got " + std::to_string(total));
    }
  }
}

EmbeddingSet load_embeddings(const std::string& path, std::optional<FileFormat> format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  if (!format) {
    char magic[4] = {};
    in.read(magic, 4);
    bool is_binary = in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0;
    in.clear();
    in.seekg(0);
    format = is_binary ? FileFormat::binary : FileFormat::csv;
  }
  return *format == FileFormat::binary ? load_binary(path, in) : load_csv(path, in);
}

void save_embeddings(const EmbeddingSet& set, const std::string& path, FileFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");

  if (format == FileFormat::binary) {
    out.write(kMagic, 4);
    std::uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    std::uint8_t dtype = kDtypeF64;
    std::uint8_t flags = set.weighted() ? kFlagWeights : 0;
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    out.write(reinterpret_cast<const char*>(&flags), 1);
    std::uint64_t n = static_cast<std::uint64_t>(set.n());
    std::uint64_t d = static_cast<std::uint64_t>(set.d());
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&d), 8);
    std::vector<double> row(static_cast<std::size_t>(set.d()));
    for (Eigen::Index i = 0; i < set.n(); ++i) {
      for (Eigen::Index j = 0; j < set.d(); ++j) row[static_cast<std::size_t>(j)] = set.data()(i, j);
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * 8));
    }
    if (set.weighted()) {
      out.write(reinterpret_cast<const char*>(set.weights().data()),
                static_cast<std::streamsize>(set.n() * 8));
    }
  } else {
    std::ostringstream text;
    for (Eigen::Index j = 0; j < set.d(); ++j) {
      if (j) text << ',';
      text << 'x' << j;
    }
    if (set.weighted()) text << ",weight";
    text << '\n';
    for (Eigen::Index i = 0; i < set.n(); ++i) {
      for (Eigen::Index j = 0; j < set.d(); ++j) {
        if (j) text << ',';
        text << format_double(set.data()(i, j));
      }
      if (set.weighted()) text << ',' << format_double(set.weights()(i));
      text << '\n';
    }
    out << text.str();
  }

  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

EmbeddingSet subsample(const EmbeddingSet& set, Eigen::Index m, std::uint64_t seed) {
  if (set.weighted()) throw InvalidArgument("subsample requires an unweighted set");
  if (m < 1 || m > set.n()) {
    throw InvalidArgument("subsample size " + std::to_string(m) + " out of range [1, " +
                          std::to_string(set.n()) + "]");
  }
  auto idx = draw_without_replacement(set.n(), m, seed);
  return EmbeddingSet(gather_rows(set.data(), idx));
}

EmbeddingSet mix(const EmbeddingSet& a, const EmbeddingSet& b, double epsilon, Eigen::Index m,
                 std::uint64_t seed) {
  if (a.weighted() || b.weighted()) throw InvalidArgument("mix requires unweighted sets");
  if (a.d() != b.d()) {
    throw InvalidArgument("mix dimension mismatch: " + std::to_string(a.d()) + " vs " +
                          std::to_string(b.d()));
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidArgument("epsilon must be in [0, 1]");
  if (m < 1) throw InvalidArgument("mix size must be >= 1");

  // Half-up rounding keeps the contamination count deterministic at grid values.
  auto from_b = static_cast<Eigen::Index>(std::floor(epsilon * static_cast<double>(m) + 0.5));
  Eigen::Index from_a = m - from_b;
  if (from_b > b.n() || from_a > a.n()) {
    throw InvalidArgument("mix needs " + std::to_string(from_a) + " rows from A (have " +
                          std::to_string(a.n()) + ") and " + std::to_string(from_b) +
                          " rows from B (have " + std::to_string(b.n()) + ")");
  }

  Eigen::MatrixXd out(m, a.d());
  if (from_a > 0) {
    auto ia = draw_without_replacement(a.n(), from_a, mix_seed(seed, 1));
    for (Eigen::Index i = 0; i < from_a; ++i) out.row(i) = a.data().row(ia[static_cast<std::size_t>(i)]);
  }
  if (from_b > 0) {
    auto ib = draw_without_replacement(b.n(), from_b, mix_seed(seed, 2));
    for (Eigen::Index i = 0; i < from_b; ++i)
      out.row(from_a + i) = b.data().row(ib[static_cast<std::size_t>(i)]);
  }

  Rng rng(mix_seed(seed, 3));
  for (Eigen::Index i = m - 1; i > 0; --i) {
    auto j = static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
    out.row(i).swap(out.row(j));
  }
  return EmbeddingSet(std::move(out));
}

}  // namespace mindist
