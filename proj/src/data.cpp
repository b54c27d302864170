#include "rmf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "rmf/error.hpp"

namespace rmf {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kUnlabeled = -1;

// Marsaglia-Tsang; shape < 1 uses the U^(1/a) boost.
double gamma_draw(double shape, Rng& rng) {
  if (shape < 1.0) {
    const double u = rng.uniform();
    return gamma_draw(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double beta_draw(double a, double b, Rng& rng) {
  const double x = gamma_draw(a, rng);
  const double y = gamma_draw(b, rng);
  return x / (x + y);
}

// Wood (1994) rejection sampler for the vMF cosine w = <x, mu>.
double vmf_cosine(int d, double kappa, Rng& rng) {
  const double dm1 = d - 1.0;
  const double b = (-2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1)) / dm1;
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);
  for (;;) {
    const double z = beta_draw(0.5 * dm1, 0.5 * dm1, rng);
    const double w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = rng.uniform();
    if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) return w;
  }
}

Vec vmf_draw(const Vec& mu, double kappa, Rng& rng) {
  const int d = static_cast<int>(mu.size());
  const double w = vmf_cosine(d, kappa, rng);
  Vec v(d);
  double norm = 0.0;
  do {
    for (int i = 0; i < d; ++i) v(i) = rng.normal();
    v -= v.dot(mu) * mu;
    norm = v.norm();
  } while (norm < 1e-12);
  Vec x = w * mu + std::sqrt(std::max(0.0, 1.0 - w * w)) * (v / norm);
  return x / x.norm();
}

double wrap(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

std::vector<Vec> centers_or_random(const DatasetSpec& spec, const Manifold& m, Rng& rng) {
  std::vector<Vec> out;
  if (!spec.centers.empty()) {
    for (const auto& c : spec.centers) {
      Vec v = Eigen::Map<const Vec>(c.data(), static_cast<Eigen::Index>(c.size()));
      out.push_back(m.retract_point(v));
    }
    return out;
  }
  for (int k = 0; k < spec.components; ++k) out.push_back(m.random_point(rng));
  return out;
}

// Inverse CDF of the rotation angle under the isotropic matrix-Fisher law,
// density proportional to (1 - cos a) exp(2 kappa cos a) on [0, pi].
class FisherAngle {
 public:
  explicit FisherAngle(double kappa) {
    constexpr int kGrid = 4096;
    grid_.resize(kGrid + 1);
    cdf_.resize(kGrid + 1);
    double prev = 0.0;
    cdf_[0] = 0.0;
    for (int i = 0; i <= kGrid; ++i) {
      const double a = kPi * i / kGrid;
      grid_[i] = a;
      // exp shifted by its maximum for stability at large kappa
      const double f = (1.0 - std::cos(a)) * std::exp(2.0 * kappa * (std::cos(a) - 1.0));
      if (i > 0) cdf_[i] = cdf_[i - 1] + 0.5 * (f + prev) * (kPi / kGrid);
      prev = f;
    }
    const double total = cdf_.back();
    for (double& v : cdf_) v /= total;
  }

  double draw(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    const std::size_t lo = hi - 1;
    const double span = cdf_[hi] - cdf_[lo];
    const double f = span > 0.0 ? (u - cdf_[lo]) / span : 0.0;
    return grid_[lo] + f * (grid_[hi] - grid_[lo]);
  }

 private:
  std::vector<double> grid_;
  std::vector<double> cdf_;
};

Eigen::Vector3d random_axis(Rng& rng) {
  Eigen::Vector3d a;
  do {
    a = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  } while (a.norm() < 1e-12);
  return a.normalized();
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(trim(f));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::string to_string(Generator g) {
  switch (g) {
    case Generator::SphereVmfMixture: return "sphere_vmf_mixture";
    case Generator::SphereRing: return "sphere_ring";
    case Generator::TorusWrappedMixture: return "torus_wrapped_mixture";
    case Generator::So3Fisher: return "so3_fisher";
    case Generator::So3Line: return "so3_line";
    case Generator::Csv: return "csv";
  }
  return "unknown";
}

std::string to_string(CsvLayout l) {
  switch (l) {
    case CsvLayout::LatLonDegrees: return "latlon_degrees";
    case CsvLayout::Ambient: return "ambient";
    case CsvLayout::Angles: return "angles";
  }
  return "unknown";
}

Generator parse_generator(std::string_view text) {
  for (Generator g : {Generator::SphereVmfMixture, Generator::SphereRing, Generator::TorusWrappedMixture,
                      Generator::So3Fisher, Generator::So3Line, Generator::Csv}) {
    if (text == to_string(g)) return g;
  }
  throw Error(ErrorCode::InvalidSpec, "unknown generator '" + std::string(text) + "'");
}

CsvLayout parse_layout(std::string_view text) {
  for (CsvLayout l : {CsvLayout::LatLonDegrees, CsvLayout::Ambient, CsvLayout::Angles}) {
    if (text == to_string(l)) return l;
  }
  throw Error(ErrorCode::InvalidSpec, "unknown CSV layout '" + std::string(text) + "'");
}

Manifold DatasetSpec::manifold() const {
  switch (generator) {
    case Generator::SphereVmfMixture:
    case Generator::SphereRing: return Manifold::sphere(dim);
    case Generator::TorusWrappedMixture: return Manifold::torus(dim);
    case Generator::So3Fisher:
    case Generator::So3Line: return Manifold::so3();
    case Generator::Csv: return Manifold::parse(csv_manifold);
  }
  throw Error(ErrorCode::InvalidSpec, "bad generator");
}

void DatasetSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidSpec, m); };
  if (n < 10 && generator != Generator::Csv) fail("dataset n must be >= 10");
  double sum = 0.0;
  for (double f : split) {
    if (!(f >= 0.0)) fail("split fractions must be nonnegative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail("split fractions must sum to 1");
  try {
    manifold();
  } catch (const Error& e) {
    fail(std::string("bad manifold: ") + e.what());
  }
  const bool mixture = generator == Generator::SphereVmfMixture || generator == Generator::TorusWrappedMixture;
  if (mixture && centers.empty() && components < 1) fail("components must be >= 1");
  if ((generator == Generator::SphereVmfMixture || generator == Generator::So3Fisher) && !(concentration > 0.0)) {
    fail("concentration must be positive");
  }
  if (!(noise >= 0.0)) fail("noise must be >= 0");
  if (generator == Generator::Csv && path.empty()) fail("csv generator needs a path");
  const int dim_needed = generator == Generator::Csv ? 0 : manifold().ambient_dim();
  for (const auto& c : centers) {
    if (generator == Generator::So3Fisher) {
      if (c.size() != 9) fail("so3_fisher mode must have 9 entries");
    } else if (static_cast<int>(c.size()) != dim_needed) {
      fail("center dimension does not match the manifold");
    }
  }
}

Dataset Dataset::select(const std::vector<int>& idx) const {
  Dataset out;
  out.points.resize(points.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.points.col(static_cast<Eigen::Index>(i)) = points.col(idx[i]);
  if (labeled()) {
    out.labels.reserve(idx.size());
    for (int i : idx) out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset generate(const DatasetSpec& spec) {
  spec.validate();
  const Manifold m = spec.manifold();
  if (spec.generator == Generator::Csv) return ingest_csv(spec.path, m, spec.layout);

  Rng rng(spec.seed);
  Dataset out;
  out.points.resize(m.ambient_dim(), spec.n);
  switch (spec.generator) {
    case Generator::SphereRing: {
      for (int j = 0; j < spec.n; ++j) {
        const double a = rng.uniform(0.0, kTwoPi);
        Vec p = Vec::Zero(spec.dim);
        p(0) = std::cos(a);
        p(1) = std::sin(a);
        if (spec.noise > 0.0) p = m.retract_point(p + m.random_tangent(p, spec.noise, rng));
        out.points.col(j) = p;
      }
      break;
    }
    case Generator::SphereVmfMixture: {
      const auto centers = centers_or_random(spec, m, rng);
      const int k = static_cast<int>(centers.size());
      for (int j = 0; j < spec.n; ++j) {
        const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
        out.points.col(j) = vmf_draw(centers[c], spec.concentration, rng);
        out.labels.push_back(c);
      }
      break;
    }
    case Generator::TorusWrappedMixture: {
      const auto centers = centers_or_random(spec, m, rng);
      const int k = static_cast<int>(centers.size());
      for (int j = 0; j < spec.n; ++j) {
        const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
        for (int i = 0; i < spec.dim; ++i) out.points(i, j) = wrap(centers[c](i) + spec.noise * rng.normal());
        out.labels.push_back(c);
      }
      break;
    }
    case Generator::So3Fisher: {
      const so3::Mat3 mode = spec.centers.empty()
                                 ? so3::Mat3::Identity()
                                 : so3::orthogonalize(so3::from_flat(Eigen::Map<const Vec>(spec.centers[0].data(), 9)));
      const FisherAngle angle(spec.concentration);
      for (int j = 0; j < spec.n; ++j) {
        const Eigen::Vector3d axis = random_axis(rng);
        const double a = angle.draw(rng);
        out.points.col(j) = so3::to_flat(so3::orthogonalize(mode * so3::exp(so3::hat(a * axis))));
      }
      break;
    }
    case Generator::So3Line: {
      const Eigen::Vector3d axis = Eigen::Vector3d(1.0, 1.0, 0.0).normalized();
      for (int j = 0; j < spec.n; ++j) {
        const double s = rng.uniform(0.0, kTwoPi);
        const Eigen::Vector3d eps(rng.normal(), rng.normal(), rng.normal());
        const so3::Mat3 r = so3::exp(so3::hat(s * axis)) * so3::exp(so3::hat(spec.noise * eps));
        out.points.col(j) = so3::to_flat(so3::orthogonalize(r));
      }
      break;
    }
    case Generator::Csv:
      break;
  }
  return out;
}

Splits split(const Dataset& data, const std::array<double, 3>& fractions, std::uint64_t seed) {
  const int n = data.size();
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::substream(seed, 0x5eed);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  const int n_val = static_cast<int>(std::floor(fractions[1] * n + 1e-9));
  const int n_test = static_cast<int>(std::floor(fractions[2] * n + 1e-9));
  const int n_train = n - n_val - n_test;
  Splits s;
  s.train = data.select(std::vector<int>(idx.begin(), idx.begin() + n_train));
  s.val = data.select(std::vector<int>(idx.begin() + n_train, idx.begin() + n_train + n_val));
  s.test = data.select(std::vector<int>(idx.begin() + n_train + n_val, idx.end()));
  return s;
}

Splits make_splits(const DatasetSpec& spec) { return split(generate(spec), spec.split, spec.seed); }

Dataset ingest_csv(const std::string& path, const Manifold& m, CsvLayout layout) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  if (layout == CsvLayout::LatLonDegrees && !(m == Manifold::sphere(3))) {
    throw Error(ErrorCode::InvalidArgument, "latlon_degrees layout needs sphere(3)");
  }
  if (layout == CsvLayout::Angles && m.kind() != ManifoldKind::Torus) {
    throw Error(ErrorCode::InvalidArgument, "angles layout needs a torus");
  }
  const int width = layout == CsvLayout::LatLonDegrees ? 2 : m.ambient_dim();

  std::vector<Vec> points;
  std::vector<int> labels;
  bool any_label = false;
  std::string line;
  long line_no = 0;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = split_fields(t);
    std::vector<double> vals(fields.size());
    bool any_numeric = false;
    bool all_numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (parse_double(fields[i], vals[i])) any_numeric = true;
      else all_numeric = false;
    }
    if (first_data_line && !any_numeric) {
      first_data_line = false;
      continue;
    }
    first_data_line = false;
    if (!all_numeric) throw LineError(ErrorCode::ParseError, line_no, path + ": non-numeric field");
    const int cols = static_cast<int>(vals.size());
    if (cols != width && cols != width + 1) {
      throw LineError(ErrorCode::ParseError, line_no,
                      path + ": expected " + std::to_string(width) + " or " + std::to_string(width + 1) +
                          " fields, got " + std::to_string(cols));
    }
    int label = kUnlabeled;
    if (cols == width + 1) {
      const double l = vals.back();
      if (l != std::floor(l) || l < -1.0) {
        throw LineError(ErrorCode::ParseError, line_no, path + ": label must be an integer >= -1");
      }
      label = static_cast<int>(l);
      any_label = true;
    }
    Vec p(m.ambient_dim());
    switch (layout) {
      case CsvLayout::LatLonDegrees: {
        const double lat = vals[0] * kPi / 180.0, lon = vals[1] * kPi / 180.0;
        if (std::abs(vals[0]) > 90.0 + 1e-9) {
          throw LineError(ErrorCode::InvariantViolation, line_no, path + ": latitude outside [-90, 90]");
        }
        p << std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat);
        p = m.retract_point(p);
        break;
      }
      case CsvLayout::Angles:
        for (int i = 0; i < width; ++i) p(i) = wrap(vals[i]);
        break;
      case CsvLayout::Ambient:
        for (int i = 0; i < width; ++i) p(i) = vals[i];
        if (m.kind() == ManifoldKind::Torus) {
          for (int i = 0; i < width; ++i) {
            if (p(i) < -1e-6 || p(i) > kTwoPi + 1e-6) {
              throw LineError(ErrorCode::InvariantViolation, line_no, path + ": angle outside [0, 2pi)");
            }
            p(i) = wrap(p(i));
          }
        }
        if (!m.is_point(p, 1e-6)) {
          throw LineError(ErrorCode::InvariantViolation, line_no, path + ": point is off " + m.name());
        }
        p = m.retract_point(p);
        break;
    }
    points.push_back(p);
    labels.push_back(label);
  }
  Dataset out;
  out.points.resize(m.ambient_dim(), static_cast<Eigen::Index>(points.size()));
  for (std::size_t j = 0; j < points.size(); ++j) out.points.col(static_cast<Eigen::Index>(j)) = points[j];
  if (any_label) out.labels = std::move(labels);
  return out;
}

void write_csv(const std::string& path, const Mat& points, const std::vector<int>& labels,
               const std::vector<std::string>& comments) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  for (const auto& c : comments) std::fprintf(f, "# %s\n", c.c_str());
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      std::fprintf(f, i == 0 ? "%.17g" : ",%.17g", points(i, j));
    }
    if (!labels.empty()) std::fprintf(f, ",%d", labels[static_cast<std::size_t>(j)]);
    std::fputc('\n', f);
  }
  const bool ok = std::ferror(f) == 0;
  if (std::fclose(f) != 0 || !ok) throw Error(ErrorCode::IoError, "write failed: " + path);
}

}  // namespace rmf
