#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rmf/geometry.hpp"

namespace rmf {

enum class Generator { SphereVmfMixture, SphereRing, TorusWrappedMixture, So3Fisher, So3Line, Csv };
enum class CsvLayout { LatLonDegrees, Ambient, Angles };

std::string to_string(Generator g);
std::string to_string(CsvLayout l);
Generator parse_generator(std::string_view text);
CsvLayout parse_layout(std::string_view text);

struct DatasetSpec {
  std::string name = "sphere_ring";
  Generator generator = Generator::SphereRing;
  /// Dimension argument: d for the sphere generators, N for the torus.
  int dim = 3;
  int n = 10000;
  std::uint64_t seed = 0;
  std::array<double, 3> split = {0.8, 0.1, 0.1};

  /// Mixture components (vMF, wrapped Gaussian).
  int components = 2;
  /// Explicit component centers / Fisher mode; drawn from the seed when empty.
  std::vector<std::vector<double>> centers;
  /// vMF / matrix-Fisher concentration.
  double concentration = 50.0;
  /// Ring tangent noise, torus wrapped-Gaussian std, SO3 line tangent noise.
  double noise = 0.05;

  std::string path;
  CsvLayout layout = CsvLayout::Ambient;
  /// Manifold for csv sources ("sphere(3)", "torus(2)", ...).
  std::string csv_manifold = "sphere(3)";

  /// Manifold the generator produces.
  Manifold manifold() const;
  /// Throws InvalidSpec.
  void validate() const;
};

struct Dataset {
  Mat points;
  /// Empty when the source carries no labels; -1 marks an unlabeled row.
  std::vector<int> labels;

  int size() const { return static_cast<int>(points.cols()); }
  bool labeled() const { return !labels.empty(); }
  Dataset select(const std::vector<int>& idx) const;
};

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Raw draw of spec.n points (or the CSV contents), in generation order.
Dataset generate(const DatasetSpec& spec);

/// Seeded shuffle, then val = floor(f_val n), test = floor(f_test n), train = rest.
Splits split(const Dataset& data, const std::array<double, 3>& fractions, std::uint64_t seed);

/// generate + split with the spec's seed.
Splits make_splits(const DatasetSpec& spec);

/// One point per row; an extra trailing integer column is read as the label.
/// Lines starting with '#' and blank lines are skipped; a first line with no
/// numeric field is a header. Throws IoError, LineError(ParseError) or
/// LineError(InvariantViolation) for points off the manifold by more than 1e-6.
Dataset ingest_csv(const std::string& path, const Manifold& m, CsvLayout layout);

/// Writes ambient coordinates (plus a label column when labels are present).
/// Each entry of `comments` becomes a "# ..." line before the rows.
void write_csv(const std::string& path, const Mat& points, const std::vector<int>& labels = {},
               const std::vector<std::string>& comments = {});

}  // namespace rmf
