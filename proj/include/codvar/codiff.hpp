#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace codvar {

using Vec = std::vector<double>;

inline constexpr double kTolNorm = 1e-12;
inline constexpr double kTolFace = 1e-9;
inline constexpr double kTolReduce = 1e-10;

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;
  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  static Matrix identity(std::size_t n);
};

struct AffinePiece {
  double a = 0.0;
  Vec v;
};

class Polytope {
 public:
  Polytope() = default;
  Polytope(std::size_t dim, std::vector<AffinePiece> vertices);

  static Polytope zero(std::size_t dim);
  static Polytope point(double a, Vec v);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return verts_.size(); }
  const std::vector<AffinePiece>& vertices() const { return verts_; }
  const AffinePiece& operator[](std::size_t i) const { return verts_[i]; }
  double max_a() const;
  double min_a() const;

 private:
  std::size_t dim_ = 0;
  std::vector<AffinePiece> verts_;
};

struct Codifferential {
  Polytope hypo;
  Polytope hyper;
  std::size_t dim() const { return hypo.dim(); }
  static Codifferential zero(std::size_t dim);
  static Codifferential smooth(Vec gradient);
};

// Pure-gradient pair; vectors only.
struct Quasidifferential {
  std::vector<Vec> sub;
  std::vector<Vec> sup;
};

struct Term {
  double lambda;
  const Codifferential* cd;
};

double phi_eval(const Polytope& hypo, std::span<const double> dx);
double psi_eval(const Polytope& hyper, std::span<const double> dx);
// Phi + Psi.
double dc_increment(const Codifferential& cd, std::span<const double> dx);

Polytope scale(const Polytope& p, double s);
Polytope minkowski_sum(const Polytope& p, const Polytope& q);
Polytope shift(const Polytope& p, double da);
Polytope hull_union(const std::vector<Polytope>& ps);
Polytope reduce(const Polytope& p, double tol = kTolReduce);
// Shift so that max a = 0 (hypo) or min a = 0 (hyper).
Codifferential normalize(Codifferential cd);

Codifferential linear_combine(std::span<const Term> terms);
Codifferential max_rule(std::span<const Codifferential> cds, std::span<const double> values);
Codifferential min_rule(std::span<const Codifferential> cds, std::span<const double> values);
Codifferential compose_smooth(std::span<const double> partials, std::span<const Codifferential> cds);
// M is (old dim) x (new dim); every vertex (a, v) becomes (a, M^T v).
Codifferential precompose_affine(const Codifferential& cd, const Matrix& M);

Quasidifferential quasidiff_extract(const Codifferential& cd, double tol_face = kTolFace);
// Indices of vertices on the a = 0 face.
std::vector<std::size_t> zero_face(const Polytope& p, double tol_face = kTolFace);
double directional_derivative(const Codifferential& cd, std::span<const double> v);

// Euclidean distance from a point to conv(points), and the nearest point.
double point_polytope_distance(std::span<const double> x, const std::vector<Vec>& points,
                               Vec* nearest = nullptr);
// Distances treat (a, v) as a point of R^{1+n}.
double hausdorff_distance(const Polytope& p, const Polytope& q);

// Membership of (a, v) in conv(p) via LP; returns convex coefficients on success.
bool polytope_contains(const Polytope& p, double a, std::span<const double> v, double tol,
                       Vec* coeffs = nullptr);

}  // namespace codvar
