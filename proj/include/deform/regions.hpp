#pragma once
// Closed subsets of the plane as finite unions of convex pieces, piecewise
// affine deformations between them, intersection matrices and the
// continuation graph of self-intersections.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace deform {

using Vec2 = Eigen::Vector2d;

/// Closed convex set of dimension 0, 1 or 2. One-dimensional pieces are
/// parametrized as anchor + t * dir (|dir| = 1) for t in [t0, t1], where the
/// bounds may be infinite. Two-dimensional pieces are bounded polygons with
/// counterclockwise vertices.
class ConvexPiece {
 public:
  enum class Kind { Point, Segment, Polygon };

  static ConvexPiece point(const Vec2& p);
  static ConvexPiece segment(const Vec2& a, const Vec2& b);
  static ConvexPiece ray(const Vec2& origin, const Vec2& dir);
  static ConvexPiece line(const Vec2& through, const Vec2& dir);
  static ConvexPiece param(const Vec2& anchor, const Vec2& dir, double t0, double t1);
  /// Convex hull of the points, collapsed to the right dimension. Empty
  /// result when pts is empty.
  static std::optional<ConvexPiece> hull(std::vector<Vec2> pts, double eps);

  Kind kind() const { return kind_; }
  int dim() const { return static_cast<int>(kind_); }
  const std::vector<Vec2>& vertices() const { return v_; }
  const Vec2& anchor() const { return v_[0]; }
  const Vec2& dir() const { return dir_; }
  double t0() const { return t0_; }
  double t1() const { return t1_; }
  bool bounded() const { return std::isfinite(t0_) && std::isfinite(t1_); }
  Vec2 at(double t) const { return v_[0] + t * dir_; }

  double measure() const;
  /// Finite points that determine the piece under affine maps: polygon
  /// vertices, segment endpoints, or for unbounded pieces two points on it.
  std::vector<Vec2> control_points() const;
  double extent() const;
  bool contains(const Vec2& p, double eps) const;

 private:
  Kind kind_ = Kind::Point;
  std::vector<Vec2> v_;
  Vec2 dir_ = Vec2::Zero();
  double t0_ = 0.0, t1_ = 0.0;
};

struct Affine2 {
  Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
  Vec2 b = Vec2::Zero();

  static Affine2 identity() { return {}; }
  static Affine2 translation(const Vec2& t) { return {Eigen::Matrix2d::Identity(), t}; }
  /// Rotation by angle about center.
  static Affine2 rotation(double angle, const Vec2& center = Vec2::Zero());
  Vec2 operator()(const Vec2& x) const { return a * x + b; }
  Affine2 inverse() const;
  /// (*this) after `first`: x -> this(first(x)).
  Affine2 after(const Affine2& first) const { return {a * first.a, a * first.b + b}; }
  bool operator==(const Affine2& o) const { return a == o.a && b == o.b; }
};

class Region {
 public:
  Region() = default;
  explicit Region(std::vector<ConvexPiece> pieces);
  static Region polygon(const std::vector<Vec2>& ccw_vertices);
  static Region interval(double lo, double hi);  // on the x-axis
  static Region empty() { return {}; }

  const std::vector<ConvexPiece>& pieces() const { return pieces_; }
  bool is_empty() const { return pieces_.empty(); }
  int dim() const;
  double measure() const;
  /// Snap tolerance: 1e-9 times the bounding scale (at least 1e-9).
  double eps() const;
  int components() const;
  std::vector<Vec2> control_points() const;
  bool contains(const Vec2& p) const;

 private:
  std::vector<ConvexPiece> pieces_;
};

Region intersect(const Region& a, const Region& b);
Region unite(const Region& a, const Region& b);
/// Closure of a minus b, computed piecewise in each piece's own dimension.
Region subtract(const Region& a, const Region& b);
bool equal(const Region& a, const Region& b);
Region image(const Region& r, const Affine2& m);

/// Piecewise affine invertible map; piece i maps parts[i] by maps[i].
class AffineDeformation {
 public:
  struct Branch {
    Region part;
    Affine2 map;
  };

  AffineDeformation() = default;
  AffineDeformation(const Region& domain, const Affine2& map);
  explicit AffineDeformation(std::vector<Branch> branches);
  /// Line y = 0 split at sorted breakpoints; piece i is rotated by angles[i]
  /// and the pieces are chained continuously from the right, the rightmost
  /// piece being rotated about the origin and then translated.
  static AffineDeformation bent_line(const std::vector<double>& breakpoints, const std::vector<double>& angles,
                                     const Vec2& translation);
  static AffineDeformation identity(const Region& domain) { return {domain, Affine2::identity()}; }

  const std::vector<Branch>& branches() const { return branches_; }
  Region domain() const;
  Region image() const;
  /// zeta(X) = union of maps[i](X cap parts[i]).
  Region forward(const Region& x) const;
  /// zeta^-1(Y) = union of maps[i]^-1(Y) cap parts[i].
  Region backward(const Region& y) const;
  AffineDeformation restrict_to(const Region& x) const;
  AffineDeformation inverse() const;
  /// Value at p from the first branch containing p.
  std::optional<Vec2> apply(const Vec2& p) const;

 private:
  std::vector<Branch> branches_;
};

/// z2 after z1; requires Im z1 = Dom z2, otherwise CompositionError.
AffineDeformation compose(const AffineDeformation& z1, const AffineDeformation& z2);
/// Same domain and the maps agree (to tol) on control points of every
/// overlap of parts.
bool equivalent(const AffineDeformation& a, const AffineDeformation& b, double tol = 0.0);

using BoolMatrix = std::array<std::array<Region, 2>, 2>;

BoolMatrix intersection_matrix(const AffineDeformation& z1, const AffineDeformation& z2);
BoolMatrix bool_product(const BoolMatrix& p, const BoolMatrix& q);
BoolMatrix bool_scale(const Region& s, const BoolMatrix& m);
Region bool_determinant(const BoolMatrix& m);
bool equal(const BoolMatrix& a, const BoolMatrix& b);

enum class SimpleClass { Par, Sl, Str, Ctr, Nonsimple };
std::string class_name(SimpleClass c);

struct Classification {
  SimpleClass label = SimpleClass::Nonsimple;
  /// Set when sliding comes from a pointwise fixed self-intersection.
  std::optional<Region> fixed_set;
};

/// Classification of a map from `domain` onto `img` given the map itself
/// (used for the fixed-point test).
Classification classify_sets(const Region& domain, const Region& img, const AffineDeformation& map);
Classification classify_simple(const AffineDeformation& z);

struct GraphVariant {
  int parent_signature = 0;  // signature of the parent node
  char sign = '+';
  Region domain;
  Region image;
  Region self_intersection;
  Classification cls;
};

struct GraphNode {
  int n = 0;
  int s = 0;
  Region set;  // S_(n,s)
  std::vector<GraphVariant> variants;
  int components = 0;
  bool simplest() const;
};

struct ContinuationGraph {
  /// levels[n] holds the nodes of order n; level 0 is the deformation itself.
  std::vector<std::vector<GraphNode>> levels;
  std::optional<int> order;
  std::vector<SimpleClass> classes;
  std::optional<Region> fixed_set;
  int max_depth = 0;
  bool disconnected = false;
  /// All variants of every node produced the same set.
  bool diamond_ok = true;
  /// No variant below a simplest node is non-simplest.
  bool absorbing_ok = true;
  std::string type_string() const;
};

/// Builds levels until every node of a level is simplest or max_depth is
/// reached. With `full`, keeps building to max_depth regardless.
ContinuationGraph continuation_graph(const AffineDeformation& z, int max_depth = 12, bool full = false);
std::string to_dot(const ContinuationGraph& g);

struct ConsequentReport {
  BoolMatrix lhs;  // I(z1,z1) I(z2,z2)
  BoolMatrix rhs;  // ((S1 u Im z2) n S1') I(z1,z2)
  bool relation_holds = false;
  bool all_parallel = false;          // z1, z2, z2 o z1 parallel
  bool all_parallel_pattern = false;  // I(z1,z2) = [[0,0],[S1',0]]
  bool composition_parallel = false;
  bool composition_pattern = false;   // I(z1,z2) = S1' [[S1,0],[M,Im z2]]
};

ConsequentReport consequent_identities(const AffineDeformation& z1, const AffineDeformation& z2);

}  // namespace deform
