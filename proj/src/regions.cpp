#include "deform/regions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "deform/errors.hpp"

namespace deform {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kParallel = 1e-12;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double polygon_area(const std::vector<Vec2>& v) {
  double a = 0.0;
  for (size_t i = 0; i < v.size(); ++i) a += cross(v[i], v[(i + 1) % v.size()]);
  return 0.5 * a;
}

// Inward unit normal and a point of edge i of a CCW polygon.
std::pair<Vec2, Vec2> edge_halfplane(const std::vector<Vec2>& v, size_t i) {
  const Vec2& a = v[i];
  Vec2 e = v[(i + 1) % v.size()] - a;
  Vec2 n(-e.y(), e.x());
  return {n / n.norm(), a};
}

// Clips a convex point loop to {x : n.(x - a) >= -slack}.
std::vector<Vec2> clip_halfplane(const std::vector<Vec2>& pts, const Vec2& n, const Vec2& a, double slack) {
  std::vector<Vec2> out;
  const size_t m = pts.size();
  if (m == 0) return out;
  if (m == 1) {
    if (n.dot(pts[0] - a) >= -slack) out.push_back(pts[0]);
    return out;
  }
  for (size_t i = 0; i < m; ++i) {
    const Vec2& p = pts[i];
    const Vec2& q = pts[(i + 1) % m];
    double dp = n.dot(p - a), dq = n.dot(q - a);
    bool pin = dp >= -slack, qin = dq >= -slack;
    if (pin) out.push_back(p);
    if (pin != qin) {
      double t = std::clamp(dp / (dp - dq), 0.0, 1.0);
      out.push_back(p + t * (q - p));
    }
  }
  return out;
}

// Parameter range of a line piece inside a convex polygon, without slack
// extension beyond eps along the normals.
std::pair<double, double> clip_range(const ConvexPiece& seg, const std::vector<Vec2>& poly, double eps) {
  double lo = seg.t0(), hi = seg.t1();
  for (size_t i = 0; i < poly.size(); ++i) {
    auto [n, a] = edge_halfplane(poly, i);
    double c = n.dot(seg.anchor() - a);
    double s = n.dot(seg.dir());
    if (std::abs(s) <= kParallel) {
      if (c < -eps) return {1.0, 0.0};
      continue;
    }
    double bound = (-eps - c) / s;
    if (s > 0)
      lo = std::max(lo, bound);
    else
      hi = std::min(hi, bound);
    if (lo > hi) return {1.0, 0.0};
  }
  return {lo, hi};
}

// Range of q expressed in p's parameter when both lie on one line.
std::optional<std::pair<double, double>> collinear_range(const ConvexPiece& p, const ConvexPiece& q, double eps) {
  if (std::abs(cross(p.dir(), q.dir())) > kParallel) return std::nullopt;
  if (std::abs(cross(p.dir(), q.anchor() - p.anchor())) > eps) return std::nullopt;
  double base = p.dir().dot(q.anchor() - p.anchor());
  double sg = p.dir().dot(q.dir()) > 0 ? 1.0 : -1.0;
  double a = base + sg * q.t0(), b = base + sg * q.t1();
  if (a > b) std::swap(a, b);
  return std::make_pair(a, b);
}

std::optional<ConvexPiece> from_range(const ConvexPiece& seg, double lo, double hi, double eps) {
  if (lo > hi + eps) return std::nullopt;
  if (hi - lo <= eps) return ConvexPiece::point(seg.at(0.5 * (lo + hi)));
  return ConvexPiece::param(seg.anchor(), seg.dir(), lo, hi);
}

std::optional<ConvexPiece> intersect_pieces(const ConvexPiece& p, const ConvexPiece& q, double eps) {
  using K = ConvexPiece::Kind;
  if (p.kind() == K::Point) return q.contains(p.anchor(), eps) ? std::optional(p) : std::nullopt;
  if (q.kind() == K::Point) return p.contains(q.anchor(), eps) ? std::optional(q) : std::nullopt;
  if (p.kind() == K::Polygon && q.kind() == K::Polygon) {
    std::vector<Vec2> pts = p.vertices();
    for (size_t i = 0; i < q.vertices().size() && !pts.empty(); ++i) {
      auto [n, a] = edge_halfplane(q.vertices(), i);
      pts = clip_halfplane(pts, n, a, eps);
    }
    return ConvexPiece::hull(std::move(pts), eps);
  }
  if (p.kind() == K::Polygon) return intersect_pieces(q, p, eps);
  if (q.kind() == K::Polygon) {
    auto [lo, hi] = clip_range(p, q.vertices(), eps);
    return from_range(p, lo, hi, eps);
  }
  // Two line pieces.
  if (auto r = collinear_range(p, q, eps)) {
    return from_range(p, std::max(p.t0(), r->first), std::min(p.t1(), r->second), eps);
  }
  double cr = cross(p.dir(), q.dir());
  if (std::abs(cr) <= kParallel) return std::nullopt;
  Vec2 w = q.anchor() - p.anchor();
  double t = cross(w, q.dir()) / cr;
  double s = cross(w, p.dir()) / cr;
  if (t < p.t0() - eps || t > p.t1() + eps || s < q.t0() - eps || s > q.t1() + eps) return std::nullopt;
  return ConvexPiece::point(p.at(std::clamp(t, p.t0(), p.t1())));
}

std::vector<ConvexPiece> subtract_pieces(const ConvexPiece& p, const ConvexPiece& q, double eps) {
  using K = ConvexPiece::Kind;
  if (p.kind() == K::Point) {
    if (q.contains(p.anchor(), eps)) return {};
    return {p};
  }
  if (q.dim() < p.dim()) return {p};
  if (p.kind() == K::Segment) {
    double lo, hi;
    if (q.kind() == K::Polygon) {
      std::tie(lo, hi) = clip_range(p, q.vertices(), eps);
    } else {
      auto r = collinear_range(p, q, eps);
      if (!r) return {p};
      lo = std::max(p.t0(), r->first);
      hi = std::min(p.t1(), r->second);
    }
    if (lo > hi) return {p};
    std::vector<ConvexPiece> out;
    if (lo - p.t0() > eps) out.push_back(ConvexPiece::param(p.anchor(), p.dir(), p.t0(), lo));
    if (p.t1() - hi > eps) out.push_back(ConvexPiece::param(p.anchor(), p.dir(), hi, p.t1()));
    return out;
  }
  // Polygon minus polygon: peel off the part outside each edge of q.
  std::vector<ConvexPiece> out;
  std::vector<Vec2> rest = p.vertices();
  for (size_t i = 0; i < q.vertices().size() && !rest.empty(); ++i) {
    auto [n, a] = edge_halfplane(q.vertices(), i);
    auto outside = clip_halfplane(rest, -n, a, 0.0);
    if (auto h = ConvexPiece::hull(std::move(outside), eps); h && h->kind() == K::Polygon) out.push_back(*h);
    rest = clip_halfplane(rest, n, a, 0.0);
  }
  return out;
}

bool contained(const ConvexPiece& p, const ConvexPiece& q, double eps) {
  if (p.dim() > q.dim()) return false;
  return subtract_pieces(p, q, eps).empty();
}

std::vector<ConvexPiece> normalize(std::vector<ConvexPiece> pieces, double eps) {
  // Higher dimensional pieces first so lower ones are dropped against them.
  std::stable_sort(pieces.begin(), pieces.end(),
                   [](const ConvexPiece& a, const ConvexPiece& b) { return a.dim() > b.dim(); });
  std::vector<ConvexPiece> out;
  for (const auto& p : pieces) {
    bool dup = false;
    for (const auto& q : out) {
      if (contained(p, q, eps)) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(p);
  }
  return out;
}

double op_eps(const Region& a, const Region& b) { return std::max(a.eps(), b.eps()); }

ConvexPiece map_piece(const ConvexPiece& p, const Affine2& m) {
  using K = ConvexPiece::Kind;
  switch (p.kind()) {
    case K::Point:
      return ConvexPiece::point(m(p.anchor()));
    case K::Segment: {
      Vec2 d = m.a * p.dir();
      double s = d.norm();
      return ConvexPiece::param(m(p.anchor()), d / s, p.t0() * s, p.t1() * s);
    }
    case K::Polygon: {
      std::vector<Vec2> v;
      for (const auto& x : p.vertices()) v.push_back(m(x));
      if (m.a.determinant() < 0) std::reverse(v.begin(), v.end());
      return ConvexPiece::hull(std::move(v), 0.0).value();
    }
  }
  return p;
}

bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

std::vector<std::vector<Vec2>> ear_clip(std::vector<Vec2> v) {
  std::vector<std::vector<Vec2>> tris;
  auto inside_tri = [](const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
    return cross(b - a, p - a) >= 0 && cross(c - b, p - b) >= 0 && cross(a - c, p - c) >= 0;
  };
  while (v.size() > 3) {
    bool clipped = false;
    const size_t n = v.size();
    for (size_t i = 0; i < n; ++i) {
      const Vec2& a = v[(i + n - 1) % n];
      const Vec2& b = v[i];
      const Vec2& c = v[(i + 1) % n];
      if (cross(b - a, c - b) <= 0) continue;
      bool ear = true;
      for (size_t j = 0; j < n && ear; ++j) {
        if (j == i || j == (i + 1) % n || j == (i + n - 1) % n) continue;
        if (inside_tri(v[j], a, b, c)) ear = false;
      }
      if (!ear) continue;
      tris.push_back({a, b, c});
      v.erase(v.begin() + static_cast<long>(i));
      clipped = true;
      break;
    }
    if (!clipped) throw GeometryError("polygon could not be triangulated");
  }
  tris.push_back(v);
  return tris;
}

}  // namespace

// ---------------------------------------------------------------------------
// ConvexPiece

ConvexPiece ConvexPiece::point(const Vec2& p) {
  ConvexPiece c;
  c.kind_ = Kind::Point;
  c.v_ = {p};
  return c;
}

ConvexPiece ConvexPiece::param(const Vec2& anchor, const Vec2& dir, double t0, double t1) {
  ConvexPiece c;
  c.kind_ = Kind::Segment;
  c.v_ = {anchor};
  c.dir_ = dir;
  c.t0_ = t0;
  c.t1_ = t1;
  return c;
}

ConvexPiece ConvexPiece::segment(const Vec2& a, const Vec2& b) {
  double len = (b - a).norm();
  if (len == 0.0) return point(a);
  return param(a, (b - a) / len, 0.0, len);
}

ConvexPiece ConvexPiece::ray(const Vec2& origin, const Vec2& dir) { return param(origin, dir.normalized(), 0.0, kInf); }

ConvexPiece ConvexPiece::line(const Vec2& through, const Vec2& dir) {
  return param(through, dir.normalized(), -kInf, kInf);
}

std::optional<ConvexPiece> ConvexPiece::hull(std::vector<Vec2> pts, double eps) {
  std::vector<Vec2> uniq;
  for (const auto& p : pts) {
    bool seen = false;
    for (const auto& q : uniq) {
      if ((p - q).norm() <= eps) {
        seen = true;
        break;
      }
    }
    if (!seen) uniq.push_back(p);
  }
  if (uniq.empty()) return std::nullopt;
  size_t ia = 0, ib = 0;
  double diam = 0.0;
  for (size_t i = 0; i < uniq.size(); ++i)
    for (size_t j = i + 1; j < uniq.size(); ++j)
      if (double d = (uniq[i] - uniq[j]).norm(); d > diam) diam = d, ia = i, ib = j;
  if (diam <= eps) {
    Vec2 mean = Vec2::Zero();
    for (const auto& p : uniq) mean += p;
    return point(mean / static_cast<double>(uniq.size()));
  }
  const Vec2 a = uniq[ia];
  const Vec2 u = (uniq[ib] - a) / diam;
  auto as_segment = [&]() {
    double lo = 0.0, hi = 0.0;
    for (const auto& p : uniq) {
      double t = u.dot(p - a);
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    return param(a, u, lo, hi);
  };
  double dev = 0.0;
  for (const auto& p : uniq) dev = std::max(dev, std::abs(cross(u, p - a)));
  if (dev <= eps) return as_segment();

  std::sort(uniq.begin(), uniq.end(),
            [](const Vec2& p, const Vec2& q) { return p.x() < q.x() || (p.x() == q.x() && p.y() < q.y()); });
  std::vector<Vec2> h(2 * uniq.size());
  size_t k = 0;
  for (size_t i = 0; i < uniq.size(); ++i) {
    while (k >= 2 && cross(h[k - 1] - h[k - 2], uniq[i] - h[k - 2]) <= 0) --k;
    h[k++] = uniq[i];
  }
  for (size_t i = uniq.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 1] - h[k - 2], uniq[i] - h[k - 2]) <= 0) --k;
    h[k++] = uniq[i];
  }
  h.resize(k - 1);
  if (polygon_area(h) <= eps * diam) return as_segment();
  ConvexPiece c;
  c.kind_ = Kind::Polygon;
  c.v_ = std::move(h);
  return c;
}

double ConvexPiece::measure() const {
  switch (kind_) {
    case Kind::Point:
      return 0.0;
    case Kind::Segment:
      return t1_ - t0_;
    case Kind::Polygon:
      return polygon_area(v_);
  }
  return 0.0;
}

std::vector<Vec2> ConvexPiece::control_points() const {
  switch (kind_) {
    case Kind::Point:
    case Kind::Polygon:
      return v_;
    case Kind::Segment:
      if (bounded()) return {at(t0_), at(t1_)};
      if (std::isfinite(t0_)) return {at(t0_), at(t0_ + 1.0)};
      if (std::isfinite(t1_)) return {at(t1_ - 1.0), at(t1_)};
      return {v_[0], v_[0] + dir_};
  }
  return v_;
}

double ConvexPiece::extent() const {
  double e = 0.0;
  for (const auto& p : control_points()) e = std::max(e, p.cwiseAbs().maxCoeff());
  if (kind_ == Kind::Segment && bounded()) e = std::max(e, t1_ - t0_);
  return e;
}

bool ConvexPiece::contains(const Vec2& p, double eps) const {
  switch (kind_) {
    case Kind::Point:
      return (p - v_[0]).norm() <= eps;
    case Kind::Segment: {
      Vec2 w = p - v_[0];
      double t = dir_.dot(w);
      return std::abs(cross(dir_, w)) <= eps && t >= t0_ - eps && t <= t1_ + eps;
    }
    case Kind::Polygon:
      for (size_t i = 0; i < v_.size(); ++i) {
        auto [n, a] = edge_halfplane(v_, i);
        if (n.dot(p - a) < -eps) return false;
      }
      return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Affine2

Affine2 Affine2::rotation(double angle, const Vec2& center) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return {r, center - r * center};
}

Affine2 Affine2::inverse() const {
  double det = a.determinant();
  if (det == 0.0 || !std::isfinite(det)) throw GeometryError("affine map is not invertible");
  Eigen::Matrix2d inv;
  inv << a(1, 1), -a(0, 1), -a(1, 0), a(0, 0);
  if (det != 1.0) inv /= det;
  return {inv, -(inv * b)};
}

// ---------------------------------------------------------------------------
// Region

Region::Region(std::vector<ConvexPiece> pieces) : pieces_(std::move(pieces)) {
  Region probe;
  probe.pieces_ = pieces_;
  pieces_ = normalize(std::move(pieces_), probe.eps());
}

Region Region::polygon(const std::vector<Vec2>& vertices) {
  if (vertices.size() < 3) throw GeometryError("polygon needs at least three vertices");
  double scale = 1.0;
  for (const auto& p : vertices) {
    if (!p.allFinite()) throw GeometryError("polygon vertex is not finite");
    scale = std::max(scale, p.cwiseAbs().maxCoeff());
  }
  std::vector<Vec2> v = vertices;
  double area = polygon_area(v);
  if (std::abs(area) <= 1e-12 * scale * scale) throw GeometryError("polygon has zero area");
  if (area < 0) std::reverse(v.begin(), v.end());
  const size_t n = v.size();
  for (size_t i = 0; i < n; ++i) {
    if ((v[i] - v[(i + 1) % n]).norm() == 0.0) throw GeometryError("polygon has repeated vertices");
    for (size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]))
        throw GeometryError("polygon is self-intersecting");
    }
  }
  bool convex = true;
  for (size_t i = 0; i < n; ++i)
    if (cross(v[(i + 1) % n] - v[i], v[(i + 2) % n] - v[(i + 1) % n]) < 0) convex = false;
  std::vector<ConvexPiece> pieces;
  if (convex) {
    pieces.push_back(ConvexPiece::hull(v, 0.0).value());
  } else {
    for (auto& t : ear_clip(v)) pieces.push_back(ConvexPiece::hull(std::move(t), 0.0).value());
  }
  return Region(std::move(pieces));
}

Region Region::interval(double lo, double hi) {
  if (!(lo <= hi)) throw GeometryError("interval bounds out of order");
  if (lo == hi) return Region({ConvexPiece::point(Vec2(lo, 0.0))});
  return Region({ConvexPiece::param(Vec2::Zero(), Vec2(1.0, 0.0), lo, hi)});
}

int Region::dim() const {
  int d = -1;
  for (const auto& p : pieces_) d = std::max(d, p.dim());
  return d;
}

double Region::eps() const {
  double scale = 1.0;
  for (const auto& p : pieces_) scale = std::max(scale, p.extent());
  return 1e-9 * scale;
}

double Region::measure() const {
  const int d = dim();
  if (d <= 0) return 0.0;
  const double e = eps();
  double total = 0.0;
  std::vector<ConvexPiece> seen;
  for (const auto& p : pieces_) {
    if (p.dim() != d) continue;
    std::vector<ConvexPiece> cur{p};
    for (const auto& q : seen) {
      std::vector<ConvexPiece> next;
      for (const auto& c : cur) {
        auto parts = subtract_pieces(c, q, e);
        next.insert(next.end(), parts.begin(), parts.end());
      }
      cur = std::move(next);
    }
    for (const auto& c : cur) total += c.measure();
    seen.push_back(p);
  }
  return total;
}

int Region::components() const {
  const size_t n = pieces_.size();
  std::vector<size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  const double e = eps();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (intersect_pieces(pieces_[i], pieces_[j], e)) parent[find(i)] = find(j);
  int c = 0;
  for (size_t i = 0; i < n; ++i)
    if (find(i) == i) ++c;
  return c;
}

std::vector<Vec2> Region::control_points() const {
  std::vector<Vec2> out;
  for (const auto& p : pieces_) {
    auto c = p.control_points();
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

bool Region::contains(const Vec2& p) const {
  const double e = eps();
  return std::any_of(pieces_.begin(), pieces_.end(), [&](const ConvexPiece& c) { return c.contains(p, e); });
}

Region intersect(const Region& a, const Region& b) {
  const double e = op_eps(a, b);
  std::vector<ConvexPiece> out;
  for (const auto& p : a.pieces())
    for (const auto& q : b.pieces())
      if (auto r = intersect_pieces(p, q, e)) out.push_back(*r);
  return Region(std::move(out));
}

Region unite(const Region& a, const Region& b) {
  std::vector<ConvexPiece> out = a.pieces();
  out.insert(out.end(), b.pieces().begin(), b.pieces().end());
  return Region(std::move(out));
}

Region subtract(const Region& a, const Region& b) {
  const double e = op_eps(a, b);
  std::vector<ConvexPiece> out;
  for (const auto& p : a.pieces()) {
    std::vector<ConvexPiece> cur{p};
    for (const auto& q : b.pieces()) {
      std::vector<ConvexPiece> next;
      for (const auto& c : cur) {
        auto parts = subtract_pieces(c, q, e);
        next.insert(next.end(), parts.begin(), parts.end());
      }
      cur = std::move(next);
      if (cur.empty()) break;
    }
    out.insert(out.end(), cur.begin(), cur.end());
  }
  return Region(std::move(out));
}

bool equal(const Region& a, const Region& b) { return subtract(a, b).is_empty() && subtract(b, a).is_empty(); }

Region image(const Region& r, const Affine2& m) {
  std::vector<ConvexPiece> out;
  for (const auto& p : r.pieces()) out.push_back(map_piece(p, m));
  return Region(std::move(out));
}

// ---------------------------------------------------------------------------
// AffineDeformation

namespace {
void check_invertible(const Affine2& m) {
  double det = m.a.determinant();
  double scale = std::max(1.0, m.a.cwiseAbs().maxCoeff());
  if (!std::isfinite(det) || std::abs(det) <= 1e-14 * scale * scale)
    throw GeometryError("deformation has a singular linear part");
}
}  // namespace

AffineDeformation::AffineDeformation(const Region& domain, const Affine2& map) {
  check_invertible(map);
  branches_.push_back({domain, map});
}

AffineDeformation::AffineDeformation(std::vector<Branch> branches) : branches_(std::move(branches)) {
  for (const auto& b : branches_) check_invertible(b.map);
}

AffineDeformation AffineDeformation::bent_line(const std::vector<double>& breakpoints,
                                               const std::vector<double>& angles, const Vec2& translation) {
  if (angles.size() != breakpoints.size() + 1) throw GeometryError("bent line needs one angle per piece");
  if (!std::is_sorted(breakpoints.begin(), breakpoints.end()) ||
      std::adjacent_find(breakpoints.begin(), breakpoints.end()) != breakpoints.end())
    throw GeometryError("breakpoints must be strictly increasing");
  const size_t m = breakpoints.size();
  const Vec2 ex(1.0, 0.0);
  std::vector<Branch> br(m + 1);
  br[m].map = Affine2::rotation(angles[m]);
  br[m].map.b += translation;
  for (size_t i = m; i-- > 0;) {
    Vec2 q(breakpoints[i], 0.0);
    Affine2 r = Affine2::rotation(angles[i]);
    br[i].map = {r.a, br[i + 1].map(q) - r.a * q};
  }
  for (size_t i = 0; i <= m; ++i) {
    double lo = i == 0 ? -kInf : breakpoints[i - 1];
    double hi = i == m ? kInf : breakpoints[i];
    br[i].part = Region({ConvexPiece::param(Vec2::Zero(), ex, lo, hi)});
  }
  return AffineDeformation(std::move(br));
}

Region AffineDeformation::domain() const {
  std::vector<ConvexPiece> out;
  for (const auto& b : branches_) out.insert(out.end(), b.part.pieces().begin(), b.part.pieces().end());
  return Region(std::move(out));
}

Region AffineDeformation::image() const { return forward(domain()); }

Region AffineDeformation::forward(const Region& x) const {
  std::vector<ConvexPiece> out;
  for (const auto& b : branches_) {
    Region y = deform::image(intersect(x, b.part), b.map);
    out.insert(out.end(), y.pieces().begin(), y.pieces().end());
  }
  return Region(std::move(out));
}

Region AffineDeformation::backward(const Region& y) const {
  std::vector<ConvexPiece> out;
  for (const auto& b : branches_) {
    Region x = intersect(deform::image(y, b.map.inverse()), b.part);
    out.insert(out.end(), x.pieces().begin(), x.pieces().end());
  }
  return Region(std::move(out));
}

AffineDeformation AffineDeformation::restrict_to(const Region& x) const {
  std::vector<Branch> out;
  for (const auto& b : branches_) {
    Region p = intersect(b.part, x);
    if (!p.is_empty()) out.push_back({std::move(p), b.map});
  }
  return AffineDeformation(std::move(out));
}

AffineDeformation AffineDeformation::inverse() const {
  std::vector<Branch> out;
  for (const auto& b : branches_) out.push_back({deform::image(b.part, b.map), b.map.inverse()});
  return AffineDeformation(std::move(out));
}

std::optional<Vec2> AffineDeformation::apply(const Vec2& p) const {
  for (const auto& b : branches_)
    if (b.part.contains(p)) return b.map(p);
  return std::nullopt;
}

AffineDeformation compose(const AffineDeformation& z1, const AffineDeformation& z2) {
  if (!equal(z1.image(), z2.domain())) throw CompositionError("image of the first deformation is not the domain of the second");
  std::vector<AffineDeformation::Branch> out;
  for (const auto& b1 : z1.branches()) {
    for (const auto& b2 : z2.branches()) {
      Region part = intersect(b1.part, image(b2.part, b1.map.inverse()));
      if (!part.is_empty()) out.push_back({std::move(part), b2.map.after(b1.map)});
    }
  }
  return AffineDeformation(std::move(out));
}

bool equivalent(const AffineDeformation& a, const AffineDeformation& b, double tol) {
  if (!equal(a.domain(), b.domain())) return false;
  for (const auto& ba : a.branches()) {
    for (const auto& bb : b.branches()) {
      if (ba.map == bb.map) continue;
      Region overlap = intersect(ba.part, bb.part);
      for (const auto& p : overlap.control_points())
        if ((ba.map(p) - bb.map(p)).cwiseAbs().maxCoeff() > tol) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Boolean matrices

BoolMatrix intersection_matrix(const AffineDeformation& z1, const AffineDeformation& z2) {
  Region s1 = z1.domain(), s1p = z1.image(), s2 = z2.domain(), s2p = z2.image();
  return {{{intersect(s1, s2), intersect(s1, s2p)}, {intersect(s1p, s2), intersect(s1p, s2p)}}};
}

BoolMatrix bool_product(const BoolMatrix& p, const BoolMatrix& q) {
  BoolMatrix r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r[i][j] = unite(intersect(p[i][0], q[0][j]), intersect(p[i][1], q[1][j]));
  return r;
}

BoolMatrix bool_scale(const Region& s, const BoolMatrix& m) {
  BoolMatrix r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r[i][j] = intersect(s, m[i][j]);
  return r;
}

Region bool_determinant(const BoolMatrix& m) {
  return subtract(intersect(m[0][0], m[1][1]), intersect(m[0][1], m[1][0]));
}

bool equal(const BoolMatrix& a, const BoolMatrix& b) {
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (!equal(a[i][j], b[i][j])) return false;
  return true;
}

std::string class_name(SimpleClass c) {
  switch (c) {
    case SimpleClass::Par:
      return "Par";
    case SimpleClass::Sl:
      return "Sl";
    case SimpleClass::Str:
      return "Str";
    case SimpleClass::Ctr:
      return "Ctr";
    case SimpleClass::Nonsimple:
      return "nonsimple";
  }
  return "nonsimple";
}

namespace {
bool pointwise_fixed(const Region& x, const AffineDeformation& map) {
  const double e = x.eps();
  for (const auto& b : map.branches()) {
    Region y = intersect(x, b.part);
    for (const auto& p : y.control_points())
      if ((b.map(p) - p).norm() > e) return false;
  }
  return true;
}
}  // namespace

Classification classify_sets(const Region& domain, const Region& img, const AffineDeformation& map) {
  Region x = intersect(domain, img);
  if (x.is_empty()) return {SimpleClass::Par, std::nullopt};
  if (equal(domain, img)) return {SimpleClass::Sl, std::nullopt};
  if (pointwise_fixed(x, map)) return {SimpleClass::Sl, x};
  bool str = equal(x, domain), ctr = equal(x, img);
  if (str && ctr) return {SimpleClass::Sl, std::nullopt};
  if (str) return {SimpleClass::Str, std::nullopt};
  if (ctr) return {SimpleClass::Ctr, std::nullopt};
  return {SimpleClass::Nonsimple, std::nullopt};
}

Classification classify_simple(const AffineDeformation& z) { return classify_sets(z.domain(), z.image(), z); }

// ---------------------------------------------------------------------------
// Continuation graph

bool GraphNode::simplest() const {
  return std::all_of(variants.begin(), variants.end(),
                     [](const GraphVariant& v) { return v.cls.label != SimpleClass::Nonsimple; });
}

namespace {
std::string format_point(const Vec2& p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "(%.6g, %.6g)", p.x(), p.y());
  return buf;
}
}  // namespace

std::string ContinuationGraph::type_string() const {
  if (!order) return "order > " + std::to_string(max_depth) + " (possibly infinite)";
  std::string cls;
  for (size_t i = 0; i < classes.size(); ++i) {
    if (i) cls += ", ";
    cls += class_name(classes[i]);
    if (classes[i] == SimpleClass::Sl && fixed_set) {
      std::string pts;
      for (const auto& p : fixed_set->control_points()) pts += (pts.empty() ? "" : "; ") + format_point(p);
      cls += "(" + pts + ")";
    }
  }
  if (classes.size() > 1) cls = "{" + cls + "}";
  return "(" + std::to_string(*order) + ", " + cls + ")";
}

ContinuationGraph continuation_graph(const AffineDeformation& z, int max_depth, bool full) {
  ContinuationGraph g;
  const AffineDeformation zi = z.inverse();

  GraphNode root;
  {
    GraphVariant v;
    v.domain = z.domain();
    v.image = z.image();
    v.self_intersection = intersect(v.domain, v.image);
    v.cls = classify_sets(v.domain, v.image, z);
    root.set = v.self_intersection;
    root.variants.push_back(std::move(v));
  }
  root.components = root.set.components();
  g.levels.push_back({root});

  auto stabilize = [&](int n) {
    const auto& level = g.levels[static_cast<size_t>(n)];
    if (!std::all_of(level.begin(), level.end(), [](const GraphNode& nd) { return nd.simplest(); })) return;
    std::set<std::string> names;
    std::vector<ConvexPiece> fixed;
    bool all_fixed = true;
    for (const auto& nd : level) {
      for (const auto& v : nd.variants) {
        if (names.insert(class_name(v.cls.label)).second) g.classes.push_back(v.cls.label);
        if (v.cls.label == SimpleClass::Sl) {
          if (v.cls.fixed_set)
            fixed.insert(fixed.end(), v.cls.fixed_set->pieces().begin(), v.cls.fixed_set->pieces().end());
          else
            all_fixed = false;
        }
      }
    }
    std::sort(g.classes.begin(), g.classes.end(),
              [](SimpleClass a, SimpleClass b) { return class_name(a) < class_name(b); });
    if (!fixed.empty() && all_fixed) g.fixed_set = Region(std::move(fixed));
    g.order = n;
  };
  stabilize(0);

  for (int n = 1; n <= max_depth && (full || !g.order); ++n) {
    const auto& prev = g.levels.back();
    std::map<int, GraphNode> next;
    for (const auto& parent : prev) {
      for (int sign : {+1, -1}) {
        const AffineDeformation& map = sign > 0 ? z : zi;
        GraphVariant v;
        v.parent_signature = parent.s;
        v.sign = sign > 0 ? '+' : '-';
        v.domain = parent.set;
        v.image = sign > 0 ? z.forward(parent.set) : z.backward(parent.set);
        v.self_intersection = intersect(v.domain, v.image);
        v.cls = classify_sets(v.domain, v.image, map.restrict_to(parent.set));
        if (parent.simplest() && v.cls.label == SimpleClass::Nonsimple) g.absorbing_ok = false;
        GraphNode& node = next[parent.s + sign];
        node.n = n;
        node.s = parent.s + sign;
        if (node.variants.empty()) {
          node.set = v.self_intersection;
        } else if (!equal(node.set, v.self_intersection)) {
          g.diamond_ok = false;
        }
        node.variants.push_back(std::move(v));
      }
    }
    std::vector<GraphNode> level;
    for (auto it = next.rbegin(); it != next.rend(); ++it) {
      it->second.components = it->second.set.components();
      if (it->second.components > 1) g.disconnected = true;
      level.push_back(std::move(it->second));
    }
    g.levels.push_back(std::move(level));
    g.max_depth = n;
    if (!g.order) stabilize(n);
  }
  if (root.components > 1) g.disconnected = true;
  return g;
}

std::string to_dot(const ContinuationGraph& g) {
  std::ostringstream os;
  os << "digraph continuation {\n  rankdir=TB;\n";
  auto id = [](int n, int s) { return "n" + std::to_string(n) + "_" + (s < 0 ? "m" + std::to_string(-s) : std::to_string(s)); };
  for (const auto& level : g.levels) {
    for (const auto& nd : level) {
      std::string label;
      for (const auto& v : nd.variants) {
        std::string l = class_name(v.cls.label);
        if (label.find(l) == std::string::npos) label += (label.empty() ? "" : "/") + l;
      }
      os << "  " << id(nd.n, nd.s) << " [label=\"(" << nd.n << "," << nd.s << ") " << label << "\"];\n";
      if (nd.n == 0) continue;
      for (const auto& v : nd.variants)
        os << "  " << id(nd.n - 1, v.parent_signature) << " -> " << id(nd.n, nd.s) << " [label=\"" << v.sign
           << "\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

ConsequentReport consequent_identities(const AffineDeformation& z1, const AffineDeformation& z2) {
  AffineDeformation comp = compose(z1, z2);
  ConsequentReport r;
  const Region s1 = z1.domain(), s1p = z1.image(), s2 = z2.image();
  const BoolMatrix i12 = intersection_matrix(z1, z2);
  r.lhs = bool_product(intersection_matrix(z1, z1), intersection_matrix(z2, z2));
  r.rhs = bool_scale(intersect(unite(s1, s2), s1p), i12);
  r.relation_holds = equal(r.lhs, r.rhs);

  auto parallel = [](const AffineDeformation& z) { return intersect(z.domain(), z.image()).is_empty(); };
  r.composition_parallel = parallel(comp);
  r.all_parallel = parallel(z1) && parallel(z2) && r.composition_parallel;
  r.all_parallel_pattern = i12[0][0].is_empty() && i12[0][1].is_empty() && equal(i12[1][0], s1p) &&
                           i12[1][1].is_empty();
  BoolMatrix pattern{{{intersect(s1p, s1), Region{}}, {s1p, intersect(s1p, s2)}}};
  r.composition_pattern = equal(i12, pattern);
  return r;
}

}  // namespace deform
