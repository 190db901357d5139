#include "borfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace borfem {

const char* to_string(Region r) {
  switch (r) {
    case Region::Body: return "BODY";
    case Region::Air: return "AIR";
    case Region::Pml: return "PML";
  }
  return "?";
}

const char* to_string(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::None: return "NONE";
    case BoundaryTag::Axis: return "AXIS";
    case BoundaryTag::Ground: return "GROUND";
    case BoundaryTag::PmlOuter: return "PML_OUTER";
  }
  return "?";
}

void DomainSpec::validate() const {
  if (body.segments().empty()) throw GeometryError("domain has no body profile");
  if (!(pml_thickness > 0.0)) throw ParameterError("pml_thickness must be positive");
  if (!(h_air > 0.0) || !(h_body > 0.0)) throw ParameterError("target edge length must be positive");
  if (!(min_angle_deg > 0.0 && min_angle_deg <= 33.0))
    throw ParameterError("minimum angle must lie in (0, 33] degrees");
  const double clear = 2.0 * h_air;
  if (body.max_rho() + clear > rho_max)
    throw GeometryError("body does not fit radially inside the air region");
  if (body.max_z() + clear > z_max) throw GeometryError("body does not fit below the air region top");
  if (ground) {
    if (z_min != 0.0) throw GeometryError("ground domains must start at z = 0");
    if (body.min_z() < -1e-12) throw GeometryError("body extends below the ground");
  } else if (body.min_z() - clear < z_min) {
    throw GeometryError("body does not fit above the air region bottom");
  }
}

DomainSpec make_domain(const BoRProfile& body, double freq, cplx body_eps, const MeshOptions& opts) {
  if (!(freq > 0.0)) throw ParameterError("frequency must be positive");
  const double lam = wavelength(freq);
  DomainSpec d;
  d.body = body;
  d.ground = opts.ground;
  d.h_air = lam / opts.air_ppw;
  d.h_body = std::min(d.h_air, lam / (opts.body_ppw * std::sqrt(std::abs(body_eps))));
  d.pml_thickness = opts.pml * lam;
  const double margin = std::max(opts.air_margin * lam, 2.0 * d.h_air);
  d.rho_max = body.max_rho() + margin;
  d.z_max = body.max_z() + margin;
  d.z_min = opts.ground ? 0.0 : body.min_z() - margin;
  return d;
}

// ---------------------------------------------------------------------------
// Constrained Delaunay kernel

namespace {

using real = long double;

real orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (static_cast<real>(b.x()) - a.x()) * (static_cast<real>(c.y()) - a.y()) -
         (static_cast<real>(b.y()) - a.y()) * (static_cast<real>(c.x()) - a.x());
}

// > 0 when d lies inside the circumcircle of the counter-clockwise triangle abc.
real incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const real adx = static_cast<real>(a.x()) - d.x(), ady = static_cast<real>(a.y()) - d.y();
  const real bdx = static_cast<real>(b.x()) - d.x(), bdy = static_cast<real>(b.y()) - d.y();
  const real cdx = static_cast<real>(c.x()) - d.x(), cdy = static_cast<real>(c.y()) - d.y();
  const real ad = adx * adx + ady * ady, bd = bdx * bdx + bdy * bdy, cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

Vec2 circumcenter(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double bx = b.x() - a.x(), by = b.y() - a.y();
  const double cx = c.x() - a.x(), cy = c.y() - a.y();
  const double d = 2.0 * (bx * cy - by * cx);
  const double b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  return {a.x() + (cy * b2 - by * c2) / d, a.y() + (bx * c2 - cx * b2) / d};
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

constexpr int kOutside = -1;

struct Tri {
  std::array<int, 3> v;
  std::array<int, 3> n;  // n[i]: neighbour across the edge opposite v[i]
  int region = kOutside;
  bool alive = true;
};

class Cdt {
 public:
  std::vector<Vec2> pts;
  std::vector<Tri> tris;
  std::unordered_set<std::uint64_t> constrained;

  explicit Cdt(double x0, double y0, double x1, double y1) {
    const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
    const double r = 20.0 * std::max(x1 - x0, y1 - y0);
    pts.push_back({cx - r, cy - r});
    pts.push_back({cx + r, cy - r});
    pts.push_back({cx, cy + r});
    vert_tri_.assign(3, 0);
    tris.push_back({{0, 1, 2}, {-1, -1, -1}, kOutside, true});
  }

  bool is_super(int v) const { return v < 3; }

  int locate(const Vec2& p) const {
    int t = last_;
    if (t < 0 || t >= static_cast<int>(tris.size()) || !tris[t].alive) t = first_alive();
    for (std::size_t steps = 0; steps < 4 * tris.size() + 16; ++steps) {
      const Tri& T = tris[t];
      bool moved = false;
      for (int k = 0; k < 3; ++k) {
        const int i = (k + static_cast<int>(steps)) % 3;
        const int a = T.v[(i + 1) % 3], b = T.v[(i + 2) % 3];
        if (orient(pts[a], pts[b], p) < 0 && T.n[i] >= 0) {
          t = T.n[i];
          moved = true;
          break;
        }
      }
      if (!moved) return t;
    }
    throw MeshError("point location did not terminate");
  }

  /// Triangles sharing vertex v, in rotation order.
  std::vector<int> fan(int v) const {
    std::vector<int> out;
    const int start = vert_tri_[v];
    int t = start;
    do {
      out.push_back(t);
      const Tri& T = tris[t];
      const int i = local(T, v);
      t = T.n[(i + 2) % 3];
      if (out.size() > 10000) throw MeshError("corrupt vertex fan");
    } while (t != start && t >= 0);
    if (t < 0) {  // open fan (hull vertex): walk the other way too
      t = tris[start].n[(local(tris[start], v) + 1) % 3];
      while (t >= 0) {
        out.push_back(t);
        const Tri& T = tris[t];
        t = T.n[(local(T, v) + 1) % 3];
      }
    }
    return out;
  }

  /// Triangle containing the directed edge a->b (counter-clockwise), or -1.
  int tri_with_edge(int a, int b) const {
    for (int t : fan(a)) {
      const Tri& T = tris[t];
      const int i = local(T, a);
      if (T.v[(i + 1) % 3] == b) return t;
    }
    return -1;
  }

  bool has_edge(int a, int b) const { return tri_with_edge(a, b) >= 0 || tri_with_edge(b, a) >= 0; }

  static int local(const Tri& T, int v) {
    for (int i = 0; i < 3; ++i)
      if (T.v[i] == v) return i;
    throw MeshError("vertex not in triangle");
  }

  struct Cavity {
    std::vector<int> tris;
    std::vector<std::pair<int, int>> boundary;  // (triangle, local index) with outer edge
  };

  /// Bowyer-Watson cavity of p, not crossing constrained edges except split_key.
  Cavity cavity(const Vec2& p, int t0, std::uint64_t split_key) {
    ++stamp_;
    if (mark_.size() < tris.size()) mark_.resize(tris.size(), 0);
    Cavity c;
    c.tris.push_back(t0);
    mark_[t0] = stamp_;
    for (std::size_t q = 0; q < c.tris.size(); ++q) {
      const Tri& T = tris[c.tris[q]];
      for (int i = 0; i < 3; ++i) {
        const int nb = T.n[i];
        if (nb < 0 || mark_[nb] == stamp_) continue;
        const std::uint64_t key = edge_key(T.v[(i + 1) % 3], T.v[(i + 2) % 3]);
        const bool split = key == split_key;
        if (!split && constrained.count(key)) continue;
        const Tri& N = tris[nb];
        if (split || incircle(pts[N.v[0]], pts[N.v[1]], pts[N.v[2]], p) > 0) {
          mark_[nb] = stamp_;
          c.tris.push_back(nb);
        }
      }
    }
    repair(c, p, t0, split_key);
    return c;
  }

  /// Constrained edges on the cavity boundary.
  std::vector<std::pair<int, int>> boundary_segments(const Cavity& c) const {
    std::vector<std::pair<int, int>> segs;
    for (auto [t, i] : c.boundary) {
      const Tri& T = tris[t];
      const int a = T.v[(i + 1) % 3], b = T.v[(i + 2) % 3];
      if (constrained.count(edge_key(a, b))) segs.push_back({a, b});
    }
    return segs;
  }

  /// Insert p with a previously computed cavity. Returns the new vertex id.
  int commit(const Vec2& p, const Cavity& c, std::uint64_t split_key) {
    const int pv = static_cast<int>(pts.size());
    pts.push_back(p);
    vert_tri_.push_back(-1);
    std::unordered_map<int, int> starts, ends;
    std::vector<int> created;
    for (auto [t, i] : c.boundary) {
      const Tri& T = tris[t];
      const int a = T.v[(i + 1) % 3], b = T.v[(i + 2) % 3];
      const int nb = T.n[i];
      Tri nt{{pv, a, b}, {nb, -1, -1}, T.region, true};
      const int id = static_cast<int>(tris.size()) + static_cast<int>(created.size());
      created.push_back(id);
      new_.push_back(nt);
      starts[a] = id;
      ends[b] = id;
    }
    for (std::size_t k = 0; k < created.size(); ++k) {
      Tri& nt = new_[k];
      const int a = nt.v[1], b = nt.v[2];
      // edge (b, p) is opposite a; edge (p, a) is opposite b
      auto sa = starts.find(b);
      auto eb = ends.find(a);
      if (sa == starts.end() || eb == ends.end()) throw MeshError("cavity boundary is not closed");
      nt.n[1] = sa->second;
      nt.n[2] = eb->second;
    }
    // Outer neighbours now point at the new triangles.
    for (std::size_t k = 0; k < created.size(); ++k) {
      const Tri& nt = new_[k];
      const int nb = nt.n[0];
      if (nb < 0) continue;
      Tri& N = tris[nb];
      for (int i = 0; i < 3; ++i) {
        const int a = N.v[(i + 1) % 3], b = N.v[(i + 2) % 3];
        if ((a == nt.v[2] && b == nt.v[1])) N.n[i] = created[k];
      }
    }
    for (int t : c.tris) tris[t].alive = false;
    for (std::size_t k = 0; k < created.size(); ++k) {
      tris.push_back(new_[k]);
      for (int v : new_[k].v) vert_tri_[v] = created[k];
    }
    new_.clear();
    // Every vertex of the removed triangles must survive on the ring.
    for (int t : c.tris)
      for (int v : tris[t].v)
        if (starts.find(v) == starts.end()) throw MeshError("cavity swallowed a vertex");
    if (split_key != 0) {
      constrained.erase(split_key);
      const int a = static_cast<int>(split_key >> 32), b = static_cast<int>(split_key & 0xffffffffu);
      constrained.insert(edge_key(a, pv));
      constrained.insert(edge_key(pv, b));
    }
    last_created_ = created;
    last_ = created.front();
    return pv;
  }

  int insert(const Vec2& p, std::uint64_t split_key = 0, int hint = -1) {
    const int t0 = hint >= 0 ? hint : locate(p);
    return commit(p, cavity(p, t0, split_key), split_key);
  }

  const std::vector<int>& last_created() const { return last_created_; }

  int first_alive() const {
    for (int t = static_cast<int>(tris.size()) - 1; t >= 0; --t)
      if (tris[t].alive) return t;
    throw MeshError("no triangles");
  }

 private:
  void repair(Cavity& c, const Vec2& p, int t0, std::uint64_t split_key) {
    // Drop triangles that would break the star shape around p or straddle a
    // protected constraint, then keep only the part connected to t0.
    for (int pass = 0; pass < 64; ++pass) {
      bool changed = false;
      for (int t : c.tris) {
        if (t == t0 || mark_[t] != stamp_) continue;
        const Tri& T = tris[t];
        for (int i = 0; i < 3; ++i) {
          const int nb = T.n[i];
          const int a = T.v[(i + 1) % 3], b = T.v[(i + 2) % 3];
          const std::uint64_t key = edge_key(a, b);
          const bool inside = nb >= 0 && mark_[nb] == stamp_;
          bool bad = false;
          if (inside) {
            bad = key != split_key && constrained.count(key) > 0;
          } else {
            bad = orient(pts[a], pts[b], p) <= 0;
          }
          if (bad) {
            mark_[t] = 0;
            changed = true;
            break;
          }
        }
      }
      // Connectivity from t0.
      std::vector<int> kept{t0};
      ++stamp_;
      mark_[t0] = stamp_;
      const int old = stamp_ - 1;
      for (std::size_t q = 0; q < kept.size(); ++q) {
        const Tri& T = tris[kept[q]];
        for (int i = 0; i < 3; ++i) {
          const int nb = T.n[i];
          if (nb < 0 || mark_[nb] != old) continue;
          const std::uint64_t key = edge_key(T.v[(i + 1) % 3], T.v[(i + 2) % 3]);
          if (key != split_key && constrained.count(key)) continue;
          mark_[nb] = stamp_;
          kept.push_back(nb);
        }
      }
      for (int t : c.tris)
        if (mark_[t] == old) {
          mark_[t] = 0;
          changed = true;
        }
      c.tris = std::move(kept);
      if (!changed) break;
    }
    c.boundary.clear();
    for (int t : c.tris) {
      const Tri& T = tris[t];
      for (int i = 0; i < 3; ++i) {
        const int nb = T.n[i];
        if (nb < 0 || mark_[nb] != stamp_) {
          if (orient(pts[T.v[(i + 1) % 3]], pts[T.v[(i + 2) % 3]], p) <= 0)
            throw MeshError("point on a protected edge or outside the triangulation");
          c.boundary.push_back({t, i});
        }
      }
    }
  }

  std::vector<int> vert_tri_;
  std::vector<Tri> new_;
  std::vector<int> mark_;
  std::vector<int> last_created_;
  int stamp_ = 0;
  int last_ = 0;
};

// Snap key for deduplicating input points.
std::pair<long long, long long> snap(const Vec2& p) {
  return {std::llround(p.x() * 1e10), std::llround(p.y() * 1e10)};
}

struct Pslg {
  std::vector<Vec2> pts;
  std::vector<std::pair<int, int>> segs;
  std::map<std::pair<long long, long long>, int> index;

  int add(const Vec2& p) {
    auto [it, fresh] = index.emplace(snap(p), static_cast<int>(pts.size()));
    if (fresh) pts.push_back(p);
    return it->second;
  }
  void polyline(const std::vector<Vec2>& line) {
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
      const int a = add(line[i]), b = add(line[i + 1]);
      if (a != b) segs.push_back({a, b});
    }
  }
};

// Straight piece from a to b split into equal parts no longer than h.
std::vector<Vec2> subdivide(const Vec2& a, const Vec2& b, double h) {
  const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / h - 1e-9)));
  std::vector<Vec2> out;
  for (int i = 0; i <= n; ++i) out.push_back(a + (b - a) * (static_cast<double>(i) / n));
  out.front() = a;
  out.back() = b;
  return out;
}

// Straight boundary line through sorted breakpoints; pieces inside the body use h_body.
void add_line(Pslg& g, std::vector<Vec2> brk, const DomainSpec& spec,
              const std::vector<Vec2>& body_poly) {
  for (std::size_t i = 0; i + 1 < brk.size(); ++i) {
    const Vec2 mid = 0.5 * (brk[i] + brk[i + 1]);
    // Pieces on the axis/ground under the body: probe slightly inside the domain.
    const Vec2 probe = mid + Vec2(1e-9, 1e-9);
    const double h = point_in_polygon(body_poly, probe) ? spec.h_body : spec.h_air;
    g.polyline(subdivide(brk[i], brk[i + 1], h));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Mesh2D triangulate(const DomainSpec& spec) {
  spec.validate();
  const double R = spec.rho_max + spec.pml_thickness;
  const double Zt = spec.z_max + spec.pml_thickness;
  const double Zb = spec.ground ? 0.0 : spec.z_min - spec.pml_thickness;

  // Body outline: surface segments at h_body; axis and ground contacts come
  // from the domain lines so that they share vertices.
  Pslg g;
  const auto body_poly = spec.body.polygon(spec.h_body);
  std::vector<double> axis_z{Zb, spec.z_max, Zt};
  std::vector<double> ground_rho{0.0, spec.rho_max, R};
  if (!spec.ground) axis_z.push_back(spec.z_min);
  for (const auto& s : spec.body.segments()) {
    if (s.role == SegmentRole::Surface) {
      g.polyline(s.sample(spec.h_body));
    } else if (s.role == SegmentRole::Axis) {
      axis_z.push_back(s.a.y());
      axis_z.push_back(s.b.y());
    } else {
      if (!spec.ground) throw GeometryError("body has a ground segment but the domain has no ground");
      ground_rho.push_back(s.a.x());
      ground_rho.push_back(s.b.x());
    }
    for (const Vec2& p : {s.a, s.b})
      if (p.x() == 0.0) axis_z.push_back(p.y());
  }
  auto uniq = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
            v.end());
    return v;
  };
  axis_z = uniq(axis_z);
  ground_rho = uniq(ground_rho);
  std::vector<Vec2> brk;
  for (double z : axis_z) brk.push_back({0.0, z});
  add_line(g, brk, spec, body_poly);
  brk.clear();
  for (double r : ground_rho) brk.push_back({r, Zb});
  add_line(g, brk, spec, body_poly);

  std::vector<double> side_z{Zb, spec.z_max, Zt};
  if (!spec.ground) side_z.push_back(spec.z_min);
  side_z = uniq(side_z);
  for (double r : {spec.rho_max, R}) {
    brk.clear();
    for (double z : side_z) brk.push_back({r, z});
    add_line(g, brk, spec, body_poly);
  }
  std::vector<double> horiz{Zt, spec.z_max};
  if (!spec.ground) horiz.push_back(spec.z_min);
  for (double z : horiz) add_line(g, {{0.0, z}, {spec.rho_max, z}, {R, z}}, spec, body_poly);

  // Insert vertices and recover segments by midpoint splitting.
  Cdt cdt(0.0, Zb, R, Zt);
  std::vector<int> vid(g.pts.size());
  for (std::size_t i = 0; i < g.pts.size(); ++i) vid[i] = cdt.insert(g.pts[i]);
  std::deque<std::pair<int, int>> pending;
  for (auto [a, b] : g.segs) pending.push_back({vid[a], vid[b]});
  std::size_t guard = 0;
  while (!pending.empty()) {
    auto [a, b] = pending.front();
    pending.pop_front();
    if (++guard > 2000000) throw MeshError("segment recovery did not terminate");
    if (cdt.has_edge(a, b)) {
      cdt.constrained.insert(edge_key(a, b));
      continue;
    }
    const Vec2 m = 0.5 * (cdt.pts[a] + cdt.pts[b]);
    if ((cdt.pts[a] - cdt.pts[b]).norm() < 1e-9) {
      std::ostringstream os;
      os << "cannot recover segment (" << cdt.pts[a].transpose() << ") - (" << cdt.pts[b].transpose()
         << ")";
      throw MeshError(os.str());
    }
    const int v = cdt.insert(m);
    pending.push_back({a, v});
    pending.push_back({v, b});
  }

  // Region assignment by flood fill over non-constrained adjacency.
  auto classify = [&](const Vec2& c) {
    if (c.x() > R || c.y() > Zt || c.y() < Zb || c.x() < 0) return kOutside;
    if (point_in_polygon(body_poly, c)) return static_cast<int>(Region::Body);
    if (c.x() > spec.rho_max || c.y() > spec.z_max || c.y() < spec.z_min)
      return static_cast<int>(Region::Pml);
    return static_cast<int>(Region::Air);
  };
  {
    std::vector<char> seen(cdt.tris.size(), 0);
    for (std::size_t s = 0; s < cdt.tris.size(); ++s) {
      if (!cdt.tris[s].alive || seen[s]) continue;
      std::vector<int> comp{static_cast<int>(s)};
      seen[s] = 1;
      bool touches_super = false;
      for (std::size_t q = 0; q < comp.size(); ++q) {
        const Tri& T = cdt.tris[comp[q]];
        for (int i = 0; i < 3; ++i) {
          if (cdt.is_super(T.v[i])) touches_super = true;
          const int nb = T.n[i];
          if (nb < 0 || seen[nb]) continue;
          if (cdt.constrained.count(edge_key(T.v[(i + 1) % 3], T.v[(i + 2) % 3]))) continue;
          seen[nb] = 1;
          comp.push_back(nb);
        }
      }
      int region = kOutside;
      if (!touches_super) {
        // Classify by the largest triangle's centroid (well inside the component).
        int best = comp.front();
        double best_area = -1;
        for (int t : comp) {
          const Tri& T = cdt.tris[t];
          const double a = static_cast<double>(orient(cdt.pts[T.v[0]], cdt.pts[T.v[1]], cdt.pts[T.v[2]]));
          if (a > best_area) best_area = a, best = t;
        }
        const Tri& T = cdt.tris[best];
        region = classify((cdt.pts[T.v[0]] + cdt.pts[T.v[1]] + cdt.pts[T.v[2]]) / 3.0);
      }
      for (int t : comp) cdt.tris[t].region = region;
    }
  }

  // Quality refinement.
  const double cos_min = std::cos(spec.min_angle_deg * kPi / 180.0);
  auto size_of = [&](int region) {
    return region == static_cast<int>(Region::Body) ? spec.h_body : spec.h_air;
  };
  auto is_bad = [&](const Tri& T) {
    if (!T.alive || T.region == kOutside) return false;
    const Vec2& a = cdt.pts[T.v[0]];
    const Vec2& b = cdt.pts[T.v[1]];
    const Vec2& c = cdt.pts[T.v[2]];
    const double h = size_of(T.region) * (1.0 + 1e-9);
    const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
    if (std::max({la, lb, lc}) > h) return true;
    // Smallest angle sits opposite the shortest edge.
    double cosang;
    if (la <= lb && la <= lc) cosang = (b - a).dot(c - a) / (lc * lb);
    else if (lb <= lc) cosang = (a - b).dot(c - b) / (lc * la);
    else cosang = (a - c).dot(b - c) / (lb * la);
    return cosang > cos_min;
  };
  // Segment (a, b) is encroached when a vertex of an adjacent meshed triangle
  // lies inside its diametral circle.
  auto encroached = [&](int a, int b, const Vec2& p) {
    return (cdt.pts[a] - p).dot(cdt.pts[b] - p) < 0.0;
  };
  std::deque<std::pair<int, int>> seg_queue;
  for (auto key : cdt.constrained)
    seg_queue.push_back({static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu)});
  std::sort(seg_queue.begin(), seg_queue.end());
  std::deque<int> tri_queue;
  for (std::size_t t = 0; t < cdt.tris.size(); ++t)
    if (is_bad(cdt.tris[t])) tri_queue.push_back(static_cast<int>(t));

  auto after_insert = [&]() {
    for (int t : cdt.last_created()) {
      const Tri& T = cdt.tris[t];
      for (int i = 0; i < 3; ++i) {
        const int a = T.v[(i + 1) % 3], b = T.v[(i + 2) % 3];
        if (cdt.constrained.count(edge_key(a, b))) seg_queue.push_back({a, b});
      }
      if (is_bad(T)) tri_queue.push_back(t);
    }
  };
  auto split_segment = [&](int a, int b) {
    const Vec2 m = 0.5 * (cdt.pts[a] + cdt.pts[b]);
    int hint = cdt.tri_with_edge(a, b);
    if (hint < 0) hint = cdt.tri_with_edge(b, a);
    cdt.insert(m, edge_key(a, b), hint);
    after_insert();
  };
  auto process_segments = [&]() {
    while (!seg_queue.empty()) {
      auto [a, b] = seg_queue.front();
      seg_queue.pop_front();
      if (!cdt.constrained.count(edge_key(a, b))) continue;
      bool enc = false;
      for (auto [p, q] : {std::pair{a, b}, std::pair{b, a}}) {
        const int t = cdt.tri_with_edge(p, q);
        if (t < 0) continue;
        const Tri& T = cdt.tris[t];
        if (T.region == kOutside) continue;
        const int apex = T.v[(Cdt::local(T, q) + 1) % 3];
        if (encroached(a, b, cdt.pts[apex])) enc = true;
      }
      if (enc) split_segment(a, b);
    }
  };

  // Walk from the triangle toward its circumcenter; returns the containing
  // triangle, or the crossing constrained edge via `blocked`.
  auto walk = [&](int t, const Vec2& target, std::pair<int, int>& blocked) {
    const Tri& T0 = cdt.tris[t];
    const Vec2 src = (cdt.pts[T0.v[0]] + cdt.pts[T0.v[1]] + cdt.pts[T0.v[2]]) / 3.0;
    for (int steps = 0; steps < 100000; ++steps) {
      const Tri& T = cdt.tris[t];
      int exit_edge = -1;
      for (int i = 0; i < 3; ++i) {
        const int a = T.v[(i + 1) % 3], b = T.v[(i + 2) % 3];
        if (orient(cdt.pts[a], cdt.pts[b], target) < 0 &&
            orient(src, target, cdt.pts[a]) * orient(src, target, cdt.pts[b]) <= 0) {
          exit_edge = i;
          break;
        }
      }
      if (exit_edge < 0) {
        // Fall back to any edge the target lies beyond.
        for (int i = 0; i < 3; ++i) {
          const int a = T.v[(i + 1) % 3], b = T.v[(i + 2) % 3];
          if (orient(cdt.pts[a], cdt.pts[b], target) < 0) {
            exit_edge = i;
            break;
          }
        }
      }
      if (exit_edge < 0) return t;
      const int a = T.v[(exit_edge + 1) % 3], b = T.v[(exit_edge + 2) % 3];
      if (cdt.constrained.count(edge_key(a, b)) || T.n[exit_edge] < 0) {
        blocked = {a, b};
        return -1;
      }
      t = T.n[exit_edge];
    }
    throw MeshError("walk did not terminate");
  };

  process_segments();
  std::size_t iterations = 0;
  while (!tri_queue.empty()) {
    if (++iterations > 20000000) throw MeshError("refinement did not terminate");
    const int t = tri_queue.front();
    tri_queue.pop_front();
    if (!is_bad(cdt.tris[t])) continue;
    const Tri& T = cdt.tris[t];
    const Vec2 cc = circumcenter(cdt.pts[T.v[0]], cdt.pts[T.v[1]], cdt.pts[T.v[2]]);
    std::pair<int, int> blocked{-1, -1};
    const int host = walk(t, cc, blocked);
    if (host < 0) {
      split_segment(blocked.first, blocked.second);
    } else {
      auto cav = cdt.cavity(cc, host, 0);
      std::pair<int, int> enc{-1, -1};
      for (auto [a, b] : cdt.boundary_segments(cav))
        if (encroached(a, b, cc)) {
          enc = {a, b};
          break;
        }
      if (enc.first >= 0) {
        split_segment(enc.first, enc.second);
      } else {
        cdt.commit(cc, cav, 0);
        after_insert();
      }
    }
    process_segments();
    if (cdt.tris[t].alive && is_bad(cdt.tris[t])) tri_queue.push_back(t);
  }

  // Extract the meshed part.
  Mesh2D mesh;
  mesh.rho_max = spec.rho_max;
  mesh.z_min = spec.z_min;
  mesh.z_max = spec.z_max;
  mesh.pml_thickness = spec.pml_thickness;
  mesh.ground = spec.ground;
  mesh.body_polygon = body_poly;
  std::vector<int> new_id(cdt.pts.size(), -1);
  for (const Tri& T : cdt.tris) {
    if (!T.alive || T.region == kOutside) continue;
    std::array<int, 3> v;
    for (int i = 0; i < 3; ++i) {
      int& id = new_id[T.v[i]];
      if (id < 0) {
        id = static_cast<int>(mesh.nodes.size());
        mesh.nodes.push_back(cdt.pts[T.v[i]]);
      }
      v[i] = id;
    }
    mesh.triangles.push_back(v);
    mesh.region.push_back(static_cast<Region>(T.region));
  }
  // Edges in first-seen order, oriented low -> high vertex id.
  std::unordered_map<std::uint64_t, int> eid;
  mesh.tri_edges.resize(mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (int k = 0; k < 3; ++k) {
      const int a = mesh.triangles[t][k], b = mesh.triangles[t][(k + 1) % 3];
      auto [it, fresh] = eid.emplace(edge_key(a, b), mesh.num_edges());
      if (fresh) {
        mesh.edges.push_back({std::min(a, b), std::max(a, b)});
        mesh.edge_tris.push_back({t, -1});
      } else {
        if (mesh.edge_tris[it->second][1] != -1) throw MeshError("edge shared by more than two triangles");
        mesh.edge_tris[it->second][1] = t;
      }
      mesh.tri_edges[t][k] = it->second;
    }
  }
  mesh.edge_tag.assign(mesh.edges.size(), BoundaryTag::None);
  for (int e = 0; e < mesh.num_edges(); ++e) {
    if (mesh.edge_tris[e][1] >= 0) continue;
    const Vec2& a = mesh.nodes[mesh.edges[e][0]];
    const Vec2& b = mesh.nodes[mesh.edges[e][1]];
    if (a.x() == 0.0 && b.x() == 0.0) mesh.edge_tag[e] = BoundaryTag::Axis;
    else if (spec.ground && a.y() == 0.0 && b.y() == 0.0) mesh.edge_tag[e] = BoundaryTag::Ground;
    else mesh.edge_tag[e] = BoundaryTag::PmlOuter;
  }
  if (mesh.num_nodes() - mesh.num_edges() + mesh.num_triangles() != 1)
    throw MeshError("triangulation is not simply connected (Euler check failed)");
  for (int t = 0; t < mesh.num_triangles(); ++t)
    if (!(mesh.signed_area(t) > 0.0)) throw MeshError("degenerate or inverted triangle");
  mesh.build_locator();
  return mesh;
}

// ---------------------------------------------------------------------------

std::array<int, 8> Mesh2D::element_edge_dofs(int t) const {
  const auto& te = tri_edges[t];
  return {edge_dof(te[0], 0), edge_dof(te[0], 1), edge_dof(te[1], 0), edge_dof(te[1], 1),
          edge_dof(te[2], 0), edge_dof(te[2], 1), interior_dof(t, 0), interior_dof(t, 1)};
}

std::array<int, 6> Mesh2D::element_nodal_dofs(int t) const {
  const auto& v = triangles[t];
  const auto& te = tri_edges[t];
  return {vertex_dof(v[0]), vertex_dof(v[1]), vertex_dof(v[2]),
          midpoint_dof(te[0]), midpoint_dof(te[1]), midpoint_dof(te[2])};
}

double Mesh2D::signed_area(int t) const {
  const auto& v = triangles[t];
  const Vec2 a = nodes[v[1]] - nodes[v[0]], b = nodes[v[2]] - nodes[v[0]];
  return 0.5 * (a.x() * b.y() - a.y() * b.x());
}

double Mesh2D::max_edge_length(int t) const {
  const auto& v = triangles[t];
  return std::max({(nodes[v[0]] - nodes[v[1]]).norm(), (nodes[v[1]] - nodes[v[2]]).norm(),
                   (nodes[v[2]] - nodes[v[0]]).norm()});
}

Vec2 Mesh2D::centroid(int t) const {
  const auto& v = triangles[t];
  return (nodes[v[0]] + nodes[v[1]] + nodes[v[2]]) / 3.0;
}

bool Mesh2D::in_pml(const Vec2& p) const {
  return p.x() > rho_max || p.y() > z_max || (!ground && p.y() < z_min);
}

void Mesh2D::build_locator() {
  if (nodes.empty()) return;
  double x0 = 1e300, x1 = -1e300, z0 = 1e300, z1 = -1e300;
  for (const auto& p : nodes) {
    x0 = std::min(x0, p.x());
    x1 = std::max(x1, p.x());
    z0 = std::min(z0, p.y());
    z1 = std::max(z1, p.y());
  }
  const int n = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(triangles.size()) / 2.0)));
  gnx_ = gnz_ = n;
  gx0_ = x0;
  gz0_ = z0;
  gdx_ = (x1 - x0) / n + 1e-15;
  gdz_ = (z1 - z0) / n + 1e-15;
  buckets_.assign(static_cast<std::size_t>(n) * n, {});
  for (int t = 0; t < num_triangles(); ++t) {
    double bx0 = 1e300, bx1 = -1e300, bz0 = 1e300, bz1 = -1e300;
    for (int v : triangles[t]) {
      bx0 = std::min(bx0, nodes[v].x());
      bx1 = std::max(bx1, nodes[v].x());
      bz0 = std::min(bz0, nodes[v].y());
      bz1 = std::max(bz1, nodes[v].y());
    }
    const int i0 = std::clamp(static_cast<int>((bx0 - gx0_) / gdx_), 0, n - 1);
    const int i1 = std::clamp(static_cast<int>((bx1 - gx0_) / gdx_), 0, n - 1);
    const int j0 = std::clamp(static_cast<int>((bz0 - gz0_) / gdz_), 0, n - 1);
    const int j1 = std::clamp(static_cast<int>((bz1 - gz0_) / gdz_), 0, n - 1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * n + i].push_back(t);
  }
}

std::array<double, 3> barycentric(const Mesh2D& mesh, int t, const Vec2& p) {
  const auto& v = mesh.triangles[t];
  const Vec2& a = mesh.nodes[v[0]];
  const Vec2& b = mesh.nodes[v[1]];
  const Vec2& c = mesh.nodes[v[2]];
  const double det = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
  const double l1 = ((p.x() - a.x()) * (c.y() - a.y()) - (p.y() - a.y()) * (c.x() - a.x())) / det;
  const double l2 = ((b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x())) / det;
  return {1.0 - l1 - l2, l1, l2};
}

int Mesh2D::locate(const Vec2& p, double tol) const {
  if (buckets_.empty()) return -1;
  const int i = static_cast<int>(std::floor((p.x() - gx0_) / gdx_));
  const int j = static_cast<int>(std::floor((p.y() - gz0_) / gdz_));
  if (i < -1 || j < -1 || i > gnx_ || j > gnz_) return -1;
  const int ic = std::clamp(i, 0, gnx_ - 1), jc = std::clamp(j, 0, gnz_ - 1);
  int best = -1;
  double best_min = -1e300;
  for (int t : buckets_[static_cast<std::size_t>(jc) * gnx_ + ic]) {
    const auto l = barycentric(*this, t, p);
    const double lo = std::min({l[0], l[1], l[2]});
    if (lo >= 0.0) return t;
    if (lo > best_min) best_min = lo, best = t;
  }
  return best_min >= -tol ? best : -1;
}

void Mesh2D::write(std::ostream& os) const {
  os.precision(17);
  os << "# borfem mesh v1\n";
  os << "nodes " << nodes.size() << "\n";
  for (const auto& p : nodes) os << p.x() << ' ' << p.y() << '\n';
  os << "triangles " << triangles.size() << "\n";
  for (int t = 0; t < num_triangles(); ++t)
    os << triangles[t][0] << ' ' << triangles[t][1] << ' ' << triangles[t][2] << ' '
       << to_string(region[t]) << '\n';
  int nb = 0;
  for (auto tag : edge_tag) nb += tag != BoundaryTag::None;
  os << "boundary_edges " << nb << "\n";
  for (int e = 0; e < num_edges(); ++e)
    if (edge_tag[e] != BoundaryTag::None)
      os << edges[e][0] << ' ' << edges[e][1] << ' ' << to_string(edge_tag[e]) << '\n';
  os << "dofs edge " << num_edge_dofs() << " nodal " << num_nodal_dofs() << "\n";
}

}  // namespace borfem
