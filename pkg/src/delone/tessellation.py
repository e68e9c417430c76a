"""Voronoi cells, Delaunay complexes, duality, and geometric realization.

Nets are separated/dense point sets in a compact region.  The Delaunay
complex is built by locality-pruned brute force: every (n+1)-subset of sites
pairwise within 2*d2 is tested for an empty circumscribed sphere of radius
at most d2.  Lower-dimensional simplices are the faces of the kept top
simplices, each inheriting a witness sphere.  Geometric realization is the
iterated geodesic-cone map in vertex-creation order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import circumsphere as cs
from .circumsphere import CircumSphere
from .errors import OutOfChartError

#: Relative tolerance for cell-membership and duality point location.
MEMBERSHIP_RTOL = 1e-9

#: Relative margin used by the empty-sphere filter during construction.
EMPTY_RTOL = 1e-12


@dataclass(frozen=True)
class Net:
    """A d1-separated point set that is d2-dense in its region."""

    dim: int
    points: np.ndarray  # (m, dim)
    d1: float
    d2: float
    region: object = None  # duck-typed: contains(p), boundary_distance(p), grid(h)

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))

    def __len__(self):
        return len(self.points)

    def check_separation(self) -> float:
        """Exact minimum pairwise distance (metric of the ambient chart)."""
        p = self.points
        if len(p) < 2:
            return np.inf
        d, _ = cKDTree(p).query(p, k=2)
        return float(np.min(d[:, 1]))

    def check_density(self, resolution: float) -> float:
        """Max distance from a region grid sample to the net."""
        if self.region is None:
            return 0.0
        grid = np.asarray(self.region.grid(resolution), dtype=float)
        if grid.size == 0:
            return 0.0
        d, _ = cKDTree(self.points).query(grid)
        return float(np.max(d))

    def interior_mask(self) -> np.ndarray:
        """Sites whose cell provably stays inside the region."""
        if self.region is None:
            return np.ones(len(self.points), dtype=bool)
        return np.array([
            self.region.boundary_distance(p) >= self.d2 for p in self.points
        ])


@dataclass(frozen=True)
class Simplex:
    """Ordered vertex tuple (net indices, creation order) plus a witness
    circumscribed sphere that is empty of other net points."""

    vertices: tuple
    sphere: CircumSphere

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1


@dataclass(frozen=True)
class DelaunayComplex:
    simplices_by_dim: dict  # k -> list[Simplex], sorted by vertex tuple
    regular: bool

    def top(self, n: int):
        return self.simplices_by_dim.get(n, [])

    def all_simplices(self):
        for k in sorted(self.simplices_by_dim):
            yield from self.simplices_by_dim[k]


@dataclass(frozen=True)
class VoronoiCell:
    site: int
    neighbor_sites: tuple
    halfspaces: tuple | None  # ((a, b), ...) meaning a.x <= b; None if curved
    boundary: bool
    _net: Net = field(repr=False, default=None)
    _metric: object = field(repr=False, default=None)

    def contains(self, q, rtol: float = MEMBERSHIP_RTOL) -> bool:
        """Membership consistent with nearest_site up to relative tolerance."""
        i, d = nearest_site(q, self._net, self._metric)
        if i == self.site:
            return True
        ds = self._metric.distance(q, self._net.points[self.site])
        return ds <= d + rtol * max(1.0, d)


def nearest_site(q, net: Net, metric):
    """(index, distance) of a nearest site; ties broken by lowest index."""
    if metric is None or getattr(metric, "kind", "flat") == "flat":
        d = np.linalg.norm(net.points - np.asarray(q, dtype=float), axis=1)
    else:
        d = np.array([metric.distance(q, p) for p in net.points])
    i = int(np.argmin(d))  # argmin returns the first (lowest-index) minimizer
    return i, float(d[i])


def voronoi_cell(net: Net, i: int, metric) -> VoronoiCell:
    """Cell of site i: neighbor list from the 4*d2 locality bound, plus a
    halfspace list in the flat metric (distance oracle otherwise)."""
    p = net.points
    site = p[i]
    flat = metric is None or metric.kind == "flat"
    if flat:
        d = np.linalg.norm(p - site, axis=1)
    else:
        d = np.array([metric.distance(site, q) for q in p])
    nbrs = tuple(j for j in np.nonzero(d <= 4.0 * net.d2)[0] if j != i)
    halfspaces = None
    if flat:
        hs = []
        for j in nbrs:
            a = p[j] - site
            b = 0.5 * (float(np.dot(p[j], p[j])) - float(np.dot(site, site)))
            hs.append((a, b))
        halfspaces = tuple(hs)
    boundary = not bool(net.interior_mask()[i])
    return VoronoiCell(site=i, neighbor_sites=nbrs, halfspaces=halfspaces,
                       boundary=boundary, _net=net, _metric=metric)


def _cell_vertices_flat(net: Net, i: int, rtol: float = MEMBERSHIP_RTOL):
    """Voronoi vertices of cell i in the flat metric: pairwise bisector
    intersections of neighbors, filtered by global nearest-distance."""
    p = net.points
    site = p[i]
    d = np.linalg.norm(p - site, axis=1)
    nbrs = [j for j in np.nonzero(d <= 4.0 * net.d2)[0] if j != i]
    verts = []
    for j, k in itertools.combinations(nbrs, 2):
        try:
            sphere = cs.circumcenter(np.vstack([site, p[j], p[k]])) \
                if net.dim == 2 else None
        except Exception:
            continue
        if net.dim == 2:
            v = sphere.center
        else:  # general dim: solve the bisector system of i vs (j, k, ...) not needed
            continue
        dv = np.linalg.norm(p - v, axis=1)
        if np.linalg.norm(v - site) <= np.min(dv) + rtol * max(1.0, np.min(dv)):
            verts.append(v)
    return verts


def star_neighborhood(net: Net, i: int) -> set:
    """Sites whose cells share a Voronoi vertex with cell i (the vertex set),
    including i itself; every member lies within 3*d2 of the site."""
    p = net.points
    out = {int(i)}
    rtol = MEMBERSHIP_RTOL
    if net.dim == 2:
        for v in _cell_vertices_flat(net, i):
            dv = np.linalg.norm(p - v, axis=1)
            dmin = float(np.min(dv))
            out.update(int(j) for j in np.nonzero(dv <= dmin + rtol * max(1.0, dmin))[0])
    else:
        # higher dimensions: vertex-sharing approximated by shared Delaunay
        # simplices over the local subcomplex
        local = build_delaunay(net, None)
        for s in local.top(net.dim):
            if i in s.vertices:
                out.update(int(v) for v in s.vertices)
    return out


def _local_subsets(points: np.ndarray, n: int, reach: float) -> np.ndarray:
    """Sorted (n+1)-tuples of indices pairwise within ``reach``, as an
    integer array of shape (M, n+1)."""
    tree = cKDTree(points)
    neigh = tree.query_ball_point(points, reach)
    chunks = []
    r2 = reach * reach
    for i, cand in enumerate(neigh):
        above = np.array(sorted(j for j in cand if j > i), dtype=np.int64)
        if len(above) < n:
            continue
        sub = points[above]
        diff = sub[:, None, :] - sub[None, :, :]
        close = np.einsum("abk,abk->ab", diff, diff) <= r2
        if n == 2:
            a, b = np.nonzero(np.triu(close, 1))
            if len(a):
                chunks.append(np.column_stack([
                    np.full(len(a), i, dtype=np.int64), above[a], above[b]]))
        else:
            rows = [
                (i, *(int(above[c]) for c in combo))
                for combo in itertools.combinations(range(len(above)), n)
                if all(close[a][b] for a, b in itertools.combinations(combo, 2))
            ]
            if rows:
                chunks.append(np.array(rows, dtype=np.int64))
    if not chunks:
        return np.zeros((0, n + 1), dtype=np.int64)
    return np.vstack(chunks)


def build_delaunay(net: Net, metric, tol_cocirc: float | None = None) -> DelaunayComplex:
    """Delaunay complex of a net: every (n+1)-subset of sites pairwise within
    2*d2 whose circumscribed sphere has radius <= d2 and is empty of other
    sites.  Faces of kept simplices are added with inherited witness spheres.
    """
    n = net.dim
    pts = net.points
    if metric is not None and metric.kind != "flat":
        return _build_delaunay_curved(net, metric, tol_cocirc)
    subsets = _local_subsets(pts, n, 2.0 * net.d2)
    kept = []
    if len(subsets):
        stacks = pts[subsets]
        centers, radii, valid = cs.circumcenter_batch(stacks)
        tree = cKDTree(pts)
        ok = valid & (radii <= net.d2)
        idx = np.nonzero(ok)[0]
        if idx.size:
            dmin, _ = tree.query(centers[idx])
            empty = dmin >= radii[idx] * (1.0 - EMPTY_RTOL)
            for j in idx[empty]:
                kept.append(Simplex(
                    vertices=tuple(int(v) for v in subsets[j]),
                    sphere=CircumSphere(center=centers[j], radius=float(radii[j])),
                ))
    kept.sort(key=lambda s: s.vertices)
    by_dim = {n: kept}
    # face closure: every face inherits the witness sphere of its first parent
    for k in range(n - 1, -1, -1):
        seen = {}
        for s in by_dim[k + 1]:
            for face in itertools.combinations(s.vertices, k + 1):
                if face not in seen:
                    seen[face] = s.sphere
        by_dim[k] = [Simplex(vertices=f, sphere=sph)
                     for f, sph in sorted(seen.items())]
    tol = tol_cocirc if tol_cocirc is not None else 1e-9
    complex_ = DelaunayComplex(simplices_by_dim=by_dim, regular=True)
    regular = check_regular(complex_, tol, net=net)
    return DelaunayComplex(simplices_by_dim=by_dim, regular=regular)


def _build_delaunay_curved(net: Net, metric, tol_cocirc):
    """Curved-metric construction in geodesic normal coordinates at each
    candidate's first vertex; distances for the emptiness test are metric."""
    from . import metrics as mt

    n = net.dim
    pts = [np.asarray(p, float) for p in net.points]
    m = len(pts)
    dmat = np.array([[metric.distance(pts[a], pts[b]) for b in range(m)]
                     for a in range(m)])
    kept = []
    for combo in itertools.combinations(range(m), n + 1):
        if any(dmat[a][b] > 2.0 * net.d2
               for a, b in itertools.combinations(combo, 2)):
            continue
        frame = mt.standard_frame(metric, pts[combo[0]])
        local = np.array([mt.log_frame(metric, frame, pts[v]) for v in combo])
        try:
            sph = cs.circumcenter(local)
        except Exception:
            continue
        center = mt.exp_frame(metric, frame, sph.center)
        radius = max(metric.distance(center, pts[v]) for v in combo)
        if radius > net.d2:
            continue
        others = [j for j in range(m) if j not in combo]
        if all(metric.distance(center, pts[j]) >= radius * (1.0 - EMPTY_RTOL)
               for j in others):
            kept.append(Simplex(vertices=combo,
                                sphere=CircumSphere(center=center, radius=radius)))
    kept.sort(key=lambda s: s.vertices)
    by_dim = {n: kept}
    for k in range(n - 1, -1, -1):
        seen = {}
        for s in by_dim[k + 1]:
            for face in itertools.combinations(s.vertices, k + 1):
                seen.setdefault(face, s.sphere)
        by_dim[k] = [Simplex(vertices=f, sphere=sph)
                     for f, sph in sorted(seen.items())]
    tol = tol_cocirc if tol_cocirc is not None else 1e-9
    complex_ = DelaunayComplex(simplices_by_dim=by_dim, regular=True)
    regular = check_regular(complex_, tol, net=net, metric=metric)
    return DelaunayComplex(simplices_by_dim=by_dim, regular=regular)


def check_regular(complex_: DelaunayComplex, tol: float, net: Net = None,
                  metric=None) -> bool:
    """False iff some top simplex's sphere carries an extra net point within
    tol*radius of its surface (an (n+2)-cospherical configuration)."""
    if net is None:
        return True
    n = max(complex_.simplices_by_dim) if complex_.simplices_by_dim else 0
    top = complex_.simplices_by_dim.get(n, [])
    if not top:
        return True
    pts = net.points
    if metric is None or metric.kind == "flat":
        # nearest non-vertex distance per sphere: the (n+2)-nd neighbor of
        # the center (the n+1 vertices sit at distance ~radius).  An extra
        # point within tol*radius of the surface satisfies d <= r (1 + tol);
        # points deeper inside are excluded by the emptiness of the sphere.
        centers = np.array([s.sphere.center for s in top])
        radii = np.array([s.sphere.radius for s in top])
        k = min(n + 2, len(pts))
        d, _ = cKDTree(pts).query(centers, k=k)
        d = np.atleast_2d(d)
        if k < n + 2:
            return True
        return not bool(np.any(d[:, n + 1] <= radii * (1.0 + tol)))
    for s in top:
        r = s.sphere.radius
        d = np.array([metric.distance(s.sphere.center, p) for p in pts])
        on = np.abs(d - r) <= tol * r
        on[list(s.vertices)] = False
        if np.any(on):
            return False
    return True


@dataclass(frozen=True)
class DualityReport:
    violations: tuple
    checked: int

    @property
    def ok(self) -> bool:
        return not self.violations


def check_duality(net: Net, complex_: DelaunayComplex, metric=None,
                  rtol: float = MEMBERSHIP_RTOL) -> DualityReport:
    """Both directions of Voronoi/Delaunay duality on interior sites.

    Forward: the circumcenter of every kept top simplex (all vertices
    interior) lies in each incident Voronoi cell.  Backward: every local
    (n+1)-subset of interior sites whose circumcenter lies strictly inside
    all its cells appears as a kept simplex.
    """
    n = net.dim
    pts = net.points
    interior = net.interior_mask()
    violations = []
    checked = 0
    kept = {s.vertices for s in complex_.top(n)}

    def near_dist(q):
        if metric is None or metric.kind == "flat":
            d = np.linalg.norm(pts - q, axis=1)
        else:
            d = np.array([metric.distance(q, p) for p in pts])
        return d

    for s in complex_.top(n):
        if not all(interior[v] for v in s.vertices):
            continue
        checked += 1
        d = near_dist(s.sphere.center)
        dmin = float(np.min(d))
        for v in s.vertices:
            if d[v] > dmin + rtol * max(1.0, dmin):
                violations.append(("center_outside_cell", s.vertices, int(v)))
                break

    for row in _local_subsets(pts, n, 2.0 * net.d2):
        combo = tuple(int(v) for v in row)
        if not all(interior[v] for v in combo):
            continue
        if combo in kept:
            continue
        try:
            sph = cs.circumcenter(pts[list(combo)])
        except Exception:
            continue
        if sph.radius > net.d2:
            continue
        checked += 1
        d = near_dist(sph.center)
        dmin = float(np.min(d))
        # strictly inside all n+1 cells => the simplex had an empty sphere
        if all(d[v] <= dmin + rtol * max(1.0, dmin) for v in combo) and \
                dmin >= sph.radius * (1.0 - rtol):
            violations.append(("missing_simplex", combo, None))
    return DualityReport(violations=tuple(violations), checked=checked)


def simplicial_cone(complex_: DelaunayComplex, i: int):
    """All top simplices containing site i."""
    n = max(complex_.simplices_by_dim) if complex_.simplices_by_dim else 0
    return [s for s in complex_.top(n) if i in s.vertices]


def barycentric_coordinates(simplex_pts: np.ndarray, q) -> np.ndarray:
    """Barycentric coordinates of q w.r.t. an n-simplex in R^n."""
    p = np.asarray(simplex_pts, dtype=float)
    a = (p[:-1] - p[-1]).T
    lam = np.linalg.solve(a, np.asarray(q, dtype=float) - p[-1])
    return np.append(lam, 1.0 - float(np.sum(lam)))


def check_filling(net: Net, complex_: DelaunayComplex, i: int,
                  samples: int = 200, rng=None, rtol: float = 1e-9) -> bool:
    """Sample the Voronoi cell of site i and verify every sample lies in a
    realized simplex of its simplicial cone."""
    rng = np.random.default_rng(0) if rng is None else rng
    cone = simplicial_cone(complex_, i)
    if not cone:
        return False
    pts = net.points
    site = pts[i]
    got = 0
    tries = 0
    while got < samples and tries < 100 * samples:
        tries += 1
        q = site + rng.uniform(-net.d2, net.d2, size=net.dim)
        j, _ = nearest_site(q, net, None)
        if j != i:
            continue
        got += 1
        inside = False
        for s in cone:
            bary = barycentric_coordinates(pts[list(s.vertices)], q)
            if np.all(bary >= -rtol):
                inside = True
                break
        if not inside:
            return False
    return True


def realize_simplex(s: Simplex, metric, bary, vertex_points) -> np.ndarray:
    """Iterated geodesic-cone realization at barycentric coordinates.

    vertex_points are the vertex positions in creation order (matching
    s.vertices).  In the flat metric this is the affine combination; in
    curved metrics the cone is built by successive geodesics, so the
    restriction to a boundary face is the face's own realization.
    """
    b = np.asarray(bary, dtype=float)
    v = [np.asarray(p, dtype=float) for p in vertex_points]
    if len(b) != len(v):
        raise ValueError("barycentric length must match the vertex count")
    if np.any(b < -1e-12) or abs(float(np.sum(b)) - 1.0) > 1e-9:
        raise ValueError("barycentric coordinates must be a convex combination")

    def cone(weights, verts):
        if len(verts) == 1:
            return verts[0]
        wk = float(weights[-1])
        if wk >= 1.0 - 1e-15:
            return verts[-1]
        prefix = weights[:-1] / (1.0 - wk)
        base = cone(prefix, verts[:-1])
        if metric is None or metric.kind == "flat":
            return (1.0 - wk) * base + wk * verts[-1]
        try:
            return metric.exp(base, wk * metric.log(base, verts[-1]))
        except OutOfChartError:
            raise
    return cone(b, v)
