"""Inductive net synthesis with annulus/slab exclusion, family-stability
certification, and the product-structure builder.

The synthesizer grows a point set inside a compact region: each step picks a
candidate ball whose center sits in the annular band between the d1''- and
d2''-penumbras of the current net, excludes thin forbidden regions inside
that ball (annular neighborhoods of circumscribed circles of local simplices
and thickenings of local affine patches), and selects a point in the
remainder.  The excluded widths guarantee empty-sphere clearance and
properly-ordered robustness for every simplex of the final net.

Stability of the resulting Delaunay complex is then certified over a finite
family of near-isometric translations: per-parameter the complex must be
combinatorially identical with small circumcenter/radius drifts.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import circumsphere as cs
from . import robustness
from . import tessellation as tess
from .errors import (
    CoverageGapError,
    RegionExhaustedError,
    SelectionFailedError,
    ValidationError,
)

#: Forbidden-volume fraction audited every this many synthesis steps.
VOLUME_AUDIT_STRIDE = 64

#: Rejection-sampling attempts before the fallback grid scan.
MAX_REJECTIONS = 10_000


@dataclass(frozen=True)
class Region:
    """Compact box or disk in leaf coordinates."""

    kind: str  # "box" | "disk"
    bounds: tuple  # box: (lo, hi); disk: (center, radius)

    def __post_init__(self):
        if self.kind not in ("box", "disk"):
            raise ValidationError(f"unknown region kind {self.kind!r}", path="region.kind")
        a, b = self.bounds
        object.__setattr__(self, "bounds",
                           (np.asarray(a, dtype=float) if self.kind == "box"
                            else np.asarray(a, dtype=float),
                            np.asarray(b, dtype=float) if self.kind == "box"
                            else float(b)))

    @property
    def dim(self) -> int:
        return len(self.bounds[0])

    @staticmethod
    def box(lo, hi) -> "Region":
        return Region(kind="box", bounds=(lo, hi))

    @staticmethod
    def disk(center, radius: float) -> "Region":
        return Region(kind="disk", bounds=(center, radius))

    def contains(self, p) -> bool:
        return self.boundary_distance(p) >= 0.0

    def boundary_distance(self, p) -> float:
        """Signed inward distance to the boundary (negative outside)."""
        p = np.asarray(p, dtype=float)
        if self.kind == "box":
            lo, hi = self.bounds
            return float(min(np.min(p - lo), np.min(hi - p)))
        c, r = self.bounds
        return float(r - np.linalg.norm(p - c))

    def boundary_distance_many(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.kind == "box":
            lo, hi = self.bounds
            return np.minimum(np.min(pts - lo, axis=-1), np.min(hi - pts, axis=-1))
        c, r = self.bounds
        return r - np.linalg.norm(pts - c, axis=-1)

    def expand(self, margin: float) -> "Region":
        if self.kind == "box":
            lo, hi = self.bounds
            return Region.box(lo - margin, hi + margin)
        c, r = self.bounds
        return Region.disk(c, r + margin)

    def bounding_box(self):
        if self.kind == "box":
            return self.bounds
        c, r = self.bounds
        return c - r, c + r

    def grid(self, h: float) -> np.ndarray:
        """Regular sample grid of the region at spacing h (anchored at the
        bounding-box corner)."""
        lo, hi = self.bounding_box()
        axes = [np.arange(l, u + h / 2, h) for l, u in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([a.ravel() for a in mesh], axis=-1)
        if self.kind == "disk":
            pts = pts[self.boundary_distance_many(pts) >= 0.0]
        return pts

    def volume(self) -> float:
        if self.kind == "box":
            lo, hi = self.bounds
            return float(np.prod(hi - lo))
        c, r = self.bounds
        n = len(c)
        return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0) * r**n

    def to_dict(self) -> dict:
        a, b = self.bounds
        if self.kind == "box":
            return {"kind": "box", "bounds": [list(a), list(b)]}
        return {"kind": "disk", "bounds": [list(a), b]}


@dataclass(frozen=True)
class PartialTransversal:
    """Ordered base-leaf points (creation order) with their chart indices."""

    xi: tuple  # ordered points
    theta: tuple  # chart index per point
    complete: bool


# ---------------------------------------------------------------------------
# parameter families


@dataclass(frozen=True)
class ParamFamily:
    """Finite stand-in for a Cantor parameter set: depth-k binary strings
    with the 2^(-common-prefix) ultrametric, each carrying a smooth
    displacement field of sup-norm <= eps (the all-zeros string is the
    identity).  Optional per-(param, transversal-index) overrides support
    adversarial tests."""

    depth: int
    dim: int
    eps: float  # displacement sup-norm (eps0 * rF)
    scale: float  # working length scale (rF)
    seed: int = 0
    overrides: tuple = ()  # ((param, index, vector), ...)

    @property
    def params(self) -> tuple:
        return tuple("".join(bits) for bits in
                     itertools.product("01", repeat=self.depth))

    def param_distance(self, p: str, q: str) -> float:
        if p == q:
            return 0.0
        k = 0
        while k < self.depth and p[k] == q[k]:
            k += 1
        return 2.0 ** (-k)

    def _coeffs(self, param: str):
        m = int(param, 2) / max(1, 2**self.depth - 1)
        # deterministic per-param field rotation
        rng = np.random.default_rng(self.seed ^ (0x9E3779B9 + int(param, 2)))
        alpha = rng.uniform(0.0, 2.0 * math.pi)
        return m, alpha

    def displacement(self, param: str, y) -> np.ndarray:
        """Smooth displacement field of param at point y (sup-norm <= eps;
        spatial Lipschitz constant ~ 0.05*eps/scale, so every transport map
        is an eps-isometry on the working region)."""
        y = np.asarray(y, dtype=float)
        m, alpha = self._coeffs(param)
        phase = alpha + 0.03 * float(np.sum(y)) / self.scale
        d = np.zeros(self.dim)
        d[0] = math.cos(phase)
        d[1 % self.dim] = math.sin(phase) if self.dim > 1 else d[1 % self.dim]
        return m * self.eps * d

    def displacement_batch(self, param: str, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        m, alpha = self._coeffs(param)
        phase = alpha + 0.03 * np.sum(pts, axis=1) / self.scale
        out = np.zeros_like(pts)
        out[:, 0] = np.cos(phase)
        if self.dim > 1:
            out[:, 1] = np.sin(phase)
        return m * self.eps * out

    def transport(self, param: str, y) -> np.ndarray:
        return np.asarray(y, dtype=float) + self.displacement(param, y)

    def indexed_displacements(self, param: str, net_points) -> np.ndarray:
        """Per-transversal-index displacement table, overrides applied."""
        disp = self.displacement_batch(param, net_points)
        for p, idx, vec in self.overrides:
            if p == param:
                disp[idx] = np.asarray(vec, dtype=float)
        return disp

    def with_override(self, param: str, index: int, vector) -> "ParamFamily":
        return ParamFamily(depth=self.depth, dim=self.dim, eps=self.eps,
                           scale=self.scale, seed=self.seed,
                           overrides=self.overrides + ((param, int(index), tuple(float(x) for x in vector)),))

    def to_dict(self, net_points=None) -> dict:
        d = {"v": 1, "depth": self.depth, "dim": self.dim, "eps": self.eps,
             "scale": self.scale, "seed": self.seed,
             "params": list(self.params),
             "overrides": [[p, i, list(v)] for p, i, v in self.overrides]}
        if net_points is not None:
            d["fields"] = {p: [list(row) for row in
                               self.indexed_displacements(p, net_points)]
                           for p in self.params}
        return d


def make_family(bundle, depth: int, dim: int = 2, seed: int = 0) -> ParamFamily:
    """Family of 2^depth smooth displacement fields with sup-norm eps0*rF."""
    return ParamFamily(depth=depth, dim=dim, eps=bundle.eps0 * bundle.rF,
                       scale=bundle.rF, seed=seed)


# ---------------------------------------------------------------------------
# forbidden regions


@dataclass(frozen=True)
class Annuli:
    """Annular neighborhoods (width 2*eps1*rF) of circumscribed circles of
    the local n-simplices; only those reaching the selection ball are kept
    explicitly."""

    centers: np.ndarray  # (k, n) circles that can intersect the ball
    radii: np.ndarray  # (k,)
    width: float
    count_total: int  # all nondegenerate local n-simplices


@dataclass(frozen=True)
class Slabs:
    """Thickenings (half-width 2*eps2*rF) of affine patches spanned by <= n
    local points; pair patches kept explicitly when their line reaches the
    selection ball."""

    anchors: np.ndarray  # (m, n) point on each kept line
    directions: np.ndarray  # (m, n) unit directions
    point_patches: np.ndarray  # (q, n) kept singleton patches
    width: float
    count_total: int  # all <= n-subsets of the local set


_COMBO_CACHE: dict = {}


def _combo_blocks(k: int, cap: int) -> np.ndarray:
    """Combinations of range(cap) choose k, sorted by largest element: the
    first C(s, k) rows are exactly the combinations of range(s) for s <= cap."""
    if k == 1:
        return np.arange(cap, dtype=np.int64).reshape(-1, 1)
    blocks = []
    for m in range(k - 1, cap):
        lower = _combo_indices(m, k - 1)
        blocks.append(np.column_stack(
            [lower, np.full(len(lower), m, dtype=np.int64)]))
    if not blocks:
        return np.zeros((0, k), dtype=np.int64)
    return np.concatenate(blocks, axis=0)


def _combo_indices(s: int, k: int) -> np.ndarray:
    cap, arr = _COMBO_CACHE.get(k, (0, None))
    if s > cap:
        cap = s + 32
        arr = _combo_blocks(k, cap)
        _COMBO_CACHE[k] = (cap, arr)
    return arr[:math.comb(s, k)]


_TRIPLE_CACHE: dict = {"cap": 0, "pack": None}


def _triple_pack(s: int):
    """Triple indices plus indices of their three pairs (ab, ac, bc) into the
    max-sorted pair array of _combo_indices(s, 2): pair (i, j) sits at
    C(j, 2) + i, which is independent of s, so prefix slices stay valid."""
    if s > _TRIPLE_CACHE["cap"]:
        cap = s + 32
        tri = _combo_indices(cap, 3)
        t0, t1, t2 = tri[:, 0], tri[:, 1], tri[:, 2]
        _TRIPLE_CACHE["cap"] = cap
        _TRIPLE_CACHE["pack"] = (tri,
                                 t1 * (t1 - 1) // 2 + t0,
                                 t2 * (t2 - 1) // 2 + t0,
                                 t2 * (t2 - 1) // 2 + t1)
    tri, iab, iac, ibc = _TRIPLE_CACHE["pack"]
    m = math.comb(s, 3)
    return tri[:m], iab[:m], iac[:m], ibc[:m]


def _circumcircles_2d(a, b, c):
    """Vectorized circumcircles of 2D triples; degenerate rows flagged."""
    ax, ay = a[:, 0], a[:, 1]
    bx, by = b[:, 0], b[:, 1]
    cx, cy = c[:, 0], c[:, 1]
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    scale = np.maximum(
        np.maximum(np.hypot(bx - ax, by - ay), np.hypot(cx - ax, cy - ay)),
        1e-300)
    valid = np.abs(d) > 2e-12 * scale**2
    dsafe = np.where(valid, d, 1.0)
    na = ax * ax + ay * ay
    nb = bx * bx + by * by
    nc = cx * cx + cy * cy
    ux = (na * (by - cy) + nb * (cy - ay) + nc * (ay - by)) / dsafe
    uy = (na * (cx - bx) + nb * (ax - cx) + nc * (bx - ax)) / dsafe
    r = np.hypot(ux - ax, uy - ay)
    return np.stack([ux, uy], axis=1), r, valid


def forbidden_regions(net_points, xi_prime, bundle):
    """(annuli, slabs) for the selection ball B(xi_prime, rF/200), built from
    the local set Omega = net cap D(xi_prime, 4*d2)."""
    xi = np.asarray(xi_prime, dtype=float)
    pts = np.asarray(net_points, dtype=float)
    n = len(xi)
    rF = bundle.rF
    ball_r = rF / 200.0
    w_ann = 2.0 * bundle.eps1 * rF
    w_slab = 2.0 * bundle.eps2 * rF
    if len(pts):
        omega = pts[np.linalg.norm(pts - xi, axis=1) <= 4.0 * bundle.d2]
    else:
        omega = pts.reshape(0, n)
    s = len(omega)
    if s == 0:
        return (Annuli(np.zeros((0, n)), np.zeros(0), w_ann, 0),
                Slabs(np.zeros((0, n)), np.zeros((0, n)), np.zeros((0, n)),
                      w_slab, 0))
    if n != 2:
        raise ValidationError("synthesis is implemented for dim 2")

    # annuli: circumscribed circles of all local triples.  The exact solve is
    # only run on triples whose circle can reach the selection ball; those
    # are prefiltered via the point-power identity
    #   det[(p_i - xi | |p_i - xi|^2)] = -2 S (d^2 - r^2),
    # which bounds the distance from xi to the circle using nothing but
    # pairwise cross products and squared edge lengths.
    count_ann = 0
    keep_c = np.zeros((0, n))
    keep_r = np.zeros(0)
    q = omega - xi
    sq = np.einsum("ij,ij->i", q, q)
    pr = _combo_indices(s, 2)
    qa, qb = q[pr[:, 0]], q[pr[:, 1]]
    dvec = qb - qa
    l2p = np.einsum("ij,ij->i", dvec, dvec)
    # cross(a - xi, b - xi) doubles as 2 * signed_area(xi, a, b), i.e. the
    # perpendicular distance from xi to line(a, b) times |b - a|
    crossp = qa[:, 0] * qb[:, 1] - qa[:, 1] * qb[:, 0]
    if s >= 3:
        tri, iab, iac, ibc = _triple_pack(s)
        # the prefilter runs in float32; the threshold carries an additive
        # slack far above float32 roundoff for these magnitudes (edges
        # <= 8 d2, squared norms <= (4 d2)^2), so no true candidate is lost
        # and the exact second stage makes the result identical to a full
        # float64 scan
        sq32 = sq.astype(np.float32)
        x32 = crossp.astype(np.float32)
        l32 = l2p.astype(np.float32)
        xab, xac, xbc = x32[iab], x32[iac], x32[ibc]
        l2ab, l2ac, l2bc = l32[iab], l32[iac], l32[ibc]
        det = sq32[tri[:, 0]] * xbc - sq32[tri[:, 1]] * xac \
            + sq32[tri[:, 2]] * xab
        two_s = np.abs(xbc - xac + xab)
        maxl2 = np.maximum(np.maximum(l2ab, l2ac), l2bc)
        nondeg = two_s > 1e-12 * maxl2
        count_ann = int(np.sum(nondeg))
        rho = np.float32(ball_r + w_ann)
        # |det| = 2|S|(d + r)|d - r| and 4|S| r = |ab||ac||bc|, so every
        # triple with |d - r| <= rho satisfies the kept inequality
        thr = rho * np.sqrt(l2ab * l2ac * l2bc) + rho * rho * two_s \
            + np.float32(1e-5 * (4.0 * bundle.d2) ** 4)
        cand = nondeg & (np.abs(det) <= thr)
        if np.any(cand):
            t = tri[cand]
            centers, radii, valid = _circumcircles_2d(
                omega[t[:, 0]], omega[t[:, 1]], omega[t[:, 2]])
            reach = np.abs(np.linalg.norm(centers - xi, axis=1) - radii) \
                <= ball_r + w_ann
            sel = valid & reach
            keep_c, keep_r = centers[sel], radii[sel]
    annuli = Annuli(centers=keep_c, radii=keep_r, width=w_ann,
                    count_total=count_ann)

    # slabs: lines through local pairs plus singleton patches
    count_slab = s  # singleton patches
    anchors = np.zeros((0, n))
    dirs = np.zeros((0, n))
    if s >= 2:
        dlen = np.sqrt(l2p)
        ok = dlen > 0
        count_slab += int(np.sum(ok))
        sel = ok & (np.abs(crossp) <= (ball_r + w_slab) * dlen)
        anchors = omega[pr[sel, 0]]
        dirs = dvec[sel] / dlen[sel][:, None]
    near_pts = omega[sq <= (ball_r + w_slab) ** 2]
    slabs = Slabs(anchors=anchors, directions=dirs, point_patches=near_pts,
                  width=w_slab, count_total=count_slab)
    return annuli, slabs


def _allowed(p, xi, ball_r, annuli: Annuli, slabs: Slabs) -> bool:
    if np.linalg.norm(p - xi) > ball_r:
        return False
    if len(annuli.radii):
        d = np.linalg.norm(annuli.centers - p, axis=1)
        if np.any(np.abs(d - annuli.radii) <= annuli.width):
            return False
    if len(slabs.directions):
        rel = p - slabs.anchors
        perp = np.abs(rel[:, 0] * slabs.directions[:, 1]
                      - rel[:, 1] * slabs.directions[:, 0])
        if np.any(perp <= slabs.width):
            return False
    if len(slabs.point_patches):
        if np.any(np.linalg.norm(slabs.point_patches - p, axis=1) <= slabs.width):
            return False
    return True


def excluded_volume_fraction(xi_prime, ball_r, annuli: Annuli, slabs: Slabs,
                             samples: int = 512, rng=None) -> float:
    """Monte-Carlo fraction of the selection ball covered by the forbidden
    regions (must stay below 1/2)."""
    rng = np.random.default_rng(0) if rng is None else rng
    xi = np.asarray(xi_prime, dtype=float)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=samples)
    r = ball_r * np.sqrt(rng.uniform(size=samples))
    pts = xi + np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    hit = np.zeros(samples, dtype=bool)
    if len(annuli.radii):
        d = np.linalg.norm(pts[:, None, :] - annuli.centers[None, :, :], axis=2)
        hit |= np.any(np.abs(d - annuli.radii) <= annuli.width, axis=1)
    if len(slabs.directions):
        rel = pts[:, None, :] - slabs.anchors[None, :, :]
        perp = np.abs(rel[:, :, 0] * slabs.directions[None, :, 1]
                      - rel[:, :, 1] * slabs.directions[None, :, 0])
        hit |= np.any(perp <= slabs.width, axis=1)
    if len(slabs.point_patches):
        d = np.linalg.norm(pts[:, None, :] - slabs.point_patches[None, :, :],
                           axis=2)
        hit |= np.any(d <= slabs.width, axis=1)
    return int(np.sum(hit)) / samples


def select_point(xi_prime, forbidden, rng, ball_r: float):
    """Uniform rejection sample in the selection ball avoiding every
    forbidden region; falls back to a grid scan after MAX_REJECTIONS."""
    annuli, slabs = forbidden
    xi = np.asarray(xi_prime, dtype=float)
    for _ in range(MAX_REJECTIONS):
        theta = rng.uniform(0.0, 2.0 * math.pi)
        r = ball_r * math.sqrt(rng.uniform())
        p = xi + np.array([r * math.cos(theta), r * math.sin(theta)])
        if _allowed(p, xi, ball_r * (1 + 1e-12), annuli, slabs):
            return p
    h = ball_r / 50.0
    for i in np.arange(-ball_r, ball_r + h / 2, h):
        for j in np.arange(-ball_r, ball_r + h / 2, h):
            p = xi + np.array([i, j])
            if _allowed(p, xi, ball_r, annuli, slabs):
                return p
    raise SelectionFailedError("selection ball exhausted despite volume audit")


# ---------------------------------------------------------------------------
# the synthesizer


class _Buckets:
    """Uniform spatial hash over the growing net for local queries."""

    def __init__(self, cell: float, dim: int = 2):
        self.cell = cell
        self.map: dict = {}
        self.count = 0
        self.arr = np.zeros((256, dim))

    def add(self, p):
        key = (int(math.floor(p[0] / self.cell)),
               int(math.floor(p[1] / self.cell)))
        self.map.setdefault(key, []).append(self.count)
        if self.count == len(self.arr):
            self.arr = np.concatenate([self.arr, np.zeros_like(self.arr)])
        self.arr[self.count] = p
        self.count += 1

    def near(self, q, radius: float) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        reach = int(math.ceil(radius / self.cell))
        bi = int(math.floor(q[0] / self.cell))
        bj = int(math.floor(q[1] / self.cell))
        idx: list = []
        for di in range(-reach, reach + 1):
            for dj in range(-reach, reach + 1):
                idx.extend(self.map.get((bi + di, bj + dj), ()))
        if not idx:
            return np.zeros((0, len(q)))
        cand = self.arr[idx]
        d = cand - q
        return cand[np.einsum("ij,ij->i", d, d) <= radius * radius]


def propose_candidate(K: Region, net_points, bundle, resolution: float | None = None):
    """First grid point xi' (row-major) with B(xi', rF/200) inside K and in
    the band between the d1''- and d2''-penumbras of the net.

    Raises RegionExhausted when the net is d2''-complete on the grid.
    """
    rF = bundle.rF
    ball_r = rF / 200.0
    h = resolution if resolution is not None else rF / 400.0
    pts = np.asarray(net_points, dtype=float)
    grid = K.grid(h)
    clear = K.boundary_distance_many(grid) >= ball_r
    grid = grid[clear]
    if len(pts) == 0:
        if not len(grid):
            raise RegionExhaustedError("region has no interior at this scale")
        return grid[0]
    d, _ = cKDTree(pts).query(grid)
    band = (d >= bundle.d1pp + ball_r) & (d <= bundle.d2pp - ball_r)
    idx = np.nonzero(band)[0]
    if not len(idx):
        raise RegionExhaustedError("net is d2''-complete")
    return grid[idx[0]]


@dataclass
class SynthesisReport:
    steps: int = 0
    max_excluded_fraction: float = 0.0
    audits: int = 0


def synthesize_net(K: Region, bundle, seed: int = 0):
    """Grow a net until the region (plus a 2*d2 collar, so every point of K
    is covered by cells of interior sites) is d2''-complete.

    Returns (Net, PartialTransversal, SynthesisReport).  Deterministic for a
    fixed (K, bundle, seed).
    """
    if K.dim != 2:
        raise ValidationError("synthesis is implemented for dim 2")
    rF = bundle.rF
    ball_r = rF / 200.0
    band_lo = bundle.d1pp + ball_r
    band_hi = bundle.d2pp - ball_r
    domain = K.expand(2.0 * bundle.d2)
    lo, hi = domain.bounding_box()
    h = rF / 200.0
    nx, ny = (int(math.floor((hi[k] - lo[k]) / h)) + 1 for k in range(2))
    xs = lo[0] + np.arange(nx) * h
    ys = lo[1] + np.arange(ny) * h
    # node clearance: the selection ball must fit inside the domain
    clear = (domain.boundary_distance_many(
        np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2))
        >= ball_r).reshape(nx, ny)
    # squared nearest-net-point distances; band tests compare against the
    # squared band bounds, which is order-equivalent
    dist2 = np.full((nx, ny), np.inf)
    bl2, bh2 = band_lo * band_lo, band_hi * band_hi
    rng = np.random.default_rng(seed)
    buckets = _Buckets(cell=4.0 * bundle.d2)
    heap: list = []
    points: list = []
    report = SynthesisReport()

    def add_point(z):
        points.append(z)
        buckets.add(z)
        i0 = max(0, int(math.ceil((z[0] - band_hi - lo[0]) / h)))
        i1 = min(nx - 1, int(math.floor((z[0] + band_hi - lo[0]) / h)))
        j0 = max(0, int(math.ceil((z[1] - band_hi - lo[1]) / h)))
        j1 = min(ny - 1, int(math.floor((z[1] + band_hi - lo[1]) / h)))
        if i0 > i1 or j0 > j1:
            return
        gx = xs[i0:i1 + 1][:, None] - z[0]
        gy = ys[j0:j1 + 1][None, :] - z[1]
        dd = gx * gx + gy * gy
        sub = dist2[i0:i1 + 1, j0:j1 + 1]
        # a node is pushed exactly once: when its distance first drops to
        # band_hi or below (sub > band_hi rules out already-pushed nodes)
        entering = (sub > bh2) & (dd >= bl2) & (dd <= bh2) \
            & clear[i0:i1 + 1, j0:j1 + 1]
        np.minimum(sub, dd, out=sub)
        a, b = np.nonzero(entering)
        for key in ((i0 + a) * ny + (j0 + b)).tolist():
            heapq.heappush(heap, key)

    def step(xi):
        forb = forbidden_regions(
            buckets.near(xi, 4.0 * bundle.d2), xi, bundle)
        report.steps += 1
        if report.steps % VOLUME_AUDIT_STRIDE == 1:
            frac = excluded_volume_fraction(xi, ball_r, *forb, samples=256,
                                            rng=np.random.default_rng(seed ^ report.steps))
            report.audits += 1
            report.max_excluded_fraction = max(report.max_excluded_fraction, frac)
            if frac >= 0.5:
                raise SelectionFailedError(
                    f"excluded volume fraction {frac:.3f} >= 1/2")
        z = select_point(xi, forb, rng, ball_r)
        add_point(z)

    # seed point: grid node nearest the domain center (deterministic)
    center = 0.5 * (lo + hi)
    ci = int(np.clip(round((center[0] - lo[0]) / h), 0, nx - 1))
    cj = int(np.clip(round((center[1] - lo[1]) / h), 0, ny - 1))
    if not clear[ci, cj]:
        raise RegionExhaustedError("domain has no interior at this scale")
    step(np.array([xs[ci], ys[cj]]))

    # The stored dist of a node is exact whenever it is <= band_hi: every net
    # point within band_hi of the node has run an update window covering it.
    # So band membership can be validated straight from the array.
    flat = dist2.ravel()
    while heap:
        key = heapq.heappop(heap)
        if bl2 <= flat[key] <= bh2:
            step(np.array([xs[key // ny], ys[key % ny]]))

    pts = np.array(points)
    net = tess.Net(dim=2, points=pts, d1=bundle.d1, d2=bundle.d2, region=domain)
    transversal = PartialTransversal(xi=tuple(map(tuple, pts)),
                                     theta=(0,) * len(pts), complete=True)
    return net, transversal, report


def translate_net(net: tess.Net, param: str, family: ParamFamily) -> tess.Net:
    """Apply the parameter's displacement field per transversal index."""
    disp = family.indexed_displacements(param, net.points)
    return tess.Net(dim=net.dim, points=net.points + disp,
                    d1=net.d1, d2=net.d2, region=net.region)


# ---------------------------------------------------------------------------
# stability certification


@dataclass(frozen=True)
class StabilityCertificate:
    ok: bool
    worst: dict
    per_simplex: tuple
    params_checked: tuple

    def to_dict(self) -> dict:
        return {"v": 1, "pass": self.ok, "worst": self.worst,
                "params": list(self.params_checked),
                "per_simplex": [dict(d) for d in self.per_simplex]}


def _robustness_2d(stacks: np.ndarray) -> np.ndarray:
    """Properly-ordered robustness of (m, 3, 2) vertex stacks: min of
    d(v1, v0) and dist(v2, line(v0, v1))."""
    a, b, c = stacks[:, 0], stacks[:, 1], stacks[:, 2]
    ab = b - a
    lab = np.linalg.norm(ab, axis=1)
    cr = np.abs((c - a)[:, 0] * ab[:, 1] - (c - a)[:, 1] * ab[:, 0])
    h = np.where(lab > 0, cr / np.maximum(lab, 1e-300), 0.0)
    return np.minimum(lab, h)


def _clearances(points: np.ndarray, stacks, centers, radii) -> np.ndarray:
    """min over non-vertex net points of d(center, y) - radius, per simplex."""
    n1 = stacks.shape[1]
    k = n1 + 1
    tree = cKDTree(points)
    d, _ = tree.query(centers, k=k)
    # the n+1 vertices sit at distance ~radius; the (n+2)-nd neighbor is the
    # nearest non-vertex point
    return d[:, -1] - radii


def certify_family_stability(net: tess.Net, complex_: tess.DelaunayComplex,
                             family: ParamFamily, bundle) -> StabilityCertificate:
    """Certify that the complex survives every parameter of the family:
    per-translate the top simplices keep robustness, their circumcenters and
    radii drift within (eps3 rF/2, eps3 rF), their spheres stay empty with
    eps1 rF clearance, and the rebuilt complex is combinatorially identical.
    """
    n = net.dim
    rF = bundle.rF
    rho_floor = 1.5 * bundle.eps2 * rF
    clear_base = 2.0 * bundle.eps1 * rF
    clear_trans = bundle.eps1 * rF
    drift_c_max = bundle.eps3 * rF / 2.0
    drift_r_max = bundle.eps3 * rF

    top = complex_.top(n)
    verts = np.array([s.vertices for s in top], dtype=np.int64)
    base_pts = net.points
    stacks = base_pts[verts]
    centers = np.array([s.sphere.center for s in top])
    radii = np.array([s.sphere.radius for s in top])

    worst = {"quantity": None, "simplex": None, "param": None, "margin": math.inf}
    records = [{"simplex": tuple(int(v) for v in s.vertices)} for s in top]

    def note(quantity, margin, sidx, param):
        if margin < worst["margin"]:
            worst.update(quantity=quantity, margin=float(margin),
                         simplex=(tuple(int(v) for v in top[sidx].vertices)
                                  if sidx is not None else None),
                         param=param)

    ok = True
    if len(top):
        rho = (_robustness_2d(stacks) if n == 2 else np.array(
            [robustness.robustness_of(st).rho for st in stacks]))
        m_rho = rho - rho_floor
        m_clear = _clearances(base_pts, stacks, centers, radii) - clear_base
        for i in range(len(top)):
            records[i]["robustness_margin"] = float(m_rho[i])
            records[i]["base_clearance_margin"] = float(m_clear[i])
            records[i]["center_drift"] = 0.0
            records[i]["radius_drift"] = 0.0
        i = int(np.argmin(m_rho))
        note("robustness", m_rho[i], i, None)
        i = int(np.argmin(m_clear))
        note("base_clearance", m_clear[i], i, None)
        if np.any(m_rho < 0) or np.any(m_clear < 0):
            ok = False

    base_set = {s.vertices for s in top}
    for param in family.params:
        tnet = translate_net(net, param, family)
        tstacks = tnet.points[verts] if len(top) else np.zeros((0, n + 1, n))
        if len(top):
            tc, tr, tvalid = cs.circumcenter_batch(tstacks)
            if not np.all(tvalid):
                ok = False
                i = int(np.nonzero(~tvalid)[0][0])
                note("circumcenter_exists", -math.inf, i, param)
                continue
            dc = np.linalg.norm(tc - centers, axis=1)
            dr = np.abs(tr - radii)
            trho = (_robustness_2d(tstacks) if n == 2 else np.array(
                [robustness.robustness_of(st).rho for st in tstacks]))
            tclear = _clearances(tnet.points, tstacks, tc, tr)
            for i in range(len(top)):
                records[i]["center_drift"] = max(records[i]["center_drift"], float(dc[i]))
                records[i]["radius_drift"] = max(records[i]["radius_drift"], float(dr[i]))
            checks = (
                ("robustness", trho - rho_floor),
                ("translate_clearance", tclear - clear_trans),
                ("center_drift", drift_c_max - dc),
                ("radius_drift", drift_r_max - dr),
            )
            for quantity, margins in checks:
                i = int(np.argmin(margins))
                note(quantity, margins[i], i, param)
                if margins[i] < 0:
                    ok = False
        # combinatorial identity under translation
        tcomplex = tess.build_delaunay(tnet, None)
        tset = {s.vertices for s in tcomplex.top(n)}
        if tset != base_set:
            ok = False
            diff = sorted(tset ^ base_set)
            note("combinatorics", -math.inf, None, param)
            worst.setdefault("detail", None)
            worst["detail"] = {"param": param, "symmetric_difference": [
                [int(v) for v in t] for t in diff[:8]]}
    if worst["quantity"] is None:
        worst.update(quantity="empty_complex", margin=0.0)
    return StabilityCertificate(ok=ok, worst=worst,
                                per_simplex=tuple(records),
                                params_checked=family.params)


# ---------------------------------------------------------------------------
# product structure


@dataclass(frozen=True)
class ProductStructure:
    """Sampled product structure Phi over K x params."""

    grid: np.ndarray  # (g, n) sample points of K
    params: tuple
    table: dict  # (grid_index, param) -> point tuple
    injective: bool
    class_sizes: tuple
    face_agreement_max: float


def _vertex_incidence(complex_: tess.DelaunayComplex, n: int) -> dict:
    """site index -> list of top simplices containing it."""
    inc: dict = {}
    for s in complex_.top(n):
        for v in s.vertices:
            inc.setdefault(int(v), []).append(s)
    return inc


def _locate_simplex(net: tess.Net, complex_: tess.DelaunayComplex, q,
                    require_interior: bool = True, incidence: dict = None,
                    interior: np.ndarray = None):
    """Containing top simplex of q, searched through the simplicial cone of
    its nearest site first (the containing simplex need not be incident to
    the nearest site, so nearby sites' cones are scanned as fallback)."""
    if incidence is None:
        incidence = _vertex_incidence(complex_, net.dim)
    i, _ = tess.nearest_site(q, net, None)
    if require_interior:
        if interior is None:
            interior = net.interior_mask()
        if not interior[i]:
            raise CoverageGapError(f"nearest site {i} of sample {q} is not interior")
    d = np.linalg.norm(net.points - np.asarray(q, dtype=float), axis=1)
    order = np.argsort(d)[: min(len(d), 12)]
    seen = set()
    for j in order:
        for s in incidence.get(int(j), ()):
            if s.vertices in seen:
                continue
            seen.add(s.vertices)
            bary = tess.barycentric_coordinates(net.points[list(s.vertices)], q)
            if np.all(bary >= -1e-12):
                return s, bary
    raise CoverageGapError(f"sample {q} lies outside every cone simplex")


def build_product_structure(K: Region, net: tess.Net,
                            complex_: tess.DelaunayComplex,
                            family: ParamFamily,
                            grid_shape=(50, 50)) -> ProductStructure:
    """Phi(y, t) = realization of the t-translated containing simplex of y at
    y's barycentric coordinates, tabulated over a regular grid of K.

    Raises CoverageGap when a grid sample escapes the simplicial cones of
    the interior sites.
    """
    lo, hi = K.bounding_box()
    axes = [np.linspace(lo[k], hi[k], grid_shape[k]) for k in range(K.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([a.ravel() for a in mesh], axis=-1)
    if K.kind == "disk":
        grid = grid[K.boundary_distance_many(grid) >= 0.0]

    params = family.params
    translated = {p: translate_net(net, p, family).points for p in params}
    incidence = _vertex_incidence(complex_, net.dim)
    interior = net.interior_mask()
    table = {}
    for gi, y in enumerate(grid):
        s, bary = _locate_simplex(net, complex_, y, incidence=incidence,
                                  interior=interior)
        vidx = list(s.vertices)
        for p in params:
            img = bary @ translated[p][vidx]
            table[(gi, p)] = tuple(float(x) for x in img)

    values = list(table.values())
    injective = len(set(values)) == len(values)
    class_sizes = tuple(len({table[(gi, p)] for p in params})
                        for gi in range(len(grid)))

    # face agreement: realize shared-edge midpoints through both parents
    n = net.dim
    by_face: dict = {}
    for s in complex_.top(n):
        for face in itertools.combinations(s.vertices, n):
            by_face.setdefault(face, []).append(s)
    worst = 0.0
    checked = 0
    for face, parents in by_face.items():
        if len(parents) < 2 or checked >= 200:
            continue
        checked += 1
        mid = np.mean(net.points[list(face)], axis=0)
        for p in params:
            imgs = []
            for s in parents[:2]:
                bary = tess.barycentric_coordinates(
                    net.points[list(s.vertices)], mid)
                imgs.append(bary @ translated[p][list(s.vertices)])
            worst = max(worst, float(np.linalg.norm(imgs[0] - imgs[1])))
    return ProductStructure(grid=grid, params=params, table=table,
                            injective=injective, class_sizes=class_sizes,
                            face_agreement_max=worst)
