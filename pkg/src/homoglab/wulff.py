"""Directional spreading speeds, the Wulff shape and its geometry."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import shapely
from shapely.geometry import MultiPoint, Polygon

from .env import Environment, EnvironmentSpec, Mode, ReactionSpec
from .subadd import ConvergenceEstimate, cell_seed, summarize
from .ttime import solve_times


def unit_directions(K: int, d: int = 2) -> np.ndarray:
    """K equally spaced unit vectors starting at e_1 ({+1, -1} in one dimension)."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    ang = 2 * np.pi * np.arange(K) / K
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


@dataclass
class DirectionalSpeedTable:
    """Normalized travel times tau_bar(e_k) and speeds w(e_k) = 1 / tau_bar(e_k).

    ci is the 95% half-width of tau_bar; w_ci the induced half-width of w.
    ratio holds the plain tau(R e) / R means for comparison.
    """

    directions: np.ndarray
    tau_bar: np.ndarray
    ci: np.ndarray
    radius: float
    samples: int
    ratio: np.ndarray | None = None
    estimates: list = field(default_factory=list)

    @property
    def w(self) -> np.ndarray:
        return 1.0 / self.tau_bar

    @property
    def w_ci(self) -> np.ndarray:
        return self.ci / self.tau_bar ** 2

    def __len__(self):
        return len(self.tau_bar)

    def rows(self) -> list[dict]:
        out = []
        for k, e in enumerate(self.directions):
            out.append({"k": k, "e_x": float(e[0]), "e_y": float(e[1]) if len(e) > 1 else 0.0,
                        "tau_bar": float(self.tau_bar[k]), "ci": float(self.ci[k]),
                        "w": float(self.w[k])})
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=["k", "e_x", "e_y", "tau_bar", "ci", "w"])
            wr.writeheader()
            for r in self.rows():
                wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


@dataclass(frozen=True)
class _SweepCell:
    spec: EnvironmentSpec
    reaction: ReactionSpec | None
    targets: np.ndarray
    h: float | None

    def __call__(self, seed: int) -> list[float]:
        env = Environment(self.spec, seed)
        x0 = np.zeros(self.spec.dimension)
        return solve_times(env, 0.0, x0, self.targets, self.reaction, self.h).taus.tolist()


def estimate_speed_table(spec: EnvironmentSpec, reaction: ReactionSpec | None = None, K: int = 32,
                         R: float = 40.0, samples: int = 8, h: float | None = None,
                         seed: int = 0, estimator: str = "secant",
                         mapper: Callable = map) -> DirectionalSpeedTable:
    """Sweep K directions and estimate tau_bar(e) from travel times to r e.

    One evolution per seed serves all directions and the radii R/4, R/2, R
    (paired sampling). With estimator="secant" tau_bar(e) is the mean
    slope (tau(R e) - tau(R e / 2)) / (R / 2), which cancels the bounded
    start-up offset of the travel time; "ratio" uses tau(R e) / R.
    """
    spec.check()
    if spec.mode is Mode.KPP and reaction is None:
        reaction = ReactionSpec()
    dirs = unit_directions(K, spec.dimension)
    radii = [R / 4, R / 2, R]
    targets = np.concatenate([r * dirs for r in radii])
    seeds = [cell_seed(seed, k) for k in range(samples)]
    rows = np.array(list(mapper(_SweepCell(spec, reaction, targets, h), seeds)))
    nd = len(dirs)
    tau, ci, ratio, ests = [], [], [], []
    for k in range(nd):
        table = rows[:, [k + j * nd for j in range(len(radii))]]
        est: ConvergenceEstimate = summarize(table, radii, paired=True)
        ests.append(est)
        ratio.append(est.limit)
        if estimator == "secant":
            tau.append(est.secant)
            ci.append(est.secant_half_width)
        elif estimator == "ratio":
            tau.append(est.limit)
            ci.append(est.half_width)
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
    return DirectionalSpeedTable(dirs, np.array(tau), np.array(ci), R, samples,
                                 np.array(ratio), ests)


# ----------------------------------------------------------------------
# shape
# ----------------------------------------------------------------------
@dataclass
class WulffShape:
    """Radial polygon with vertices w(e_k) e_k."""

    directions: np.ndarray
    radii: np.ndarray
    radii_ci: np.ndarray | None = None

    def __post_init__(self):
        self.directions = np.asarray(self.directions, dtype=float)
        self.radii = np.asarray(self.radii, dtype=float)

    @property
    def vertices(self) -> np.ndarray:
        return self.radii[:, None] * self.directions

    @property
    def dimension(self) -> int:
        return self.directions.shape[1]

    def support(self, e) -> np.ndarray:
        """c*(e) = max_k w(e_k) (e_k . e); e of shape (..., d)."""
        e = np.asarray(e, dtype=float)
        return (e @ self.vertices.T).max(axis=-1)

    def polygon(self, t: float = 1.0) -> Polygon:
        if self.dimension != 2:
            raise ValueError("polygons exist for d = 2 only")
        return Polygon(t * self.vertices)

    def area(self) -> float:
        return float(self.polygon().area)

    def write_csv(self, path, t: float = 1.0) -> None:
        """Closed polygon (first vertex repeated) with columns x, y."""
        pts = t * self.vertices
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "y"])
            for p in list(pts) + [pts[0]]:
                wr.writerow([repr(float(v)) for v in p])


def assemble_shape(table: DirectionalSpeedTable) -> WulffShape:
    """Wulff shape from a speed table; every speed must be positive and finite."""
    w = table.w
    if not np.all(np.isfinite(table.tau_bar)) or np.any(table.tau_bar <= 0):
        raise ValueError("non-positive or non-finite normalized travel time")
    if not np.all(np.isfinite(table.ci)):
        raise ValueError("speed table has non-finite confidence intervals")
    return WulffShape(table.directions, w, table.w_ci)


def ball_shape(radius: float = 1.0, K: int = 64) -> WulffShape:
    return WulffShape(unit_directions(K), np.full(K, float(radius)))


# ----------------------------------------------------------------------
# geometry checks
# ----------------------------------------------------------------------
class ConvexityReport(NamedTuple):
    passed: bool
    worst_margin: float
    worst_triple: tuple  # (k1, k_mid, k2)
    slack: float
    hull_passed: bool
    hull_gap: float


def check_convexity(shape: WulffShape, table: DirectionalSpeedTable | None = None,
                    slack_factor: float = 3.0, n_random: int = 64, seed: int = 0,
                    hull_tol: float | None = None) -> ConvexityReport:
    """Angle-bisector test of convexity of the radial polygon.

    For e1, e2 and their bisector e' the radial function of a convex set
    obeys w(e') >= w(e1) w(e2) |e1 + e2| / (w(e1) + w(e2)). Tested on all
    adjacent pairs and on random pairs less than pi apart, with slack
    slack_factor * max CI of w. Also reports how far any vertex lies
    inside the convex hull of the vertex set (must be <= hull_tol, which
    defaults to the same slack).
    """
    K = len(shape.radii)
    if K < 8:
        raise ValueError("convexity check needs K >= 8 directions")
    w = shape.radii
    ci = table.w_ci if table is not None else shape.radii_ci
    slack = slack_factor * float(np.max(ci)) if ci is not None else 0.0
    rng = np.random.default_rng(seed)
    pairs = [(k, 1) for k in range(K)]
    for _ in range(n_random):
        # 2 j steps must stay below a half turn so that the middle direction bisects
        pairs.append((int(rng.integers(K)), int(rng.integers(1, max(2, (K + 3) // 4)))))
    worst, where = math.inf, None
    for k, j in pairs:
        k1, km, k2 = k, (k + j) % K, (k + 2 * j) % K
        e1, e2 = shape.directions[k1], shape.directions[k2]
        bound = w[k1] * w[k2] * np.linalg.norm(e1 + e2) / (w[k1] + w[k2])
        m = w[km] - bound
        if m < worst:
            worst, where = m, (k1, km, k2)
    verts = shape.vertices
    hull = MultiPoint([tuple(v) for v in verts]).convex_hull
    gap = float(shapely.distance(hull.exterior, shapely.points(verts)).max())
    hull_tol = slack if hull_tol is None else hull_tol
    return ConvexityReport(worst >= -slack, float(worst), where, slack,
                           gap <= hull_tol + 1e-12, gap)


def check_speed_bounds(table: DirectionalSpeedTable, m_emp: float) -> dict:
    """1/M <= w(e_k) <= M for every direction."""
    w = table.w
    margin = float(min((w - 1.0 / m_emp).min(), (m_emp - w).min()))
    return {"name": "speed-bounds", "margin": margin, "passed": margin >= 0.0}


def check_direction_lipschitz(table: DirectionalSpeedTable, m_emp: float) -> dict:
    """|tau_bar(e) - tau_bar(e')| and |w(e) - w(e')| <= M^3 |e - e'| + 2 CI, adjacent e, e'."""
    K = len(table)
    worst = math.inf
    for k in range(K):
        j = (k + 1) % K
        gap = float(np.linalg.norm(table.directions[k] - table.directions[j]))
        for val, ci in ((table.tau_bar, table.ci), (table.w, table.w_ci)):
            allow = m_emp ** 3 * gap + 2 * max(ci[k], ci[j])
            worst = min(worst, allow - abs(val[k] - val[j]))
    return {"name": "direction-lipschitz", "margin": worst, "passed": worst >= 0.0}


def compare_tables(a: DirectionalSpeedTable, b: DirectionalSpeedTable, factor: float = 2.0
                   ) -> dict:
    """Per-direction agreement |tau_a - tau_b| <= factor * max(ci_a, ci_b)."""
    diff = np.abs(a.tau_bar - b.tau_bar)
    allow = factor * np.maximum(a.ci, b.ci)
    return {"name": "table-agreement", "diff": diff.tolist(), "allow": allow.tolist(),
            "margin": float((allow - diff).min()), "passed": bool(np.all(diff <= allow))}


# ----------------------------------------------------------------------
# Minkowski sums
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Ball:
    """Ball descriptor for initial sets."""

    center: tuple = (0.0, 0.0)
    radius: float = 1.0


def _as_polygon(G) -> np.ndarray:
    pts = np.asarray(G, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("degenerate polygon")
    poly = Polygon(pts)
    if not poly.is_valid or poly.area <= 0:
        raise ValueError("degenerate or self-intersecting polygon")
    return pts


def minkowski_sum(G, t: float, shape: WulffShape, n_normals: int = 256) -> Polygon:
    """G + t S as a shapely polygon.

    For a polygon G the sum is the union of G with the convex hulls of
    each edge of G plus t S (exact for any simple G). For a Ball the
    boundary points c + r n + t argmax_{s in S} s.n are generated for
    n_normals outward normals n; their hull is inscribed in the exact sum.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    tv = t * shape.vertices
    if isinstance(G, Ball):
        if G.radius < 0:
            raise ValueError("ball radius must be non-negative")
        nrm = unit_directions(n_normals)
        best = tv[np.argmax(nrm @ tv.T, axis=1)]
        pts = np.asarray(G.center, dtype=float) + G.radius * nrm + best
        return MultiPoint([tuple(p) for p in pts]).convex_hull
    pts = _as_polygon(G)
    if t == 0:
        return Polygon(pts)
    pieces = [Polygon(pts)]
    for a, b in zip(pts, np.roll(pts, -1, axis=0)):
        cloud = np.concatenate([a + tv, b + tv])
        pieces.append(MultiPoint([tuple(p) for p in cloud]).convex_hull)
    return shapely.unary_union(pieces)
