"""Random space-time environments with a finite temporal range of dependence.

Every coefficient field is built the same way: i.i.d. uniform values on the
cells of a space-time lattice, smoothed by a compact biweight mollifier of
radius ``mollify_radius`` and offset by one random global phase. Cell values
are produced by a counter-based hash, so a realization is an immutable,
lazily evaluated function of ``(spec, seed)``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import _fields
from .errors import InvalidSpecError

# hash streams of the individual fields
_STREAM_A = 0
_STREAM_B = 2
_STREAM_G = 4
_STREAM_C = 5
_STREAM_PSI = 6
_STREAM_PHASE = 7

_KPRIME_MAX = 4.0 * _fields.K_MAX / (3.0 * math.sqrt(3.0))  # max |k'| of the biweight


class Mode(str, Enum):
    KPP = "KPP"
    GEQ = "GEQ"


class ReactionForm(str, Enum):
    LOGISTIC = "LOGISTIC"
    PIECEWISE_LINEAR = "PIECEWISE_LINEAR"


@dataclass(frozen=True)
class ReactionSpec:
    """Nonlinearity f(t, x, u) = g(t, x) * shape(u).

    LOGISTIC uses u(1 - u), PIECEWISE_LINEAR uses min(u, 1 - u). Both share
    the linearization g at u = 0.
    """

    form: ReactionForm = ReactionForm.LOGISTIC

    def __post_init__(self):
        object.__setattr__(self, "form", ReactionForm(self.form))

    @property
    def code(self) -> int:
        return 0 if self.form is ReactionForm.LOGISTIC else 1

    def shape(self, u):
        u = np.asarray(u, dtype=float)
        if self.form is ReactionForm.LOGISTIC:
            return u * (1.0 - u)
        return np.minimum(u, 1.0 - u)

    def __call__(self, g, u):
        return np.asarray(g) * self.shape(u)

    def lower_bound(self, g_min: float, u):
        """Environment-free minorant f_0(u) of f over all (t, x)."""
        return g_min * self.shape(u)

    def gap_modulus(self, g_max: float, u):
        """Bound psi(u) on g - f/u, vanishing as u -> 0."""
        u = np.asarray(u, dtype=float)
        if self.form is ReactionForm.LOGISTIC:
            return g_max * u
        with np.errstate(divide="ignore", over="ignore"):
            return g_max * np.maximum(0.0, (2.0 * u - 1.0) / u)


@dataclass(frozen=True)
class EnvironmentSpec:
    """Law of a random environment.

    Parameters
    ----------
    dimension : int
        Spatial dimension, 1 or 2.
    mode : Mode
        KPP coefficients (A, b, g) or G-equation coefficients (c, v).
    cell_duration, cell_size : float
        Lattice cell extent in time and space.
    mollify_radius : float
        Radius of the smoothing kernel, at most half of either cell extent.
    ellipticity, diffusion_max : float
        Range [lambda, Lambda_A] of the diagonal entries of A.
    drift_max : float
        Bound on |b|; each component is uniform in +-drift_max/sqrt(d).
    reaction_min, reaction_max : float
        Range of the reaction slope g = f_u(t, x, 0).
    speed_min, speed_max : float
        Range of the flame speed c.
    stream_amplitude : float
        psi takes values in [-stream_amplitude, stream_amplitude].
    mean_flow : tuple of float
        Constant part of v, added to the curl of psi.
    """

    dimension: int = 2
    mode: Mode = Mode.KPP
    cell_duration: float = 1.0
    cell_size: float = 1.0
    mollify_radius: float = 0.25
    ellipticity: float = 1.0
    diffusion_max: float = 1.0
    drift_max: float = 0.0
    reaction_min: float = 1.0
    reaction_max: float = 1.0
    speed_min: float = 1.0
    speed_max: float = 1.0
    stream_amplitude: float = 0.0
    mean_flow: tuple = field(default=(0.0, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        mf = tuple(float(v) for v in self.mean_flow)
        object.__setattr__(self, "mean_flow", mf)

    # ------------------------------------------------------------------
    def check(self) -> None:
        """Raise InvalidSpecError naming the first violated invariant."""
        d = self.dimension
        if d not in (1, 2):
            raise InvalidSpecError("dimension", f"dimension must be 1 or 2, got {d}")
        if not (self.cell_duration > 0 and self.cell_size > 0):
            raise InvalidSpecError("cell-extent", "cell_duration and cell_size must be positive")
        if not self.mollify_radius >= 0:
            raise InvalidSpecError("mollifier", "mollify_radius must be non-negative")
        if 2 * self.mollify_radius > min(self.cell_duration, self.cell_size):
            raise InvalidSpecError(
                "mollifier", "mollify_radius must not exceed half of the cell extents")
        if len(self.mean_flow) != 2:
            raise InvalidSpecError("mean-flow", "mean_flow needs two components")
        if self.mode is Mode.KPP:
            if not self.ellipticity > 0:
                raise InvalidSpecError("ellipticity", "ellipticity must be positive")
            if self.diffusion_max < self.ellipticity:
                raise InvalidSpecError("ellipticity", "diffusion_max below ellipticity")
            if not self.reaction_min > 0:
                raise InvalidSpecError("reaction-positive", "reaction_min must be positive")
            if self.reaction_max < self.reaction_min:
                raise InvalidSpecError("reaction-positive", "reaction_max below reaction_min")
            if self.drift_max < 0:
                raise InvalidSpecError("drift-bound", "drift_max must be non-negative")
            margin = self.drift_margin
            if not margin > 0:
                raise InvalidSpecError(
                    "drift-bound",
                    f"drift_max^2 < 4*ellipticity*reaction_min fails (margin {margin:.6g})")
        else:
            if not self.speed_min > 0:
                raise InvalidSpecError("flame-speed-positive", "speed_min must be positive")
            if self.speed_max < self.speed_min:
                raise InvalidSpecError("flame-speed-positive", "speed_max below speed_min")
            if self.stream_amplitude < 0:
                raise InvalidSpecError("stream", "stream_amplitude must be non-negative")
            if self.stream_amplitude > 0 and self.mollify_radius == 0:
                raise InvalidSpecError("stream", "a stream function needs mollify_radius > 0")
            if d == 1 and (self.stream_amplitude != 0 or any(self.mean_flow)):
                raise InvalidSpecError("flow-1d", "G-equation in one dimension requires v = 0")
            if not math.hypot(*self.mean_flow) < self.speed_min:
                raise InvalidSpecError(
                    "flow-below-flame-speed", "|mean_flow| must be below speed_min")

    @property
    def drift_margin(self) -> float:
        return 4.0 * self.ellipticity * self.reaction_min - self.drift_max ** 2

    # ------------------------------------------------------------------
    def bounds(self) -> "CoefficientBounds":
        d = self.dimension
        r = self.mollify_radius
        inv_r = 1.0 / r if r > 0 else math.inf
        if self.mode is Mode.KPP:
            spans = [self.diffusion_max - self.ellipticity,
                     2 * self.drift_max / math.sqrt(d),
                     self.reaction_max - self.reaction_min]
            lip = max(spans) * _fields.K_MAX * inv_r * math.sqrt(d) if max(spans) > 0 else 0.0
            return CoefficientBounds(
                diffusion=self.diffusion_max, drift=self.drift_max,
                drift_component=self.drift_max / math.sqrt(d), reaction=self.reaction_max,
                speed=0.0, flow=0.0, lipschitz=lip, flow_lipschitz=0.0, speed_lipschitz=0.0)
        amp = self.stream_amplitude
        mean = math.hypot(*self.mean_flow) if d == 2 else 0.0
        if amp > 0:
            grad = 2 * amp * _fields.K_MAX * inv_r
            flow = mean + math.sqrt(2.0) * grad
            second = 2 * amp * max(_KPRIME_MAX * inv_r ** 2, (_fields.K_MAX * inv_r) ** 2)
            flow_lip = 2.0 * second
        else:
            flow, flow_lip = mean, 0.0
        cspan = self.speed_max - self.speed_min
        clip = cspan * _fields.K_MAX * inv_r * math.sqrt(d) if cspan > 0 else 0.0
        return CoefficientBounds(
            diffusion=0.0, drift=0.0, drift_component=0.0, reaction=0.0,
            speed=self.speed_max, flow=flow, lipschitz=max(clip, flow_lip),
            flow_lipschitz=flow_lip, speed_lipschitz=clip)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mode"] = self.mode.value
        out["mean_flow"] = list(self.mean_flow)
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_(self, **kw) -> "EnvironmentSpec":
        return replace(self, **kw)


class CoefficientBounds(NamedTuple):
    diffusion: float
    drift: float
    drift_component: float
    reaction: float
    speed: float
    flow: float
    lipschitz: float
    flow_lipschitz: float
    speed_lipschitz: float


class KPPFields(NamedTuple):
    A: np.ndarray  # diagonal entries, shape (..., d)
    b: np.ndarray  # shape (..., d)
    g: np.ndarray  # shape (...)


class GEQFields(NamedTuple):
    c: np.ndarray  # shape (...)
    v: np.ndarray  # shape (..., d)


def temporal_dependence_range(spec: EnvironmentSpec) -> float:
    """Time lag beyond which field values depend on disjoint cell sets."""
    if spec.cell_duration <= 0 or spec.mollify_radius < 0:
        raise InvalidSpecError("cell-extent", "cell_duration must be positive")
    return spec.cell_duration + 2.0 * spec.mollify_radius


def _to_u64(seed: int) -> int:
    return int(seed) & 0xFFFFFFFFFFFFFFFF


class Environment:
    """One realization of an :class:`EnvironmentSpec`.

    Immutable: :meth:`shift` returns a new object sharing the same cell
    lattice and phase.
    """

    def __init__(self, spec: EnvironmentSpec, seed: int, offset_t: float = 0.0,
                 offset_x: tuple | None = None):
        self.spec = spec
        self.seed = _to_u64(seed)
        d = spec.dimension
        self.offset_t = float(offset_t)
        self.offset_x = tuple(float(v) for v in (offset_x or (0.0,) * d))
        u = _fields.cell_uniform
        s = np.uint64(self.seed)
        self.phase_t = spec.cell_duration * u(s, _STREAM_PHASE, 0, 0, 0)
        self.phase_x = tuple(spec.cell_size * u(s, _STREAM_PHASE, 1 + i, 0, 0)
                             for i in range(d))
        self._streams, self._lo, self._span = self._stream_table()

    def _stream_table(self):
        sp = self.spec
        d = sp.dimension
        if sp.mode is Mode.KPP:
            bc = sp.drift_max / math.sqrt(d)
            streams = [_STREAM_A + i for i in range(d)] + [_STREAM_B + i for i in range(d)]
            streams.append(_STREAM_G)
            lo = [sp.ellipticity] * d + [-bc] * d + [sp.reaction_min]
            span = ([sp.diffusion_max - sp.ellipticity] * d + [2 * bc] * d
                    + [sp.reaction_max - sp.reaction_min])
        else:
            streams = [_STREAM_C, _STREAM_PSI]
            lo = [sp.speed_min, -sp.stream_amplitude]
            span = [sp.speed_max - sp.speed_min, 2 * sp.stream_amplitude]
        return (np.array(streams, dtype=np.int64), np.array(lo, dtype=float),
                np.array(span, dtype=float))

    # ------------------------------------------------------------------
    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def mode(self) -> Mode:
        return self.spec.mode

    def bounds(self) -> CoefficientBounds:
        return self.spec.bounds()

    def time_coordinate(self, t):
        return (np.asarray(t, dtype=float) + self.offset_t) + self.phase_t

    def space_coordinate(self, x, axis: int):
        return (np.asarray(x, dtype=float) + self.offset_x[axis]) + self.phase_x[axis]

    def shift(self, s: float, y) -> "Environment":
        """Realization seen from the space-time point (s, y)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        off = tuple(float(o + yi) for o, yi in zip(self.offset_x, y))
        return Environment(self.spec, self.seed, self.offset_t + float(s), off)

    def time_cells(self, t: float) -> set:
        """Indices of the time cells that influence fields at time t."""
        m0, _, w1, _, _ = _fields.axis_weights(
            float(self.time_coordinate(t)), self.spec.cell_duration, self.spec.mollify_radius)
        return {int(m0), int(m0) + 1} if w1 != 0.0 else {int(m0)}

    # ------------------------------------------------------------------
    def raw_values(self, t, x):
        """Coefficient values and spatial gradients in stream order."""
        d = self.dimension
        x = np.asarray(x, dtype=float)
        if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        lead = x.shape[:-1]
        pts = x.reshape(-1, d)
        tt = np.broadcast_to(np.asarray(t, dtype=float), lead).reshape(-1)
        tc = np.ascontiguousarray(self.time_coordinate(tt), dtype=float)
        xc = np.empty_like(pts)
        for i in range(d):
            xc[:, i] = self.space_coordinate(pts[:, i], i)
        sp = self.spec
        val, grad = _fields.point_values(
            np.uint64(self.seed), self._streams, self._lo, self._span, tc, xc,
            sp.cell_duration, sp.cell_size, sp.mollify_radius)
        ns = len(self._streams)
        return val.reshape(lead + (ns,)), grad.reshape(lead + (ns, d))

    def evaluate(self, t, x):
        """Coefficients at (t, x).

        Parameters
        ----------
        t : float or array
            Time, broadcast against the leading shape of x.
        x : array_like
            Points of shape (..., d); scalars are accepted when d = 1.

        Returns
        -------
        KPPFields or GEQFields
        """
        d = self.dimension
        val, grad = self.raw_values(t, x)
        if self.mode is Mode.KPP:
            return KPPFields(A=val[..., :d], b=val[..., d:2 * d], g=val[..., 2 * d])
        c = val[..., 0]
        v = np.zeros(val.shape[:-1] + (d,))
        if d == 2:
            gpsi = grad[..., 1, :]
            v[..., 0] = self.spec.mean_flow[0] - gpsi[..., 1]
            v[..., 1] = self.spec.mean_flow[1] + gpsi[..., 0]
        return GEQFields(c=c, v=v)

    def sampler(self, grid) -> "GridSampler":
        return GridSampler(self, grid)

    def __repr__(self):
        return (f"Environment(mode={self.mode.value}, d={self.dimension}, seed={self.seed}, "
                f"offset_t={self.offset_t}, offset_x={self.offset_x})")


def build_environment(spec: EnvironmentSpec, seed: int) -> Environment:
    """Validate `spec` and return its realization for `seed`."""
    spec.check()
    if spec.mollify_radius <= 0:
        raise InvalidSpecError("mollifier", "realizations need mollify_radius > 0")
    return Environment(spec, seed)


class GridSampler:
    """Coefficient layers of one realization on a fixed solver grid.

    Spatial layers are computed once per time cell and blended in time by
    the solver kernels. Values are bit-identical to pointwise evaluation.
    GEQ layers live on the grid padded by one node so that the velocity can
    be formed as a centred discrete curl of psi.
    """

    def __init__(self, env: Environment, grid):
        self.env = env
        self.grid = grid
        sp = env.spec
        self.pad = 1 if env.mode is Mode.GEQ else 0
        d = grid.dimension
        n = grid.size + 2 * self.pad
        c0 = np.empty((d, n), dtype=np.int64)
        w0 = np.empty((d, n))
        w1 = np.empty((d, n))
        for a in range(d):
            ax = grid.axis(a, pad=self.pad)
            coord = env.space_coordinate(ax, a)
            for i in range(n):
                c0[a, i], w0[a, i], w1[a, i], _, _ = _fields.axis_weights(
                    coord[i], sp.cell_size, sp.mollify_radius)
        self._axes = (c0, w0, w1)
        self._cache: dict[int, np.ndarray] = {}
        self.lo = env._lo
        self.span = env._span

    def layer(self, m: int) -> np.ndarray:
        lay = self._cache.get(m)
        if lay is None:
            if len(self._cache) > 3:
                for k in sorted(self._cache)[:-2]:
                    del self._cache[k]
            lay = _fields.grid_layers(np.uint64(self.env.seed), self.env._streams,
                                      np.int64(m), *self._axes)
            self._cache[m] = lay
        return lay

    def time_weights(self, t: float):
        sp = self.env.spec
        m0, w0, w1, _, _ = _fields.axis_weights(
            float(self.env.time_coordinate(t)), sp.cell_duration, sp.mollify_radius)
        return int(m0), w0, w1

    def layers(self, t: float):
        """(layer0, layer1, w0, w1) for absolute time t."""
        m0, w0, w1 = self.time_weights(t)
        l0 = self.layer(m0)
        l1 = self.layer(m0 + 1) if w1 != 0.0 else l0
        return l0, l1, w0, w1

    def fields(self, t: float):
        """Coefficient arrays at time t on the grid (unpadded)."""
        l0, l1, w0, w1 = self.layers(t)
        vals = _fields.grid_combine(l0, l1, w0, w1, self.lo, self.span)
        d = self.grid.dimension
        if d == 1:
            vals = vals[:, :, 0]
        if self.env.mode is Mode.KPP:
            return KPPFields(A=np.moveaxis(vals[:d], 0, -1), b=np.moveaxis(vals[d:2 * d], 0, -1),
                             g=vals[2 * d])
        if d == 1:
            return GEQFields(c=vals[0, 1:-1], v=np.zeros(vals.shape[1:] + (1,))[1:-1])
        psi = vals[1]
        h = self.grid.h
        mf = self.env.spec.mean_flow
        v = np.empty(psi[1:-1, 1:-1].shape + (2,))
        v[..., 0] = mf[0] - (psi[1:-1, 2:] - psi[1:-1, :-2]) / (2 * h)
        v[..., 1] = mf[1] + (psi[2:, 1:-1] - psi[:-2, 1:-1]) / (2 * h)
        return GEQFields(c=vals[0, 1:-1, 1:-1], v=v)


# ----------------------------------------------------------------------
# hypothesis validation
# ----------------------------------------------------------------------
class HypothesisItem(NamedTuple):
    name: str
    passed: bool
    margin: float
    detail: str


@dataclass
class HypothesisReport:
    items: list

    @property
    def passed(self) -> bool:
        return all(i.passed for i in self.items)

    def failed(self) -> list:
        return [i for i in self.items if not i.passed]

    def __getitem__(self, name: str) -> HypothesisItem:
        for i in self.items:
            if i.name == name:
                return i
        raise KeyError(name)

    def raise_if_failed(self) -> None:
        bad = self.failed()
        if bad:
            raise InvalidSpecError(bad[0].name, bad[0].detail)

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "items": [dict(i._asdict()) for i in self.items]}


def box_average_flow(env: Environment, t: float, corner, L: float, n: int | None = None) -> np.ndarray:
    """Mean of v over the square [corner, corner + L]^2 at time t.

    The curl part integrates to boundary terms, so only psi on the four
    edges is needed (composite Simpson rule).
    """
    sp = env.spec
    if n is None:
        n = 2 * int(math.ceil(8 * L / max(sp.mollify_radius, 1e-3)))
    n += n % 2
    s = np.linspace(0.0, L, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    w *= L / (3 * n)
    x0, y0 = float(corner[0]), float(corner[1])

    def psi(px, py):
        val, _ = env.raw_values(t, np.stack([px, py], axis=-1))
        return val[:, 1]

    top = psi(x0 + s, np.full_like(s, y0 + L))
    bottom = psi(x0 + s, np.full_like(s, y0))
    right = psi(np.full_like(s, x0 + L), y0 + s)
    left = psi(np.full_like(s, x0), y0 + s)
    dpsi_dy = w @ (top - bottom) / L ** 2
    dpsi_dx = w @ (right - left) / L ** 2
    mf = sp.mean_flow
    return np.array([mf[0] - dpsi_dy, mf[1] + dpsi_dx])


def validate_hypotheses(spec: EnvironmentSpec, reaction: ReactionSpec | None = None,
                        samples: int = 100, seed: int = 0,
                        box_sides=(4, 16, 64), strict: bool = False) -> HypothesisReport:
    """Check the standing hypotheses of the spec and report witnessing margins.

    KPP: ellipticity, positive reaction, drift bound 4 lambda g_min > b_max^2,
    f <= g u for the reaction form (closed form) and the gap modulus psi(u)
    at small u. GEQ: positive flame speed and the large-box average of v
    below c_min (Monte Carlo over `samples` boxes for each side length in
    `box_sides` cell sizes, with the analytic bound for comparison).
    Finite temporal dependence holds by construction in both modes.
    """
    items = []
    add = items.append
    d = spec.dimension
    dim_ok = d in (1, 2)
    add(HypothesisItem("dimension", dim_ok, 0.0, f"d = {d}"))
    cells_ok = spec.cell_duration > 0 and spec.cell_size > 0
    add(HypothesisItem("cell-extent", cells_ok, min(spec.cell_duration, spec.cell_size),
                       "cell extents positive"))
    mol_margin = min(spec.cell_duration, spec.cell_size) / 2 - spec.mollify_radius
    mol_ok = spec.mollify_radius > 0 and mol_margin >= 0
    add(HypothesisItem("mollifier", mol_ok, mol_margin,
                       f"0 < r = {spec.mollify_radius} <= half the cell extent"))
    if spec.mode is Mode.KPP:
        reaction = reaction or ReactionSpec()
        add(HypothesisItem("ellipticity", 0 < spec.ellipticity <= spec.diffusion_max,
                           spec.ellipticity, f"lambda = {spec.ellipticity}, "
                           f"Lambda_A = {spec.diffusion_max}"))
        add(HypothesisItem("reaction-positive", 0 < spec.reaction_min <= spec.reaction_max,
                           spec.reaction_min, f"g in [{spec.reaction_min}, {spec.reaction_max}]"))
        m = spec.drift_margin
        add(HypothesisItem("drift-bound", m > 0 and spec.drift_max >= 0, m,
                           f"4 lambda g_min - b_max^2 = {m:.6g} must be > 0"))
        # g u - f = g (u - shape(u)) >= 0 in closed form: u^2 (logistic),
        # max(0, 2u - 1) (piecewise linear)
        u = np.linspace(0.0, 1.0, 1025)
        gap = u - reaction.shape(u)
        ends = float(abs(reaction.shape(np.array([0.0, 1.0]))).max())
        pos = bool((reaction.shape(u[1:-1]) > 0).all())
        form = "u^2" if reaction.form is ReactionForm.LOGISTIC else "max(0, 2u - 1)"
        add(HypothesisItem("kpp-reaction", bool(gap.min() >= 0 and ends == 0 and pos),
                           float(gap.min()),
                           f"g u - f = g {form} >= 0, f(0) = f(1) = 0, f > 0 on (0, 1)"))
        us = np.array([1e-1, 1e-2, 1e-3])
        psi = reaction.gap_modulus(spec.reaction_max, us)
        mono = bool(np.all(np.diff(psi) <= 0) and psi[-1] <= spec.reaction_max * 1e-3 + 1e-15)
        add(HypothesisItem("reaction-modulus", mono, float(psi[-1]),
                           "psi(u) at u = 0.1, 0.01, 0.001: "
                           + ", ".join(f"{p:.3g}" for p in psi)))
    else:
        c_min = spec.speed_min
        add(HypothesisItem("flame-speed-positive", 0 < c_min <= spec.speed_max, c_min,
                           f"c in [{c_min}, {spec.speed_max}]"))
        mean = math.hypot(*spec.mean_flow)
        add(HypothesisItem("flow-below-flame-speed", mean < c_min, c_min - mean,
                           f"|mean_flow| = {mean:.6g} < c_min"))
        if d == 2 and dim_ok and cells_ok and mol_ok and spec.stream_amplitude >= 0:
            rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6C34]))
            env = Environment(spec, int(rng.integers(2 ** 63)))
            sups, bounds = [], []
            for k in box_sides:
                L = k * spec.cell_size
                best = 0.0
                for _ in range(samples):
                    t = float(rng.uniform(0, 100 * spec.cell_duration))
                    corner = rng.uniform(-1000 * spec.cell_size, 1000 * spec.cell_size, 2)
                    best = max(best, float(np.linalg.norm(box_average_flow(env, t, corner, L))))
                sups.append(best)
                bounds.append(mean + 2 * math.sqrt(2) * spec.stream_amplitude / L)
            i = int(np.argmin(sups))
            add(HypothesisItem(
                "box-average-flow", sups[i] < c_min, c_min - sups[i],
                "max |box mean of v| over samples: "
                + ", ".join(f"L={k}: {s:.4g} (bound {b:.4g})"
                            for k, s, b in zip(box_sides, sups, bounds))))
        elif d == 1:
            add(HypothesisItem("flow-1d", spec.stream_amplitude == 0 and not any(spec.mean_flow),
                               0.0, "v = 0 in one dimension"))
        add(HypothesisItem("divergence-free", True, 0.0,
                           "v = mean_flow + curl psi (by construction)"))
    tdep = spec.cell_duration + 2 * spec.mollify_radius
    add(HypothesisItem("mixing", True, tdep,
                       f"finite temporal range of dependence T_dep = {tdep:.6g} "
                       "(mixing coefficient vanishes beyond it, by construction)"))
    report = HypothesisReport(items)
    if strict:
        report.raise_if_failed()
    return report
