"""Ideal sampling in spline shift-invariant spaces.

Signals are ``f(x) = sum_k c_k phi(x - k)`` and samples are point values
``f(x_j)``.  Sampling points are grouped into unit cells ``[n, n+1)``; with
``M`` points per cell, row ``m = n*M + r`` of the sampling matrix is the
``r``-th point of cell ``n``, which makes the matrix ``1/M``-slanted.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .frames import left_inverse
from .slant_core import IndexWindow, SlantedMatrix, Weight

__all__ = [
    "bspline_eval",
    "bspline_derivative",
    "Generator",
    "SamplingSet",
    "HomogeneousSet",
    "Signal",
    "amalgam_norm",
    "homogenize",
    "build_sampling_matrix",
    "stability_bound",
    "riesz_check",
    "sample",
    "reconstruct_from_samples",
    "generate_jittered_set",
    "quadrature_grid",
]

QUAD_STEP = 1e-3


def _check_order(order):
    if order not in (1, 2):
        raise ValueError(f"B-spline order must be 1 or 2, got {order!r}")


def bspline_eval(order: int, x):
    """Cardinal B-spline ``beta_order``: the (order+1)-fold self-convolution
    of the indicator of [0, 1].  ``beta_1`` is the hat on [0, 2], ``beta_2``
    the quadratic on [0, 3]."""
    _check_order(order)
    x = np.asarray(x, dtype=float)
    if order == 1:
        return np.where((x > 0) & (x < 2), 1.0 - np.abs(x - 1.0), 0.0)
    return np.select(
        [(x > 0) & (x < 1), (x >= 1) & (x < 2), (x >= 2) & (x < 3)],
        [0.5 * x**2, 0.5 * (-2 * x**2 + 6 * x - 3), 0.5 * (3 - x) ** 2],
        0.0,
    )


def bspline_derivative(order: int, x, nu: int = 1):
    """Piecewise derivative of order ``nu``; at breakpoints the right limit."""
    _check_order(order)
    if nu < 1 or nu > order:
        raise ValueError(f"beta_{order} has piecewise derivatives of order 1..{order}")
    x = np.asarray(x, dtype=float)
    if order == 1:
        return np.select([(x >= 0) & (x < 1), (x >= 1) & (x < 2)], [1.0, -1.0], 0.0)
    pieces = [(x >= 0) & (x < 1), (x >= 1) & (x < 2), (x >= 2) & (x < 3)]
    if nu == 1:
        return np.select(pieces, [x, 3 - 2 * x, x - 3], 0.0)
    return np.select(pieces, [1.0, -2.0, 1.0], 0.0)


@dataclass(frozen=True, eq=False)
class Generator:
    """A compactly supported continuous generator ``phi``.

    B-splines carry their constants analytically.  Tabulated generators are
    piecewise linear through ``(grid, values)``; their ``b`` and ``b_prime``
    are computed from the table and ``a`` must be supplied if wanted.
    """

    kind: str
    order: int | None = None
    grid: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)
    a: float | None = None
    b: float | None = None
    b_prime: float | None = None
    b_dprime: float | None = None

    @classmethod
    def bspline(cls, order: int) -> "Generator":
        _check_order(order)
        if order == 1:
            return cls("bspline", order=1, a=1.0, b=1.0, b_prime=2.0)
        return cls("bspline", order=2, a=0.5, b=1.0, b_prime=2.0, b_dprime=4.0)

    @classmethod
    def tabulated(cls, grid, values, a: float | None = None) -> "Generator":
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or len(grid) < 2:
            raise ValueError("grid and values must be equal-length 1-D arrays")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        g = cls("tabulated", grid=grid, values=values, a=a)
        # periodized sums are piecewise linear in x with breaks at grid mod 1
        xs = np.unique(np.concatenate([np.mod(grid, 1.0), [0.0, 1.0]]))
        mids = 0.5 * (xs[1:] + xs[:-1])
        b = max(g.periodized_abs(xs).max(), g.periodized_abs(mids).max())
        bp = g.periodized_abs(mids, derivative=True).max()
        object.__setattr__(g, "b", float(b))
        object.__setattr__(g, "b_prime", float(bp))
        return g

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "bspline":
            return (0.0, float(self.order + 1))
        return (float(self.grid[0]), float(self.grid[-1]))

    @property
    def breakpoints(self) -> np.ndarray:
        if self.kind == "bspline":
            return np.arange(self.order + 2, dtype=float)
        return self.grid

    def __call__(self, x):
        if self.kind == "bspline":
            return bspline_eval(self.order, x)
        return np.interp(x, self.grid, self.values, left=0.0, right=0.0)

    def derivative(self, x, nu: int = 1):
        if self.kind == "bspline":
            return bspline_derivative(self.order, x, nu)
        if nu != 1:
            raise ValueError("tabulated generators are piecewise linear")
        x = np.asarray(x, dtype=float)
        slopes = np.diff(self.values) / np.diff(self.grid)
        idx = np.searchsorted(self.grid, x, side="right") - 1
        inside = (idx >= 0) & (idx < len(slopes))
        return np.where(inside, slopes[np.clip(idx, 0, len(slopes) - 1)], 0.0)

    def periodized_abs(self, x, derivative: bool = False):
        """``sum_k |phi(x - k)|`` (or of ``phi'``) at points ``x``."""
        lo, hi = self.support
        ks = np.arange(math.floor(-hi) - 1, math.ceil(-lo) + 2)
        x = np.asarray(x, dtype=float)
        pts = x[..., None] + ks
        vals = self.derivative(pts) if derivative else self(pts)
        return np.abs(vals).sum(axis=-1)


@dataclass(frozen=True)
class SamplingSet:
    """Finite, strictly increasing sampling points."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        if pts.size == 0:
            raise ValueError("sampling set is empty")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("sampling points must be strictly increasing")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def gap(self) -> float:
        """``max(x_{j+1} - x_j)`` over the covered interval."""
        return float(np.diff(self.points).max()) if len(self) > 1 else math.inf

    @property
    def separation(self) -> float:
        return float(np.diff(self.points).min()) if len(self) > 1 else math.inf

    @property
    def cells(self) -> np.ndarray:
        return np.floor(self.points).astype(np.int64)

    def cell_counts(self) -> dict[int, int]:
        """Points per unit cell ``[n, n+1)`` for every cell in the covered range."""
        c = self.cells
        counts = np.bincount(c - c[0], minlength=c[-1] - c[0] + 1)
        return {int(c[0]) + i: int(v) for i, v in enumerate(counts)}

    @property
    def homogeneity(self) -> int:
        return max(self.cell_counts().values())

    def is_homogeneous(self) -> bool:
        return len(set(self.cell_counts().values())) == 1

    def restrict(self, lo: float, hi: float) -> "SamplingSet":
        keep = (self.points >= lo) & (self.points < hi)
        return SamplingSet(self.points[keep])

    @classmethod
    def load(cls, path) -> "SamplingSet":
        with open(path) as fh:
            pts = [float(line) for line in fh if line.strip()]
        return cls(np.array(pts))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            for x in self.points:
                fh.write(f"{float(x)!r}\n")


@dataclass(frozen=True, eq=False)
class HomogeneousSet:
    """Sampling points laid out ``M`` per cell.

    ``points[m]`` is the point in row ``m = (first_cell + i) * M + r``;
    ``source[m]`` is the index of that point in the original set, or ``-1``
    for a padding slot in an empty cell (an all-zero row).
    """

    points: np.ndarray
    source: np.ndarray
    M: int
    first_cell: int

    @property
    def rows(self) -> IndexWindow:
        lo = self.first_cell * self.M
        return IndexWindow(lo, lo + len(self.points) - 1)

    @property
    def multiplicity(self) -> np.ndarray:
        live = self.source[self.source >= 0]
        return np.bincount(live, minlength=live.max() + 1 if live.size else 0)

    def spread(self, samples) -> np.ndarray:
        """Lay out per-point sample values along the homogenized rows."""
        samples = np.asarray(samples, dtype=float)
        out = np.zeros(len(self.source))
        live = self.source >= 0
        out[live] = samples[self.source[live]]
        return out


def homogenize(X: SamplingSet) -> HomogeneousSet:
    """Pad every cell to the maximal count ``M`` by repeating its last point.

    Repeating rows leaves the l^inf lower bound unchanged and scales the
    l^p one by at most ``(M+1)^(1/p)``.  Empty cells (gap > 1) get zero rows.
    """
    counts = X.cell_counts()
    M = max(counts.values())
    cells = X.cells
    first = min(counts)
    n_cells = len(counts)
    source = -np.ones(n_cells * M, dtype=np.int64)
    order = np.arange(len(X))
    for ci, cell in enumerate(range(first, first + n_cells)):
        members = order[cells == cell]
        if members.size == 0:
            continue
        slots = np.concatenate([members, np.repeat(members[-1], M - members.size)])
        source[ci * M:(ci + 1) * M] = slots
    points = np.where(source >= 0, X.points[np.maximum(source, 0)],
                      np.repeat(np.arange(first, first + n_cells), M).astype(float))
    return HomogeneousSet(points, source, M, first)


@dataclass(frozen=True, eq=False)
class Signal:
    """``f(x) = sum_k c_k phi(x - k)`` with ``k`` over ``window``."""

    coefficients: np.ndarray
    generator: Generator
    window: IndexWindow

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.window.size,):
            raise ValueError("coefficient vector does not match window")
        object.__setattr__(self, "coefficients", c)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = self.window.indices
        lo, hi = self.generator.support
        out = np.zeros(x.shape)
        flat = x.ravel()
        res = out.ravel()
        # only shifts whose support can reach x contribute
        for shift in range(math.floor(-hi), math.ceil(-lo) + 1):
            kk = np.floor(flat).astype(np.int64) + shift
            ok = self.window.contains(kk)
            res[ok] += self.coefficients[kk[ok] - self.window.lo] * self.generator(flat[ok] - kk[ok])
        return res.reshape(x.shape)


def quadrature_grid(lo: float, hi: float, breakpoints=(), step: float = QUAD_STEP) -> np.ndarray:
    """Uniform grid on ``[lo, hi]`` with ``breakpoints`` inserted."""
    n = max(1, int(math.ceil((hi - lo) / step)))
    base = np.linspace(lo, hi, n + 1)
    extra = np.asarray([b for b in breakpoints if lo <= b <= hi], dtype=float)
    return np.unique(np.concatenate([base, extra]))


def amalgam_norm(g: Generator, weight: Weight | None = None, step: float = QUAD_STEP) -> float:
    """``sum_k omega(k) * sup_{x in [0,1]} |phi(x + k)|``.

    Per-cell sups are taken on a grid of spacing ``step`` plus the
    generator's breakpoints, which is exact for splines and piecewise-linear
    tables (each piece is monotone between breakpoints or has its extremum
    on a grid point within ``step``).
    """
    weight = weight or Weight.unit()
    lo, hi = g.support
    total = 0.0
    bps = np.asarray(g.breakpoints, dtype=float)
    extrema = np.array([1.5]) if (g.kind == "bspline" and g.order == 2) else np.array([])
    for k in range(math.floor(lo), math.ceil(hi)):
        local = np.concatenate([bps - k, extrema - k])
        xs = quadrature_grid(0.0, 1.0, local, step)
        total += float(weight(k)) * float(np.abs(g(xs + k)).max())
    return total


def _cell_window(X: HomogeneousSet | SamplingSet) -> HomogeneousSet:
    if isinstance(X, HomogeneousSet):
        return X
    if not X.is_homogeneous():
        raise ValueError("sampling set is not homogeneous; call homogenize() first")
    return homogenize(X)


def build_sampling_matrix(g: Generator, X: HomogeneousSet | SamplingSet, L: int,
                          rows: str = "support") -> SlantedMatrix:
    """Sampling matrix ``a_{m,k} = phi(x_m - k)`` for ``k in {-L..L}``.

    ``rows="support"`` keeps every cell whose points can see a coefficient
    in the window (the matrix that reconstruction needs).
    ``rows="window"`` keeps cells ``-L..L`` only: the square-in-cells finite
    section of the bi-infinite sampling operator.
    """
    H = _cell_window(X)
    cols = IndexWindow.centered(L)
    lo, hi = g.support
    if rows == "support":
        cell_lo, cell_hi = math.floor(-L + lo), math.ceil(L + hi) - 1
    elif rows == "window":
        cell_lo, cell_hi = -L, L
    else:
        raise ValueError(f"rows must be 'support' or 'window', got {rows!r}")
    cell_lo = max(cell_lo, H.first_cell)
    cell_hi = min(cell_hi, H.first_cell + len(H.points) // H.M - 1)
    if cell_hi < cell_lo:
        raise ValueError("sampling set does not meet the coefficient window")
    start = (cell_lo - H.first_cell) * H.M
    stop = (cell_hi - H.first_cell + 1) * H.M
    x = H.points[start:stop]
    live = H.source[start:stop] >= 0
    row_win = IndexWindow(cell_lo * H.M, (cell_hi + 1) * H.M - 1)
    m_idx = row_win.indices
    ms, ks, vs = [], [], []
    for shift in range(math.floor(-hi), math.ceil(-lo) + 1):
        k = np.floor(x).astype(np.int64) + shift
        ok = live & cols.contains(k)
        val = g(x[ok] - k[ok])
        ms.append(m_idx[ok])
        ks.append(k[ok])
        vs.append(val)
    return SlantedMatrix.from_coo(Fraction(1, H.M), row_win, cols,
                                  np.concatenate(ms), np.concatenate(ks), np.concatenate(vs))


def stability_bound(g: Generator, X: SamplingSet | float, method: str = "auto") -> float:
    """Certified l^inf lower bound of the sampling operator.

    ``method="first"``: ``a - b'/2 * gap``; ``"second"``:
    ``a - b''/8 * gap^2``; ``"auto"`` uses the second-order form when
    ``b''`` is known.  Positive exactly when the gap condition holds.
    """
    gamma = X if isinstance(X, (int, float)) else X.gap
    if g.a is None:
        raise ValueError("generator has no lower Riesz constant a")
    if method == "auto":
        method = "second" if g.b_dprime is not None else "first"
    if method == "first":
        if g.b_prime is None:
            raise ValueError("generator has no first-derivative constant b'")
        return g.a - 0.5 * g.b_prime * gamma
    if method == "second":
        if g.b_dprime is None:
            raise ValueError("generator has no second-derivative constant b''")
        return g.a - 0.125 * g.b_dprime * gamma**2
    raise ValueError(f"unknown method {method!r}")


def _lp_norm_on_grid(values, xs, p):
    if p == math.inf:
        return float(np.abs(values).max())
    # composite midpoint rule on the (nonuniform) grid
    mids = 0.5 * (values[1:] + values[:-1])
    return float((np.sum(np.abs(mids) ** p * np.diff(xs))) ** (1.0 / p))


def riesz_check(g: Generator, p, trials: int = 32, seed: int = 0, n_coef: int = 24,
                step: float = QUAD_STEP) -> tuple[float, float]:
    """Empirical ``(m_p, M_p)``: extremes of ``||sum c_k phi_k||_Lp / ||c||_p``.

    Coefficient vectors: ``trials`` seeded Gaussian draws plus alternating
    signs, constants and a unit vector.  For ``p < inf`` the L^p norm uses
    the midpoint rule; for ``p = inf`` the max over the grid (breakpoints
    included).
    """
    if p not in (1, 2, math.inf):
        raise ValueError(f"unsupported norm index {p!r}")
    win = IndexWindow(0, n_coef - 1)
    lo, hi = g.support
    bps = np.concatenate([np.asarray(g.breakpoints) + k for k in win.indices])
    if g.kind == "bspline" and g.order == 2:
        bps = np.concatenate([bps, win.indices + 1.5])
    xs = quadrature_grid(lo, n_coef - 1 + hi, bps, step)
    rng = np.random.default_rng(seed)
    cs = [rng.standard_normal(n_coef) for _ in range(trials)]
    cs += [(-1.0) ** np.arange(n_coef), np.ones(n_coef), np.eye(n_coef)[n_coef // 2]]
    ratios = []
    for c in cs:
        f = Signal(c, g, win)(xs)
        cn = float(np.abs(c).max()) if p == math.inf else float(np.sum(np.abs(c) ** p) ** (1 / p))
        ratios.append(_lp_norm_on_grid(f, xs, p) / cn)
    return min(ratios), max(ratios)


def sample(f: Signal, X: SamplingSet) -> np.ndarray:
    return f(X.points)


def reconstruct_from_samples(g: Generator, X: SamplingSet, samples, L: int) -> Signal:
    """Least-squares coefficients on ``{-L..L}`` from samples at ``X``.

    Samples outside the support of the window's translates are ignored.
    Warns (does not fail) when the gap condition does not certify stability;
    raises :class:`NearSingular` when the system is numerically singular.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (len(X),):
        raise ValueError("one sample per point expected")
    if g.a is not None and (g.b_prime is not None or g.b_dprime is not None):
        if stability_bound(g, X) <= 0:
            warnings.warn(f"gap {X.gap:.4g} does not certify stable sampling", RuntimeWarning)
    H = homogenize(X)
    A = build_sampling_matrix(g, H, L, rows="support")
    first = A.rows.lo - H.rows.lo
    y = H.spread(samples)[first:first + A.rows.size]
    c = left_inverse(A).solve(y)
    return Signal(c, g, IndexWindow.centered(L))


def generate_jittered_set(h: float, jitter: float, lo: float, hi: float, seed: int = 0) -> SamplingSet:
    """``x_j = j h + u_j`` for ``j h`` in ``[lo, hi]``, ``u_j ~ U[-jitter, jitter]``.

    Gap is at most ``h + 2 jitter`` and separation at least ``h - 2 jitter``.
    """
    if h <= 0:
        raise ValueError("spacing h must be positive")
    if not 0 <= jitter < h / 2:
        raise ValueError("jitter must satisfy 0 <= jitter < h/2")
    j = np.arange(math.ceil(lo / h), math.floor(hi / h) + 1)
    rng = np.random.default_rng(seed)
    u = rng.uniform(-jitter, jitter, size=j.size)
    return SamplingSet(j * h + u)
