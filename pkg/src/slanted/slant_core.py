"""Finite sections of slanted matrices.

A matrix is alpha-slanted when its nonzero entries sit near the line
``n = alpha * m``.  Entry ``(m, n)`` belongs to slant index ``j`` when
``j <= alpha*m - n < j + 1``; for integer ``n`` this is simply
``j = floor(alpha*m) - n``, which we evaluate with integer arithmetic so
entries on a slant boundary are never misclassified.

Storage is per slant: for each slant index we keep one value per row.  The
column of that value is implied by the row and the slant index, so a matrix
with ``S`` slants over ``R`` rows costs ``O(S * R)`` memory and the same for
a matrix-vector product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Slant",
    "IndexWindow",
    "Weight",
    "WeightReport",
    "SlantedMatrix",
    "slant_extract",
    "truncate",
    "sup_norm",
    "slant_norm",
    "compose",
    "compose_band",
    "adjoint",
    "apply",
    "operator_norm",
    "interior_rows",
    "weight_predicates",
    "load_matrix",
    "save_matrix",
]


@dataclass(frozen=True)
class Slant:
    """A nonzero rational slope ``alpha = numerator / denominator``."""

    numerator: int
    denominator: int = 1

    def __post_init__(self):
        if self.denominator == 0:
            raise ValueError("slant denominator must be nonzero")
        if self.numerator == 0:
            raise ValueError("slant must be nonzero")
        frac = Fraction(int(self.numerator), int(self.denominator))
        object.__setattr__(self, "numerator", frac.numerator)
        object.__setattr__(self, "denominator", frac.denominator)

    @classmethod
    def of(cls, value) -> "Slant":
        """Build from an int, Fraction, ``"p/q"`` string or another Slant."""
        if isinstance(value, Slant):
            return value
        if isinstance(value, float):
            raise TypeError("slants must be exact; pass a Fraction or 'p/q' string")
        frac = Fraction(value)
        return cls(frac.numerator, frac.denominator)

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    @property
    def beta(self) -> Fraction:
        return 1 / self.fraction

    def K(self, d: int = 1) -> int:
        """``ceil(|beta|)**d``, the row multiplicity of a single slant."""
        return math.ceil(abs(self.beta)) ** d

    def inverse(self) -> "Slant":
        return Slant(self.denominator, self.numerator)

    def __mul__(self, other: "Slant") -> "Slant":
        f = self.fraction * Slant.of(other).fraction
        return Slant(f.numerator, f.denominator)

    def __float__(self) -> float:
        return self.numerator / self.denominator

    def floor_times(self, m):
        """``floor(alpha * m)`` for integer scalars or integer arrays."""
        return (self.numerator * m) // self.denominator

    def slant_index(self, m, n):
        """Exact slant index ``j`` with ``j <= alpha*m - n < j + 1``."""
        return self.floor_times(m) - n

    def __str__(self):
        if self.denominator == 1:
            return str(self.numerator)
        return f"{self.numerator}/{self.denominator}"


@dataclass(frozen=True)
class IndexWindow:
    """Contiguous integer index range ``{lo, ..., hi}`` in dimension ``d``.

    Matrix machinery only supports ``d == 1``; ``d`` is carried so bound
    formulas can be reported for general dimension.
    """

    lo: int
    hi: int
    d: int = 1

    def __post_init__(self):
        if self.hi < self.lo:
            raise ValueError(f"empty window [{self.lo}, {self.hi}]")
        if self.d < 1:
            raise ValueError("dimension must be positive")

    @classmethod
    def centered(cls, L: int, d: int = 1) -> "IndexWindow":
        if L < 0:
            raise ValueError("half width must be nonnegative")
        return cls(-L, L, d)

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def half_width(self) -> int | None:
        return self.hi if self.lo == -self.hi else None

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def contains(self, idx):
        return (idx >= self.lo) & (idx <= self.hi)

    def position(self, idx):
        return idx - self.lo

    def interior(self, margin: int) -> np.ndarray:
        """Boolean mask of indices at distance >= margin from both edges."""
        k = self.indices
        return (k - self.lo >= margin) & (self.hi - k >= margin)


@dataclass(frozen=True)
class Weight:
    """``omega(n) = exp(a*|n|**b) * (1 + |n|)**s``.

    ``kind`` is ``"polynomial"`` when ``a == 0`` and ``"exponential"``
    otherwise.  ``Weight.unit()`` is the constant weight 1.
    """

    s: float = 0.0
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if min(self.s, self.a, self.b) < 0:
            raise ValueError("weight parameters must be nonnegative")

    @classmethod
    def unit(cls) -> "Weight":
        return cls()

    @classmethod
    def polynomial(cls, s: float) -> "Weight":
        return cls(s=s)

    @classmethod
    def exponential(cls, a: float, b: float, s: float = 0.0) -> "Weight":
        return cls(s=s, a=a, b=b)

    @property
    def kind(self) -> str:
        return "exponential" if self.a > 0 else "polynomial"

    def log(self, n):
        n = np.abs(np.asarray(n, dtype=float))
        return self.a * n**self.b + self.s * np.log1p(n)

    def __call__(self, n):
        return np.exp(self.log(n))


@dataclass(frozen=True)
class WeightReport:
    """Window-limited numeric evidence about a weight's class.

    Nothing here is a proof: every quantity is a max or a sample over the
    window that was checked.
    """

    submultiplicative_constant: float
    grs_ratios: dict
    balanced_ratios: dict
    window: IndexWindow


def weight_predicates(
    weight: Weight,
    window: IndexWindow,
    grs_n: int = 1,
    grs_m_max: int = 10_000,
    balance_k: Iterable[int] = (2, 3, 4),
) -> WeightReport:
    """Check submultiplicativity, GRS and balance of ``weight`` on ``window``.

    * the smallest ``C`` with ``omega(m+n) <= C omega(m) omega(n)`` for all
      ``m, n`` in the window,
    * ``omega(m * grs_n) ** (1/m)`` at log-spaced ``m <= grs_m_max``,
    * ``max_n omega(k n) / omega(n)`` over the window for each ``k``.
    """
    k = window.indices.astype(float)
    logw = weight.log
    lw = logw(k)
    log_ratio = logw(k[:, None] + k[None, :]) - lw[:, None] - lw[None, :]
    submult = float(np.exp(log_ratio.max()))

    ms = np.unique(np.geomspace(1, grs_m_max, 40).astype(int))
    grs = {int(m): float(np.exp(logw(m * grs_n) / m)) for m in ms}

    balanced = {int(kk): float(np.exp((logw(kk * k) - lw).max())) for kk in balance_k}
    return WeightReport(submult, grs, balanced, window)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SlantedMatrix:
    """Finite section of an alpha-slanted matrix over real scalars.

    ``slants[j][r]`` is the entry in row ``rows.lo + r`` at column
    ``floor(alpha*m) - j``.  Entries whose column would fall outside
    ``cols`` are zero (finite-section semantics), and every stored slant has
    at least one nonzero.
    """

    slant: Slant
    rows: IndexWindow
    cols: IndexWindow
    slants: Mapping[int, np.ndarray] = field(repr=False)

    def __post_init__(self):
        if self.rows.d != 1 or self.cols.d != 1:
            raise ValueError("matrix storage is implemented for d = 1 only")
        clean = {}
        m = self.rows.indices
        base = self.slant.floor_times(m)
        for j in sorted(self.slants):
            v = np.asarray(self.slants[j], dtype=float)
            if v.shape != (self.rows.size,):
                raise ValueError(f"slant {j} has shape {v.shape}, expected ({self.rows.size},)")
            inside = self.cols.contains(base - j)
            if np.any(v[~inside] != 0):
                raise ValueError(f"slant {j} has entries outside the column window")
            if np.any(v != 0):
                clean[int(j)] = _frozen(v.copy())
        object.__setattr__(self, "slants", clean)

    # construction -----------------------------------------------------

    @classmethod
    def from_coo(cls, alpha, rows: IndexWindow, cols: IndexWindow, m, n, values) -> "SlantedMatrix":
        """Build from coordinate triplets; duplicates are summed."""
        slant = Slant.of(alpha)
        m = np.asarray(m, dtype=np.int64).ravel()
        n = np.asarray(n, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if not (m.shape == n.shape == values.shape):
            raise ValueError("m, n and values must have equal length")
        if np.any(~rows.contains(m)) or np.any(~cols.contains(n)):
            raise ValueError("entry outside the index window")
        keep = values != 0
        m, n, values = m[keep], n[keep], values[keep]
        j = slant.slant_index(m, n)
        uniq, inv = np.unique(j, return_inverse=True)
        table = np.zeros((len(uniq), rows.size))
        np.add.at(table, (inv, rows.position(m)), values)
        return cls(slant, rows, cols, {int(u): table[i] for i, u in enumerate(uniq)})

    @classmethod
    def from_dense(cls, alpha, dense, rows: IndexWindow | None = None, cols: IndexWindow | None = None) -> "SlantedMatrix":
        dense = np.asarray(dense, dtype=float)
        if dense.ndim != 2:
            raise ValueError("dense matrix must be 2-D")
        rows = rows or _default_window(dense.shape[0])
        cols = cols or _default_window(dense.shape[1])
        if dense.shape != (rows.size, cols.size):
            raise ValueError("dense shape does not match windows")
        r, c = np.nonzero(dense)
        return cls.from_coo(alpha, rows, cols, r + rows.lo, c + cols.lo, dense[r, c])

    @classmethod
    def from_slant_values(cls, alpha, rows: IndexWindow, cols: IndexWindow, slants: Mapping[int, np.ndarray]) -> "SlantedMatrix":
        """Like the constructor, but silently drops entries whose column is
        outside ``cols``.  Use this to cut a finite section out of a matrix
        defined slant by slant on all of Z."""
        slant = Slant.of(alpha)
        base = slant.floor_times(rows.indices)
        clipped = {}
        for j, v in slants.items():
            v = np.array(v, dtype=float)
            v[~cols.contains(base - j)] = 0.0
            clipped[j] = v
        return cls(slant, rows, cols, clipped)

    @classmethod
    def identity(cls, L: int) -> "SlantedMatrix":
        w = IndexWindow.centered(L)
        return cls(Slant(1), w, w, {0: np.ones(w.size)})

    @classmethod
    def zeros(cls, alpha, rows: IndexWindow, cols: IndexWindow) -> "SlantedMatrix":
        return cls(Slant.of(alpha), rows, cols, {})

    # views --------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows.size, self.cols.size)

    @property
    def slant_indices(self) -> list[int]:
        return list(self.slants)

    @property
    def slant_range(self) -> tuple[int, int] | None:
        if not self.slants:
            return None
        return min(self.slants), max(self.slants)

    @property
    def M(self) -> int:
        """Smallest ``M`` with the matrix in the class F_alpha^M."""
        if not self.slants:
            return 1
        return max(abs(j) for j in self.slants) + 1

    def columns_of(self, j: int) -> np.ndarray:
        return self.slant.floor_times(self.rows.indices) - j

    def coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nonzero entries as ``(m, n, value)`` arrays."""
        ms, ns, vs = [], [], []
        m = self.rows.indices
        for j, v in self.slants.items():
            nz = v != 0
            ms.append(m[nz])
            ns.append(self.columns_of(j)[nz])
            vs.append(v[nz])
        if not ms:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, np.zeros(0)
        return np.concatenate(ms), np.concatenate(ns), np.concatenate(vs)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        m, n, v = self.coo()
        out[self.rows.position(m), self.cols.position(n)] = v
        return out

    def nnz(self) -> int:
        return sum(int(np.count_nonzero(v)) for v in self.slants.values())

    def sup_norm(self) -> float:
        if "_sup" not in self.__dict__:
            sup = max((float(np.abs(v).max()) for v in self.slants.values()), default=0.0)
            object.__setattr__(self, "_sup", sup)
        return self.__dict__["_sup"]

    def slant_sup_norms(self) -> dict[int, float]:
        return {j: float(np.abs(v).max()) for j, v in self.slants.items()}

    def __matmul__(self, other):
        if isinstance(other, SlantedMatrix):
            return compose(self, other)
        return apply(self, other)

    def __repr__(self):
        return (f"SlantedMatrix(alpha={self.slant}, rows=[{self.rows.lo},{self.rows.hi}], "
                f"cols=[{self.cols.lo},{self.cols.hi}], slants={self.slant_range})")


def _default_window(size: int) -> IndexWindow:
    if size % 2 == 1:
        return IndexWindow.centered(size // 2)
    return IndexWindow(0, size - 1)


def slant_extract(A: SlantedMatrix, j: int) -> SlantedMatrix:
    """The single-slant matrix ``A_j`` (zero if ``j`` is not stored)."""
    picked = {j: A.slants[j]} if j in A.slants else {}
    return SlantedMatrix(A.slant, A.rows, A.cols, picked)


def truncate(A: SlantedMatrix, M: int) -> SlantedMatrix:
    """``A_M``: the sum of the slants with ``|j| <= M - 1``."""
    if M < 1:
        raise ValueError("truncation width M must be >= 1")
    return SlantedMatrix(A.slant, A.rows, A.cols,
                         {j: v for j, v in A.slants.items() if abs(j) <= M - 1})


def sup_norm(A: SlantedMatrix) -> float:
    return A.sup_norm()


def slant_norm(A: SlantedMatrix, weight: Weight | None = None) -> float:
    """``K * sum_j ||A_j||_sup * omega(j)`` with ``K = ceil(|1/alpha|)``."""
    weight = weight or Weight.unit()
    K = A.slant.K(A.rows.d)
    sups = A.slant_sup_norms()
    if not sups:
        return 0.0
    js = np.array(list(sups))
    return float(K * np.sum(np.array(list(sups.values())) * weight(js)))


def compose(A: SlantedMatrix, B: SlantedMatrix) -> SlantedMatrix:
    """Product ``AB`` of finite sections, stored at slant ``alpha * alpha~``.

    Computed slant pair by slant pair: row ``m`` of ``A_ja`` hits column
    ``k = floor(alpha m) - ja`` which in ``B_jb`` hits ``floor(alpha~ k) - jb``.
    """
    if A.cols != B.rows:
        raise ValueError(f"inner windows differ: {A.cols} vs {B.rows}")
    slant = A.slant * B.slant
    m = A.rows.indices
    ms, ns, vs = [], [], []
    for ja, va in A.slants.items():
        k = A.columns_of(ja)
        live = va != 0
        mk, kk, vk = m[live], k[live], va[live]
        pos = B.rows.position(kk)
        for jb, vb in B.slants.items():
            bval = vb[pos]
            nz = bval != 0
            if not nz.any():
                continue
            ms.append(mk[nz])
            ns.append(B.slant.floor_times(kk[nz]) - jb)
            vs.append(vk[nz] * bval[nz])
    if not ms:
        return SlantedMatrix.zeros(slant, A.rows, B.cols)
    return SlantedMatrix.from_coo(slant, A.rows, B.cols,
                                  np.concatenate(ms), np.concatenate(ns), np.concatenate(vs))


def compose_band(alpha, slant_range_a, alpha_tilde, slant_range_b) -> tuple[int, int]:
    """Inclusive slant-index range that can hold nonzeros of ``AB``.

    Uses ``alpha alpha~ m - n = alpha~ (alpha m - k) + (alpha~ k - n)`` with
    each bracket confined to its factor's half-open slant band.
    """
    at = Slant.of(alpha_tilde).fraction
    ja0, ja1 = slant_range_a
    jb0, jb1 = slant_range_b
    ends = [at * ja0, at * (ja1 + 1)]
    lo = min(ends) + jb0
    hi = max(ends) + jb1 + 1
    # the supremum is never attained, so the top slant is ceil(hi) - 1
    return math.floor(lo), math.ceil(hi) - 1


def adjoint(A: SlantedMatrix) -> SlantedMatrix:
    """Transpose, stored at slant ``1 / alpha``."""
    m, n, v = A.coo()
    return SlantedMatrix.from_coo(A.slant.inverse(), A.cols, A.rows, n, m, v)


def apply(A: SlantedMatrix, x) -> np.ndarray:
    """``y = A x`` by slant traversal; ``x`` is indexed by ``A.cols``."""
    x = np.asarray(x)
    if x.shape[0] != A.cols.size:
        raise ValueError(f"vector length {x.shape[0]} does not match {A.cols.size} columns")
    dtype = np.result_type(x.dtype, float)
    y = np.zeros((A.rows.size,) + x.shape[1:], dtype=dtype)
    for j, v in A.slants.items():
        cols = A.columns_of(j)
        ok = A.cols.contains(cols)
        idx = A.cols.position(cols[ok])
        if x.ndim == 1:
            y[ok] += v[ok] * x[idx]
        else:
            y[ok] += v[ok, None] * x[idx]
    return y


def interior_rows(A: SlantedMatrix, slant_range: tuple[int, int] | None = None) -> np.ndarray:
    """Mask of rows whose whole band lies inside the column window.

    For those rows the finite section agrees with the infinite matrix whose
    slants lie in ``slant_range`` (default: the stored range).
    """
    rng = slant_range or A.slant_range
    if rng is None:
        return np.ones(A.rows.size, dtype=bool)
    base = A.slant.floor_times(A.rows.indices)
    return A.cols.contains(base - rng[1]) & A.cols.contains(base - rng[0])


def operator_norm(A, p, rows=None, cols=None) -> float:
    """Brute-force ``||A||_p`` of a finite section, p in {1, 2, inf}.

    ``rows``/``cols`` are optional boolean masks restricting the section.
    """
    dense = A.to_dense() if isinstance(A, SlantedMatrix) else np.asarray(A, dtype=float)
    if rows is not None:
        dense = dense[rows]
    if cols is not None:
        dense = dense[:, cols]
    if dense.size == 0:
        return 0.0
    if p == 1:
        return float(np.abs(dense).sum(axis=0).max())
    if p in (np.inf, "inf"):
        return float(np.abs(dense).sum(axis=1).max())
    if p == 2:
        return float(np.linalg.norm(dense, 2))
    raise ValueError(f"unsupported norm index {p!r}")


# text format ------------------------------------------------------------

def save_matrix(A: SlantedMatrix, path) -> None:
    """Write ``slanted v1 <num> <den> <d> <L>`` plus one ``m n value`` line
    per nonzero.  Only square centered sections fit this header."""
    L = A.rows.half_width
    if L is None or A.rows != A.cols:
        raise ValueError("text format requires rows == cols == {-L..L}")
    m, n, v = A.coo()
    order = np.lexsort((n, m))
    with open(path, "w") as fh:
        fh.write(f"slanted v1 {A.slant.numerator} {A.slant.denominator} {A.rows.d} {L}\n")
        for i in order:
            fh.write(f"{int(m[i])} {int(n[i])} {float(v[i])!r}\n")


def load_matrix(path) -> SlantedMatrix:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 6 or header[:2] != ["slanted", "v1"]:
            raise ValueError(f"bad header in {path}: {' '.join(header)!r}")
        num, den, d, L = (int(t) for t in header[2:])
        if d != 1:
            raise ValueError("only d = 1 matrices can be loaded")
        ms, ns, vs = [], [], []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'm n value'")
            ms.append(int(parts[0]))
            ns.append(int(parts[1]))
            vs.append(float(parts[2]))
    w = IndexWindow.centered(L)
    key = list(zip(ms, ns))
    if len(set(key)) != len(key):
        raise ValueError(f"{path}: duplicate entries")
    return SlantedMatrix.from_coo(Fraction(num, den), w, w, ms, ns, vs)
