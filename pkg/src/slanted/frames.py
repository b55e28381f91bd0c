"""Frames given by slanted analysis operators.

The analysis operator ``T`` of a system of rows ``phi^n`` is stored as a
:class:`SlantedMatrix`; ``T`` is left invertible on the section iff
``T*T`` is, and the canonical left inverse ``(T*T)^-1 T*`` reconstructs a
signal from its frame coefficients.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .bb_analysis import estimate_kappa
from .slant_core import SlantedMatrix, adjoint, compose, operator_norm

__all__ = [
    "NearSingular",
    "FrameSystem",
    "LeftInverse",
    "frame_operator",
    "left_inverse",
    "reconstruct",
    "dual_frame_rows",
    "DecayReport",
    "inverse_slant_decay",
    "FrameBounds",
    "p_frame_bounds",
]

RANK_TOL = 1e-10


class NearSingular(ArithmeticError):
    """The section's normal matrix ``A*A`` is singular to working tolerance."""


@dataclass(frozen=True)
class FrameSystem:
    """Rows of ``T`` are the frame elements; ``T f`` gives the coefficients."""

    T: SlantedMatrix

    @property
    def window(self):
        return self.T.cols

    def analysis(self, f) -> np.ndarray:
        return self.T @ np.asarray(f, dtype=float)

    def synthesis(self, c) -> np.ndarray:
        return adjoint(self.T) @ np.asarray(c, dtype=float)


def frame_operator(F: FrameSystem | SlantedMatrix) -> SlantedMatrix:
    """``T* T``, always stored at slant 1."""
    T = F.T if isinstance(F, FrameSystem) else F
    return compose(adjoint(T), T)


class LeftInverse:
    """Least-squares solver for ``A``: ``y -> (A*A)^-1 A* y``.

    Factorizes once with column-pivoted QR; the object is not mutated after
    construction, so concurrent ``solve`` calls are safe.
    """

    def __init__(self, A: SlantedMatrix, reg_tol: float = 1e-12):
        self.A = A
        dense = A.to_dense()
        nrows, ncols = dense.shape
        if nrows < ncols:
            raise NearSingular(f"{nrows} rows cannot determine {ncols} unknowns")
        Q, R, piv = scipy.linalg.qr(dense, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > RANK_TOL * diag[0])) if diag.size and diag[0] > 0 else 0
        if rank < ncols:
            raise NearSingular(f"numerical rank {rank} < {ncols} (tolerance {RANK_TOL:g})")
        smin = scipy.linalg.svdvals(R)[-1]
        self.min_eigenvalue = float(smin**2)
        if self.min_eigenvalue <= reg_tol:
            raise NearSingular(f"smallest eigenvalue of A*A is {self.min_eigenvalue:.3g} <= {reg_tol:g}")
        self._Q, self._R, self._piv = Q, R, piv
        self._Q.setflags(write=False)
        self._R.setflags(write=False)

    def solve(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        z = scipy.linalg.solve_triangular(self._R, self._Q.T @ y)
        x = np.empty_like(z)
        x[self._piv] = z
        return x

    __call__ = solve

    def matrix(self) -> np.ndarray:
        """Dense ``A^# = (A*A)^-1 A*`` (columns x rows)."""
        return self.solve(np.eye(self.A.rows.size))


def left_inverse(A: SlantedMatrix, reg_tol: float = 1e-12) -> LeftInverse:
    return LeftInverse(A, reg_tol)


def reconstruct(F: FrameSystem, f) -> np.ndarray:
    """``T^# T f``."""
    return left_inverse(F.T).solve(F.analysis(f))


def dual_frame_rows(F: FrameSystem) -> FrameSystem:
    """Canonical dual ``phi~^n = (T*T)^-1 phi^n`` as a new frame system.

    The dual analysis matrix is ``T (T*T)^-1`` at the same slant as ``T``.
    """
    T = F.T
    Td = T.to_dense()
    S = Td.T @ Td
    try:
        cho = scipy.linalg.cho_factor(S)
    except np.linalg.LinAlgError as exc:
        raise NearSingular("frame operator is not positive definite") from exc
    dual = scipy.linalg.cho_solve(cho, Td.T).T
    return FrameSystem(SlantedMatrix.from_dense(T.slant.fraction, dual, T.rows, T.cols))


@dataclass(frozen=True)
class DecayReport:
    """Slant sup norms of a left inverse, restricted to interior rows."""

    slant_sup_norms: dict
    abs_sup_norms: dict
    geometric_ratio: float
    polynomial_exponent: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "slant_sup_norm"])
        for j in sorted(self.slant_sup_norms):
            w.writerow([j, f"{self.slant_sup_norms[j]:.12g}"])
        return buf.getvalue()


def inverse_slant_decay(A: SlantedMatrix, interior_margin: int, fit_max: int = 10,
                        floor: float = 1e-14, reg_tol: float = 1e-12) -> DecayReport:
    """Slant decay of ``A^# = (A*A)^-1 A*``, read at slant ``1/alpha``.

    Only rows of ``A^#`` at least ``interior_margin`` from the window edges
    count.  The geometric ratio is ``exp`` of the slope of a least-squares
    line through ``log ||A^#_j||`` against ``|j|`` for ``1 <= |j| <= fit_max``
    (values below ``floor`` are ignored); the polynomial exponent is minus
    the slope against ``log(1 + |j|)`` over the same points.
    """
    dense = A.to_dense()
    S = dense.T @ dense
    evals = scipy.linalg.eigvalsh(S)
    if evals[0] <= reg_tol:
        raise NearSingular(f"smallest eigenvalue of A*A is {evals[0]:.3g}")
    inv = scipy.linalg.solve(S, dense.T, assume_a="pos")
    # rows of A^# are indexed by A's columns; keep only interior ones
    inv = inv * A.cols.interior(interior_margin)[:, None]
    Ainv = SlantedMatrix.from_dense(A.slant.inverse().fraction, inv, A.cols, A.rows)
    signed = Ainv.slant_sup_norms()
    by_abs: dict[int, float] = {}
    for j, v in signed.items():
        by_abs[abs(j)] = max(by_abs.get(abs(j), 0.0), v)
    pts = [(j, v) for j, v in sorted(by_abs.items()) if 1 <= j <= fit_max and v > floor]
    if len(pts) >= 2:
        js = np.array([p[0] for p in pts], dtype=float)
        logs = np.log([p[1] for p in pts])
        ratio = float(np.exp(np.polyfit(js, logs, 1)[0]))
        expo = float(-np.polyfit(np.log1p(js), logs, 1)[0])
    else:
        ratio, expo = 0.0, math.inf
    return DecayReport(signed, by_abs, ratio, expo)


@dataclass(frozen=True)
class FrameBounds:
    """Lower and upper frame bounds in two normalizations.

    ``operator``: ``a <= ||T f|| / ||f|| <= b``.
    ``power``: the same raised to the p-th power (for ``p = inf`` the two
    coincide), matching ``a ||f||^p <= sum |<f, phi^n>|^p <= b ||f||^p``.
    """

    p: float
    a_operator: float
    b_operator: float

    @property
    def a_power(self) -> float:
        return self.a_operator if self.p == math.inf else self.a_operator**self.p

    @property
    def b_power(self) -> float:
        return self.b_operator if self.p == math.inf else self.b_operator**self.p

    def to_csv(self) -> str:
        p = "inf" if self.p == math.inf else f"{self.p:g}"
        lines = ["p,a_est,b_est,convention",
                 f"{p},{self.a_operator:.12g},{self.b_operator:.12g},operator",
                 f"{p},{self.a_power:.12g},{self.b_power:.12g},power"]
        return "\n".join(lines) + "\n"


def p_frame_bounds(F: FrameSystem | SlantedMatrix, p, trials: int = 4, seed: int = 0,
                   rows=None, cols=None) -> FrameBounds:
    """Upper bound: exact section norm.  Lower bound: :func:`estimate_kappa`."""
    T = F.T if isinstance(F, FrameSystem) else F
    if p not in (1, 2, math.inf):
        raise ValueError(f"unsupported norm index {p!r}")
    b = operator_norm(T, p, rows=rows, cols=cols)
    a = estimate_kappa(T, p, trials=trials, seed=seed, rows=rows, cols=cols)
    return FrameBounds(p, a, b)
