"""Invariant checks run by ``slanted verify``.

Each check returns ``(name, passed, detail)``.  They are deliberately small
so the whole corpus runs in a few seconds; the pytest suite covers the same
ground more thoroughly.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import bb_analysis as bb
from . import frames, sampling
from .slant_core import (
    IndexWindow,
    SlantedMatrix,
    Slant,
    adjoint,
    apply,
    compose,
    compose_band,
    interior_rows,
    operator_norm,
    slant_extract,
    slant_norm,
)

INF = math.inf
SLANTS = [Fraction(v) for v in ("3", "2", "3/2", "1", "1/2", "1/3")]
SLANTS += [-a for a in SLANTS]


def random_slanted(rng, alpha, L, M, integer=True, sup_one=False):
    """Random finite section of a matrix in F_alpha^M on ``{-L..L}``."""
    w = IndexWindow.centered(L)
    slants = {}
    for j in range(-(M - 1), M):
        if integer:
            v = rng.integers(-3, 4, size=w.size).astype(float)
        else:
            v = rng.uniform(-1, 1, size=w.size)
        slants[j] = v
    A = SlantedMatrix.from_slant_values(alpha, w, w, slants)
    if sup_one and A.sup_norm() > 0:
        A = SlantedMatrix(A.slant, A.rows, A.cols,
                          {j: v / A.sup_norm() for j, v in A.slants.items()})
    return A


def check_slant_partition(rng, L=12):
    ok = True
    for alpha in SLANTS:
        A = random_slanted(rng, alpha, L, 3)
        total = sum((slant_extract(A, j).to_dense() for j in A.slants), np.zeros(A.shape))
        ok &= np.array_equal(total, A.to_dense())
        m, n, _ = A.coo()
        j = Slant.of(alpha).slant_index(m, n)
        a = Fraction(alpha)
        for mi, ni, ji in zip(m, n, j):
            ok &= ji <= a * int(mi) - int(ni) < ji + 1
    return "slant partition", bool(ok), f"{len(SLANTS)} slopes"


def check_compose(rng, L=10):
    ok = True
    for _ in range(20):
        a, b = rng.choice(len(SLANTS), 2)
        A = random_slanted(rng, SLANTS[a], L, 2)
        B = random_slanted(rng, SLANTS[b], L, 2)
        C = compose(A, B)
        ok &= np.array_equal(C.to_dense(), A.to_dense() @ B.to_dense())
        if C.slants and A.slants and B.slants:
            lo, hi = compose_band(SLANTS[a], A.slant_range, SLANTS[b], B.slant_range)
            ok &= lo <= min(C.slants) and max(C.slants) <= hi
        ok &= np.array_equal(adjoint(adjoint(A)).to_dense(), A.to_dense())
    return "composition and adjoint", bool(ok), "20 random pairs"


def check_norm_chain(rng, L=10):
    worst = 0.0
    for alpha in SLANTS:
        A = random_slanted(rng, alpha, L, 3, integer=False)
        bound = slant_norm(A)
        for p in (1, 2, INF):
            worst = max(worst, operator_norm(A, p) - bound)
    return "norm chain", worst <= 1e-12, f"max excess {worst:.3g}"


def check_apply_linear(rng, L=10):
    A = random_slanted(rng, Fraction(3, 2), L, 3, integer=False)
    x, y = rng.standard_normal((2, A.cols.size))
    lhs = apply(A, 2 * x - 3 * y)
    rhs = 2 * apply(A, x) - 3 * apply(A, y)
    err = float(np.abs(lhs - rhs).max())
    dense_err = float(np.abs(apply(A, x) - A.to_dense() @ x).max())
    return "apply linearity", err <= 1e-12 and dense_err <= 1e-12, f"{err:.2g}"


def check_triple_norm(rng):
    ok = True
    for _ in range(50):
        x = rng.standard_normal(31)
        N = int(rng.integers(2, 12))
        for p in (1, 2, 3):
            t = bb.triple_norm(x, N, p)
            xp = float(np.sum(np.abs(x) ** p) ** (1 / p))
            ok &= xp - 1e-12 <= t <= (2 * N) ** (1 / p) * xp + 1e-12
        ok &= abs(bb.triple_norm(x, N, INF) - np.abs(x).max()) <= 1e-15
    return "norm equivalence", bool(ok), "50 vectors"


def check_commutator(rng):
    worst = 0.0
    for alpha in (Fraction(1, 2), 1, Fraction(3, 2), 2):
        for M in (1, 2):
            A = random_slanted(rng, alpha, 60, M, integer=False, sup_one=True)
            for q in (1, 2, INF):
                val = bb.commutator_norm(A, 0, 16, q)
                worst = max(worst, val - bb.commutator_bound(M, 16, 1.0))
    return "commutator bound", worst <= 0, f"max excess {worst:.3g}"


def check_certificate():
    I = SlantedMatrix.identity(8)
    cert = bb.certificate(I, INF, 1.0, 5, 2)
    return "identity certificate", cert.valid and cert.kappa_out > 0, f"kappa_out {cert.kappa_out:.3g}"


def check_pfander():
    w = IndexWindow.centered(20)
    A = SlantedMatrix.from_slant_values(2, w, w, {0: np.ones(w.size)})
    x = bb.pfander_witness(A, 1e-3)
    val = float(np.abs(apply(A, x)).max())
    return "approximate eigenvector", val <= 1e-3, f"||Ax|| = {val:.2g}"


def check_left_inverse(rng):
    A = random_slanted(rng, 1, 20, 2, integer=False)
    A = SlantedMatrix(A.slant, A.rows, A.cols,
                      {j: (v + 4.0 if j == 0 else v) for j, v in A.slants.items()})
    inv = frames.left_inverse(A)
    x = rng.standard_normal(A.cols.size)
    err = float(np.abs(inv.solve(apply(A, x)) - x).max() / np.abs(x).max())
    return "left inverse", err <= 1e-9, f"rel err {err:.2g}"


def check_sampling(rng):
    ok = True
    worst = math.inf
    for order, h in ((1, 0.7), (2, 0.8)):
        g = sampling.Generator.bspline(order)
        for seed in range(3):
            X = sampling.generate_jittered_set(h, 0.05, -30, 30, seed=seed)
            A = sampling.build_sampling_matrix(g, sampling.homogenize(X), 24)
            m, k, _ = A.coo()
            j = A.slant.slant_index(m, k)
            ok &= bool(np.all((j >= 0) & (j <= order)))
            bound = sampling.stability_bound(g, X)
            inner = np.abs(A.cols.indices) <= 24 - (order + 1)
            kap = bb.estimate_kappa(A, INF, trials=2, seed=seed, cols=inner)
            ok &= kap >= bound - 1e-9
            worst = min(worst, kap - bound)
    xs = rng.uniform(-50, 50, 10_000)
    for order in (1, 2):
        ks = np.arange(-55, 55)
        total = sampling.bspline_eval(order, xs[:, None] - ks[None, :]).sum(axis=1)
        ok &= bool(np.abs(total - 1).max() <= 1e-12)
    return "sampling bounds", bool(ok), f"min kappa - bound {worst:.3g}"


def run_all(seed: int = 0):
    rng = np.random.default_rng(seed)
    return [
        check_slant_partition(rng),
        check_compose(rng),
        check_norm_chain(rng),
        check_apply_linear(rng),
        check_triple_norm(rng),
        check_commutator(rng),
        check_certificate(),
        check_pfander(),
        check_left_inverse(rng),
        check_sampling(rng),
    ]


__all__ = ["run_all", "random_slanted", "SLANTS", "interior_rows"]
