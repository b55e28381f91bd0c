from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slanted.checks import SLANTS, random_slanted
from slanted.slant_core import (
    IndexWindow,
    Slant,
    SlantedMatrix,
    Weight,
    adjoint,
    apply,
    compose,
    compose_band,
    interior_rows,
    load_matrix,
    operator_norm,
    save_matrix,
    slant_extract,
    slant_norm,
    sup_norm,
    truncate,
    weight_predicates,
)

INF = math.inf

slopes = st.sampled_from(SLANTS)
seeds = st.integers(0, 2**32 - 1)


def doubling(L=6):
    """a_{m,2m} = 1: slope 2, everything on slant 0."""
    w = IndexWindow.centered(L)
    m = np.arange(-L, L + 1)
    keep = np.abs(2 * m) <= L
    return SlantedMatrix.from_coo(2, w, w, m[keep], 2 * m[keep], np.ones(keep.sum()))


# --- Slant ------------------------------------------------------------------

def test_slant_normalizes():
    s = Slant(4, -6)
    assert (s.numerator, s.denominator) == (-2, 3)
    assert Slant.of("3/2") == Slant(3, 2)
    assert s.inverse() == Slant(-3, 2)
    with pytest.raises(ValueError):
        Slant(0, 3)
    with pytest.raises(ValueError):
        Slant(1, 0)
    with pytest.raises(TypeError):
        Slant.of(0.5)


def test_K_values():
    assert Slant.of(1).K() == 1
    assert Slant.of(2).K() == 1
    assert Slant.of(Fraction(1, 3)).K() == 3
    assert Slant.of(Fraction(2, 3)).K() == 2
    assert Slant.of(Fraction(-1, 2)).K(d=2) == 4


@given(slopes, st.integers(-10**6, 10**6), st.integers(-10**6, 10**6))
def test_slant_index_is_exact(alpha, m, n):
    j = Slant.of(alpha).slant_index(m, n)
    assert j <= alpha * m - n < j + 1


# --- windows and weights ----------------------------------------------------

def test_window_basics():
    w = IndexWindow.centered(3)
    assert w.size == 7 and w.half_width == 3
    assert list(w.indices) == [-3, -2, -1, 0, 1, 2, 3]
    assert list(w.interior(2)) == [False, False, True, True, True, False, False]
    assert w.contains(np.array([-4, 0, 3])).tolist() == [False, True, True]


@given(st.floats(0, 6), st.floats(0, 2), st.floats(0, 1), st.integers(-500, 500))
def test_weight_at_least_one_and_even(s, a, b, n):
    w = Weight(s, a, b)
    assert w(n) >= 1
    assert w(n) == w(-n)


def test_weight_predicates():
    win = IndexWindow.centered(20)
    rep = weight_predicates(Weight.polynomial(3), win)
    assert rep.submultiplicative_constant <= 1 + 1e-12
    rep = weight_predicates(Weight.exponential(1.0, 1.0), win)
    # e^{|n|}: omega(2n)/omega(n) = e^{|n|}, unbounded
    assert rep.balanced_ratios[2] == pytest.approx(math.exp(20))
    rep = weight_predicates(Weight.exponential(0.5, 0.5, 3), win)
    ms = sorted(rep.grs_ratios)
    vals = [rep.grs_ratios[m] for m in ms]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1.01


# --- construction and extraction --------------------------------------------

def test_from_coo_rejects_columns_outside_window():
    w = IndexWindow.centered(2)
    with pytest.raises(ValueError):
        SlantedMatrix.from_coo(1, w, w, [0], [5], [1.0])


def test_identity_extract_and_truncate():
    I = SlantedMatrix.identity(4)
    assert I.slant_indices == [0]
    assert np.array_equal(slant_extract(I, 0).to_dense(), np.eye(9))
    assert slant_extract(I, 3).nnz() == 0
    assert np.array_equal(truncate(I, 1).to_dense(), np.eye(9))
    with pytest.raises(ValueError):
        truncate(I, 0)


def test_doubling_matrix_is_single_slant():
    A = doubling()
    assert A.slant == Slant(2)
    assert A.slant_indices == [0]
    m, n, _ = A.coo()
    assert np.array_equal(n, 2 * m)


def test_extract_three_slants():
    rng = np.random.default_rng(1)
    w = IndexWindow.centered(10)
    parts = {j: rng.uniform(1, 2, w.size) for j in (-1, 0, 2)}
    A = SlantedMatrix.from_slant_values(Fraction(3, 2), w, w, parts)
    assert set(A.slant_indices) <= {-1, 0, 2}
    for j in (-1, 0, 2):
        piece = SlantedMatrix.from_slant_values(Fraction(3, 2), w, w, {j: parts[j]})
        assert np.array_equal(slant_extract(A, j).to_dense(), piece.to_dense())
    assert set(truncate(A, 2).slant_indices) <= {-1, 0}
    assert 2 not in truncate(A, 2).slant_indices


@settings(max_examples=60, deadline=None)
@given(slopes, st.integers(1, 4), seeds)
def test_slant_partition(alpha, M, seed):
    A = random_slanted(np.random.default_rng(seed), alpha, 9, M)
    total = sum((slant_extract(A, j).to_dense() for j in A.slant_indices), np.zeros(A.shape))
    assert np.array_equal(total, A.to_dense())
    m, n, _ = A.coo()
    j = A.slant.slant_index(m, n)
    for mi, ni, ji in zip(m, n, j):
        assert ji <= alpha * int(mi) - int(ni) < ji + 1
        assert abs(ji) <= M - 1


# --- norms ------------------------------------------------------------------

def test_norm_examples():
    I = SlantedMatrix.identity(5)
    assert sup_norm(I) == 1
    assert slant_norm(I, Weight.polynomial(5)) == 1
    w = IndexWindow.centered(8)
    A = SlantedMatrix.from_slant_values(1, w, w, {2: np.full(w.size, 0.5)})
    assert slant_norm(A, Weight.polynomial(5)) == pytest.approx(121.5)


@settings(max_examples=60, deadline=None)
@given(slopes, st.integers(1, 4), seeds)
def test_norm_chain(alpha, M, seed):
    A = random_slanted(np.random.default_rng(seed), alpha, 9, M, integer=False)
    unit = slant_norm(A)
    assert slant_norm(A, Weight.polynomial(2)) >= unit
    for p in (1, 2, INF):
        assert operator_norm(A, p) <= unit + 1e-12


@settings(max_examples=40, deadline=None)
@given(slopes, st.integers(1, 5), st.floats(0.5, 6), seeds)
def test_truncation_tail_bound(alpha, M, s, seed):
    A = random_slanted(np.random.default_rng(seed), alpha, 10, 6, integer=False)
    tail = slant_norm(SlantedMatrix(A.slant, A.rows, A.cols,
                                    {j: v for j, v in A.slants.items() if abs(j) > M - 1}))
    assert tail <= slant_norm(A, Weight.polynomial(s)) * M ** (-s) + 1e-12


# --- composition and adjoint ------------------------------------------------

@settings(max_examples=80, deadline=None)
@given(slopes, slopes, st.integers(1, 3), st.integers(1, 3), seeds)
def test_compose_matches_dense_and_band(a, b, M1, M2, seed):
    rng = np.random.default_rng(seed)
    A = random_slanted(rng, a, 8, M1)
    B = random_slanted(rng, b, 8, M2)
    C = compose(A, B)
    assert C.slant.fraction == a * b
    assert np.array_equal(C.to_dense(), A.to_dense() @ B.to_dense())
    if C.slant_indices:
        lo, hi = compose_band(a, A.slant_range, b, B.slant_range)
        assert lo <= min(C.slant_indices) and max(C.slant_indices) <= hi
        # the looser band width stated for the product
        width = M1 * math.ceil(abs(b)) + M2 + math.ceil(abs(b)) + 2
        assert max(abs(j) for j in C.slant_indices) <= width


def test_compose_identity_and_half_times_three():
    rng = np.random.default_rng(5)
    A = random_slanted(rng, Fraction(3, 2), 10, 3)
    I = SlantedMatrix.identity(10)
    assert np.array_equal(compose(I, A).to_dense(), A.to_dense())
    H = random_slanted(rng, Fraction(1, 2), 10, 2)
    T = random_slanted(rng, 3, 10, 2)
    C = compose(H, T)
    assert C.slant == Slant(3, 2)
    lo, hi = compose_band(Fraction(1, 2), H.slant_range, 3, T.slant_range)
    assert lo <= min(C.slant_indices) and max(C.slant_indices) <= hi


def test_compose_band_values():
    # 3 (m/2 - k) + (3k - n) with both brackets in [0, 1): indices 0..3
    assert compose_band(Fraction(1, 2), (0, 0), 3, (0, 0)) == (0, 3)
    # real-valued bound; contains the integer answer 0 at alpha = 1
    lo, hi = compose_band(1, (0, 0), 1, (0, 0))
    assert lo == 0 and hi <= 1
    assert compose_band(-2, (-1, 1), Fraction(1, 2), (0, 0)) == (-1, 1)


def test_compose_rejects_mismatch():
    with pytest.raises(ValueError):
        compose(SlantedMatrix.identity(3), SlantedMatrix.identity(4))


def test_doubling_with_adjoint():
    A = doubling()
    At = adjoint(A)
    assert At.slant == Slant(1, 2)
    m, n, _ = At.coo()
    assert np.array_equal(m, 2 * n)
    assert compose(A, At).slant == Slant(1)
    assert compose(At, A).slant == Slant(1)
    assert np.array_equal(compose(A, At).to_dense(), A.to_dense() @ A.to_dense().T)


@settings(max_examples=60, deadline=None)
@given(slopes, st.integers(1, 4), seeds)
def test_adjoint_involution_and_norm(alpha, M, seed):
    A = random_slanted(np.random.default_rng(seed), alpha, 9, M, integer=False)
    At = adjoint(A)
    assert At.slant.fraction == 1 / alpha
    assert np.array_equal(At.to_dense(), A.to_dense().T)
    assert np.array_equal(adjoint(At).to_dense(), A.to_dense())
    # the transpose's slant norm, recomputed entrywise at slope 1/alpha
    m, n, v = A.coo()
    j = At.slant.slant_index(n, m)
    by_j = {}
    for jj, vv in zip(j, np.abs(v)):
        by_j[int(jj)] = max(by_j.get(int(jj), 0.0), vv)
    expect = At.slant.K() * sum(by_j.values())
    assert slant_norm(At) == pytest.approx(expect, rel=1e-12)


def test_adjoint_identity():
    I = SlantedMatrix.identity(4)
    assert np.array_equal(adjoint(I).to_dense(), I.to_dense())


# --- apply ------------------------------------------------------------------

def test_apply_examples():
    x = np.arange(9.0)
    assert np.array_equal(apply(SlantedMatrix.identity(4), x), x)
    A = doubling(4)
    y = apply(A, x)
    for r, m in enumerate(range(-4, 5)):
        assert y[r] == (x[2 * m + 4] if abs(2 * m) <= 4 else 0)
    with pytest.raises(ValueError):
        apply(A, np.ones(5))


@settings(max_examples=60, deadline=None)
@given(slopes, seeds, st.floats(-5, 5), st.floats(-5, 5))
def test_apply_linear_and_dense(alpha, seed, a, b):
    rng = np.random.default_rng(seed)
    A = random_slanted(rng, alpha, 9, 3, integer=False)
    x, y = rng.standard_normal((2, A.cols.size))
    lhs = apply(A, a * x + b * y)
    rhs = a * apply(A, x) + b * apply(A, y)
    scale = max(1.0, np.abs(lhs).max())
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale * (abs(a) + abs(b) + 1)
    dense = A.to_dense() @ x
    assert np.allclose(apply(A, x), dense, rtol=1e-12, atol=1e-12)
    X = rng.standard_normal((A.cols.size, 3))
    assert np.allclose(apply(A, X), A.to_dense() @ X, rtol=1e-12, atol=1e-12)


def test_interior_rows_band_fits():
    A = random_slanted(np.random.default_rng(2), 2, 10, 2)
    mask = interior_rows(A)
    base = A.slant.floor_times(A.rows.indices[mask])
    assert np.all(np.abs(base + 1) <= 10) and np.all(np.abs(base - 1) <= 10)
    assert mask.sum() < A.rows.size


# --- text format ------------------------------------------------------------

def test_save_load_roundtrip(tmp_path):
    A = random_slanted(np.random.default_rng(3), Fraction(-3, 2), 7, 3, integer=False)
    path = tmp_path / "a.txt"
    save_matrix(A, path)
    B = load_matrix(path)
    assert B.slant == A.slant
    assert np.array_equal(B.to_dense(), A.to_dense())
    assert path.read_text().splitlines()[0] == "slanted v1 -3 2 1 7"


def test_load_rejects_bad_input(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("slanted v1 1 1 1 2\n0 0 1.0\n0 0 2.0\n")
    with pytest.raises(ValueError, match="duplicate"):
        load_matrix(p)
    p.write_text("slanted v2 1 1 1 2\n")
    with pytest.raises(ValueError):
        load_matrix(p)
    p.write_text("slanted v1 1 1 1 2\n0 7 1.0\n")
    with pytest.raises(ValueError):
        load_matrix(p)
