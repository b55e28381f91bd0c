from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np
import pytest

from slanted import bb_analysis as bb
from slanted.frames import (
    FrameSystem,
    NearSingular,
    dual_frame_rows,
    frame_operator,
    inverse_slant_decay,
    left_inverse,
    p_frame_bounds,
    reconstruct,
)
from slanted.sampling import (
    Generator,
    SamplingSet,
    Signal,
    build_sampling_matrix,
    generate_jittered_set,
    homogenize,
    reconstruct_from_samples,
    sample,
)
from slanted.slant_core import IndexWindow, SlantedMatrix, Slant, apply

INF = math.inf


def two_copies(L):
    """Each column k hit by rows 2k and 2k+1: slope 1/2, all on slant 0."""
    cols = IndexWindow.centered(L)
    rows = IndexWindow(-2 * L, 2 * L + 1)
    k = np.repeat(cols.indices, 2)
    m = 2 * k + np.tile([0, 1], cols.size)
    return SlantedMatrix.from_coo(Fraction(1, 2), rows, cols, m, k, np.ones(m.size))


def perturbed_identity(rng, L, eps=0.2):
    w = IndexWindow.centered(L)
    sl = {0: 1 + eps * rng.uniform(-1, 1, w.size)}
    for j in (-2, -1, 1, 2):
        sl[j] = eps * 0.5 ** abs(j) * rng.uniform(-1, 1, w.size)
    return SlantedMatrix.from_slant_values(1, w, w, sl)


# --- frame operator -----------------------------------------------------------

def test_frame_operator_examples():
    I = SlantedMatrix.identity(6)
    S = frame_operator(FrameSystem(I))
    assert np.array_equal(S.to_dense(), np.eye(13))
    T = two_copies(6)
    assert T.slant_indices == [0]
    S = frame_operator(T)
    assert S.slant == Slant(1)
    assert np.array_equal(S.to_dense(), 2 * np.eye(13))


def test_frame_operator_random():
    rng = np.random.default_rng(0)
    for alpha in (Fraction(1, 2), Fraction(1, 3), 1):
        w = IndexWindow.centered(10)
        T = SlantedMatrix.from_dense(alpha, _random_tall(rng, alpha, w), _rows_for(alpha, w), w)
        S = frame_operator(T)
        assert S.slant == Slant(1)
        D = T.to_dense()
        assert np.allclose(S.to_dense(), D.T @ D, rtol=1e-13, atol=1e-13)
        lam = np.linalg.eigvalsh(S.to_dense())[0]
        assert lam == pytest.approx(bb.estimate_kappa(T, 2) ** 2, rel=1e-9)


def _rows_for(alpha, cols):
    r = int(1 / Fraction(alpha))
    return IndexWindow(cols.lo * r, cols.hi * r + r - 1)


def _random_tall(rng, alpha, cols):
    """Dense block with entries on slants 0 and 1 of slope alpha plus a strong slant 0."""
    rows = _rows_for(alpha, cols)
    s = Slant.of(alpha)
    D = np.zeros((rows.size, cols.size))
    for r, m in enumerate(rows.indices):
        for j, scale in ((0, 2.0), (1, 0.5)):
            k = s.floor_times(m) - j
            if cols.contains(k):
                D[r, cols.position(k)] = scale + 0.3 * rng.uniform(-1, 1)
    return D


# --- left inverse -------------------------------------------------------------

def test_left_inverse_examples():
    x = np.random.default_rng(1).standard_normal(11)
    inv = left_inverse(SlantedMatrix.identity(5))
    assert np.allclose(inv.matrix(), np.eye(11))
    w = IndexWindow.centered(5)
    two = SlantedMatrix.from_slant_values(1, w, w, {0: np.full(11, 2.0)})
    assert np.allclose(left_inverse(two).matrix(), 0.5 * np.eye(11))
    assert np.allclose(left_inverse(two)(x), x / 2)


def test_left_inverse_residual_and_threads():
    rng = np.random.default_rng(2)
    A = perturbed_identity(rng, 40)
    inv = left_inverse(A)
    xs = rng.standard_normal((8, A.cols.size))
    with ThreadPoolExecutor(4) as pool:
        outs = list(pool.map(lambda x: inv.solve(apply(A, x)), xs))
    for x, y in zip(xs, outs):
        assert np.abs(y - x).max() <= 1e-9 * np.abs(x).max()


def test_near_singular_detection():
    w = IndexWindow.centered(6)
    mid = SlantedMatrix.from_slant_values(1, w, w, {0: np.full(13, 0.5), 1: np.full(13, 0.5)})
    # (1/2, 1/2) rows on a square section stay invertible but weakly; zero a column
    D = mid.to_dense()
    D[:, 3] = 0
    with pytest.raises(NearSingular):
        left_inverse(SlantedMatrix.from_dense(1, D, w, w))
    wide = SlantedMatrix.from_dense(1, np.ones((3, 13)), IndexWindow.centered(1), w)
    with pytest.raises(NearSingular):
        left_inverse(wide)
    tiny = SlantedMatrix.from_slant_values(1, w, w, {0: np.full(13, 1e-7)})
    with pytest.raises(NearSingular):
        left_inverse(tiny)


def test_sampling_round_trip_hundred_vectors():
    g = Generator.bspline(1)
    X = generate_jittered_set(0.7, 0.05, -40, 40, seed=3)
    assert X.gap <= 0.8
    A = build_sampling_matrix(g, homogenize(X), 32)
    inv = left_inverse(A)
    rng = np.random.default_rng(3)
    C = rng.standard_normal((A.cols.size, 100))
    rec = inv.solve(apply(A, C))
    err = np.linalg.norm(rec - C, axis=0) / np.linalg.norm(C, axis=0)
    assert err.max() <= 1e-8


# --- reconstruction and duals ---------------------------------------------------

def test_orthonormal_and_tight_duals():
    I = FrameSystem(SlantedMatrix.identity(5))
    f = np.random.default_rng(4).standard_normal(11)
    assert np.allclose(dual_frame_rows(I).T.to_dense(), np.eye(11))
    assert np.allclose(reconstruct(I, f), f)
    T = FrameSystem(two_copies(5))
    dual = dual_frame_rows(T)
    assert np.allclose(dual.T.to_dense(), 0.5 * T.T.to_dense())
    assert dual.T.slant == T.T.slant
    assert np.allclose(reconstruct(T, f), f)


def test_two_reconstruction_formulas_agree():
    rng = np.random.default_rng(5)
    F = FrameSystem(perturbed_identity(rng, 30))
    f = rng.standard_normal(61)
    via_solver = reconstruct(F, f)
    via_dual = dual_frame_rows(F).synthesis(F.analysis(f))
    assert np.abs(via_solver - via_dual).max() <= 1e-9
    assert np.abs(via_solver - f).max() <= 1e-9


def test_dual_of_dual():
    rng = np.random.default_rng(6)
    T = SlantedMatrix.from_dense(Fraction(1, 2), _random_tall(rng, Fraction(1, 2), IndexWindow.centered(8)),
                                 _rows_for(Fraction(1, 2), IndexWindow.centered(8)),
                                 IndexWindow.centered(8))
    F = FrameSystem(T)
    back = dual_frame_rows(dual_frame_rows(F))
    assert np.abs(back.T.to_dense() - T.to_dense()).max() <= 1e-9


# --- inverse decay --------------------------------------------------------------

def test_identity_inverse_has_no_off_slants():
    rep = inverse_slant_decay(SlantedMatrix.identity(20), interior_margin=4)
    assert rep.abs_sup_norms[0] == pytest.approx(1)
    assert all(v == 0 for j, v in rep.abs_sup_norms.items() if j != 0)
    assert rep.to_csv().splitlines()[0] == "j,slant_sup_norm"


def test_neumann_decay_values():
    w = IndexWindow.centered(40)
    A = SlantedMatrix.from_slant_values(1, w, w, {0: np.ones(w.size), 1: np.full(w.size, 0.3)})
    rep = inverse_slant_decay(A, interior_margin=16)
    for k in range(0, 11):
        assert rep.abs_sup_norms[k] == pytest.approx(0.3**k, rel=1e-9)
        # (I + 0.3 S)^-1 = sum (-0.3 S)^k sits on slants k >= 0 only
        assert rep.slant_sup_norms.get(-k - 1, 0.0) == 0
    assert rep.geometric_ratio == pytest.approx(0.3, abs=0.02)


def test_exponential_slants_give_geometric_decay():
    rng = np.random.default_rng(7)
    w = IndexWindow.centered(50)
    sl = {0: 2 + 0.2 * rng.uniform(-1, 1, w.size)}
    for j in range(-6, 7):
        if j:
            sl[j] = math.exp(-1.5 * abs(j)) * rng.uniform(-1, 1, w.size)
    rep = inverse_slant_decay(SlantedMatrix.from_slant_values(1, w, w, sl), interior_margin=16)
    assert 0 < rep.geometric_ratio < 1


def test_decay_for_tall_sampling_matrix():
    g = Generator.bspline(1)
    X = generate_jittered_set(0.7, 0.05, -45, 45, seed=8)
    A = build_sampling_matrix(g, homogenize(X), 40)
    rep = inverse_slant_decay(A, interior_margin=12)
    assert 0 < rep.geometric_ratio < 1


# --- frame bounds -----------------------------------------------------------------

@pytest.mark.parametrize("p", [1, 2, INF])
def test_identity_frame_bounds(p):
    fb = p_frame_bounds(FrameSystem(SlantedMatrix.identity(8)), p)
    assert fb.a_operator == pytest.approx(1) and fb.b_operator == pytest.approx(1)


def test_tight_frame_bounds():
    fb = p_frame_bounds(two_copies(8), 2)
    assert fb.a_power == pytest.approx(2) and fb.b_power == pytest.approx(2)
    lines = fb.to_csv().splitlines()
    assert lines[0] == "p,a_est,b_est,convention"
    assert lines[2].startswith("2,2,2")


def test_sampling_frame_lower_bound():
    g = Generator.bspline(1)
    X = generate_jittered_set(0.7, 0.05, -40, 40, seed=9)
    A = build_sampling_matrix(g, homogenize(X), 32)
    inner = np.abs(A.cols.indices) <= 30
    fb = p_frame_bounds(A, INF, cols=inner)
    assert fb.a_operator >= 1 - X.gap - 1e-9
    assert fb.b_operator <= 2 + 1e-12
    with pytest.raises(ValueError):
        p_frame_bounds(A, 3)


def test_reconstruction_error_shrinks_with_window():
    g = Generator.bspline(1)
    X = generate_jittered_set(0.7, 0.05, -250, 250, seed=10)
    full = IndexWindow.centered(240)
    c = np.random.default_rng(10).standard_normal(full.size)
    samples = sample(Signal(c, g, full), X)
    errs = []
    for L in (8, 16, 32, 64):
        keep = (X.points > -L - 1) & (X.points < L + 2)
        Xi = SamplingSet(X.points[keep])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rec = reconstruct_from_samples(g, Xi, samples[keep], L)
        inner = np.abs(rec.window.indices) <= 4
        errs.append(np.abs(rec.coefficients[inner] - c[full.position(rec.window.indices[inner])]).max())
    assert all(b <= 2 * a for a, b in zip(errs, errs[1:]))
    assert errs[-1] <= 1e-10 < errs[0]
