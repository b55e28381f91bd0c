"""Boundedness below of slanted matrices.

Localization with triangular (Cesaro) windows, the commutator estimate
between a banded slanted matrix and those windows, the constants of the
iterated localization inequality, and a certificate that turns a lower
bound in one ``l^p`` norm into an explicit lower bound in another.

Numerical lower-bound estimates live here too: ``estimate_kappa`` is exact
for ``p = 2`` (smallest singular value) and an upper estimate for
``p in {1, inf}``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from .slant_core import (
    IndexWindow,
    SlantedMatrix,
    Weight,
    apply,
    interior_rows,
    slant_norm,
    truncate,
)

INF = math.inf

__all__ = [
    "CesaroWindow",
    "cesaro",
    "triple_norm",
    "window_multiply",
    "crop",
    "commutator_matrix",
    "commutator_norm",
    "commutator_bound",
    "aleph",
    "Z",
    "a_jp",
    "b_jp",
    "mj_sides",
    "BBCertificate",
    "certificate",
    "certificates_to_csv",
    "estimate_kappa",
    "diagonal_dominance_bound",
    "pfander_witness",
    "bounded_flow_to_slanted",
]


def _norm(v, p) -> float:
    v = np.abs(np.asarray(v, dtype=float))
    if v.size == 0:
        return 0.0
    if p == INF:
        return float(v.max())
    return float(np.sum(v**p) ** (1.0 / p))


def _check_p(p, allowed=(1, 2, INF)):
    if p not in allowed:
        raise ValueError(f"unsupported norm index {p!r}; expected one of {allowed}")


def cesaro(N, center, k):
    """``psi_center^N(k) = max(0, 1 - |k - center| / N)``."""
    return np.maximum(0.0, 1.0 - np.abs(np.asarray(k, dtype=float) - center) / N)


@dataclass(frozen=True)
class CesaroWindow:
    N: float
    center: float = 0.0

    def __post_init__(self):
        # rescaled windows (alpha * N) may be narrower than 1
        if not self.N > 0:
            raise ValueError("window scale N must be positive")

    def __call__(self, k):
        return cesaro(self.N, self.center, k)

    def scaled(self, alpha) -> "CesaroWindow":
        """``psi_{alpha n}^{alpha N}``; equals ``psi_n^N(k / alpha)`` pointwise."""
        alpha = float(alpha)
        return CesaroWindow(alpha * self.N, alpha * self.center)


def _positions(x, window: IndexWindow | None):
    n = len(x)
    if window is None:
        if n % 2 == 0:
            raise ValueError("even-length vector needs an explicit window")
        window = IndexWindow.centered(n // 2)
    if window.size != n:
        raise ValueError("vector length does not match window")
    return window.indices


def window_multiply(x, w: CesaroWindow, window: IndexWindow | None = None) -> np.ndarray:
    k = _positions(x, window)
    return w(k) * np.asarray(x, dtype=float)


def crop(x, n, L, window: IndexWindow | None = None) -> np.ndarray:
    """``P_n^L x``: keep entries with ``|k - n| <= L``."""
    k = _positions(x, window)
    return np.where(np.abs(k - n) <= L, np.asarray(x, dtype=float), 0.0)


def triple_norm(x, N, p, window: IndexWindow | None = None) -> float:
    """Localized norm ``(sum_n ||Psi_n^N x||_p^p)^(1/p)`` over integer centers.

    For ``p = inf`` it is ``sup_n ||Psi_n^N x||_inf``.
    """
    if not N > 1:
        raise ValueError("N must exceed 1")
    x = np.abs(np.asarray(x, dtype=float))
    _positions(x, window)
    reach = math.ceil(N) - 1
    offsets = np.arange(-reach, reach + 1)
    psi = cesaro(N, 0, offsets)
    if p == INF:
        # every center sees a full window; the max over centers is a sliding max
        padded = np.concatenate([np.zeros(reach), x, np.zeros(reach)])
        local = np.lib.stride_tricks.sliding_window_view(padded, len(offsets)) * psi[::-1]
        return float(local.max()) if local.size else 0.0
    per_center = np.convolve(x**p, psi**p, mode="full")
    return float(per_center.sum() ** (1.0 / p))


# commutator --------------------------------------------------------------

def commutator_matrix(A: SlantedMatrix, n, N) -> np.ndarray:
    """Dense ``A Psi_n^N - Psi_{n/alpha}^{N/alpha} A`` on the section.

    Entry ``(m, k)`` is ``a_mk (psi_n^N(k) - psi_n^N(alpha m))``.
    """
    alpha = float(A.slant)
    m = A.rows.indices
    k = A.cols.indices
    dense = A.to_dense()
    return dense * (cesaro(N, n, k)[None, :] - cesaro(N, n, alpha * m)[:, None])


def commutator_norm(A: SlantedMatrix, n, N, q, interior: bool = True) -> float:
    """Operator ``q``-norm of the window commutator of ``A``.

    With ``interior=True`` only rows whose band fits in the column window
    are kept; on those rows the section agrees with the infinite matrix.
    """
    _check_p(q)
    C = commutator_matrix(A, n, N)
    if interior:
        C = C[interior_rows(A)]
    if C.size == 0:
        return 0.0
    if q == 1:
        return float(np.abs(C).sum(axis=0).max())
    if q == INF:
        return float(np.abs(C).sum(axis=1).max())
    return float(np.linalg.norm(C, 2))


def commutator_bound(M, N, sup, d: int = 1) -> float:
    """``(2M)^(d+1) / (2N) * sup``: half of the constant ``aleph``."""
    return (2 * M) ** (d + 1) / (2 * N) * sup


# constants of the iterated inequality ------------------------------------

def aleph(M, N, sup, d: int = 1) -> float:
    return (2 * M) ** (d + 1) * sup / N


def Z(j: int, N, M):
    """Window growth after ``j`` iterations: ``2^(j-1) N + (2^j - 2) M``."""
    if j < 1:
        raise ValueError("j must be >= 1")
    return 2 ** (j - 1) * N + (2**j - 2) * M


def a_jp(j: int, aleph_value: float, gamma: float) -> float:
    """``gamma^-1 (1 - r^j) / (1 - r)`` with ``r = aleph / gamma``."""
    r = aleph_value / gamma
    if r == 1:
        return j / gamma
    return (1 - r**j) / (gamma - aleph_value)


def b_jp(j: int, aleph_value: float, gamma: float) -> float:
    return (aleph_value / gamma) ** j


def mj_sides(A: SlantedMatrix, x, n, N, M, j, p, kappa_p, tail=None):
    """Both sides of the ``j``-fold localization inequality.

    Returns ``(lhs, rhs)`` with ``lhs = ||Psi_n^N x||_p`` and
    ``rhs = a_jp ||Psi_{n/alpha}^{Z_j/alpha} A_M x||_p
    + b_jp ||Psi_n^{Z_{j+1}} x||_p``.  ``tail`` defaults to the section
    norm ``||A - A_M||_p``; ``kappa_p`` must be a valid lower bound for
    ``A`` on the section.
    """
    from .slant_core import operator_norm

    AM = truncate(A, M)
    if tail is None:
        diff = A.to_dense() - AM.to_dense()
        tail = operator_norm(diff, p)
    gamma = kappa_p - tail
    if gamma <= 0:
        raise ValueError("kappa_p does not dominate the truncation tail")
    al = aleph(M, N, A.sup_norm())
    a = a_jp(j, al, gamma)
    b = b_jp(j, al, gamma)
    beta = 1.0 / float(A.slant)
    x = np.asarray(x, dtype=float)
    lhs = _norm(cesaro(N, n, A.cols.indices) * x, p)
    y = apply(AM, x)
    z = Z(j, N, M)
    rhs = (a * _norm(cesaro(beta * z, beta * n, A.rows.indices) * y, p)
           + b * _norm(cesaro(Z(j + 1, N, M), n, A.cols.indices) * x, p))
    return lhs, rhs


# certificate --------------------------------------------------------------

CSV_FIELDS = ["p", "q", "kappa_in", "s", "delta", "j", "M", "N",
              "aleph", "tilde_aleph", "kappa_out", "valid"]


@dataclass(frozen=True)
class BBCertificate:
    """Constants assembled from the proof that p-bb implies q-bb.

    ``valid`` is True exactly when ``tilde_aleph < 1``; ``kappa_out`` is
    then a lower bound for the target norm ``target_q``.
    """

    p: float
    target_q: float
    kappa_p: float
    s: float
    d: int
    delta: float
    j: int
    M: int
    N: float
    aleph: float
    gamma_p: float
    a_jp: float
    b_jp: float
    Z_seq: tuple
    tilde_aleph: float
    kappa_out: float
    valid: bool
    weighted_norm: float

    def csv_row(self) -> dict:
        def fmt(v):
            if isinstance(v, bool):
                return "1" if v else "0"
            if v == INF:
                return "inf"
            return f"{v:.12g}"

        return {
            "p": fmt(self.p), "q": fmt(self.target_q), "kappa_in": fmt(self.kappa_p),
            "s": fmt(self.s), "delta": fmt(self.delta), "j": str(self.j), "M": str(self.M),
            "N": fmt(self.N), "aleph": fmt(self.aleph), "tilde_aleph": fmt(self.tilde_aleph),
            "kappa_out": fmt(self.kappa_out), "valid": fmt(self.valid),
        }

    def as_dict(self) -> dict:
        return asdict(self)


def certificates_to_csv(certs) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for c in certs:
        writer.writerow(c.csv_row())
    return buf.getvalue()


def _step_infinity_to_q(kappa_inf, q, sup, wnorm, s, d, delta, j, M):
    """Constants when the source bound is in l^inf and the target is q < inf."""
    N = float(M) ** (delta * (d + 1))
    al = aleph(M, N, sup, d)
    gamma = kappa_inf - wnorm * float(M) ** (-s)
    if gamma <= 0 or al >= gamma:
        return None
    a = a_jp(j, al, gamma)
    b = b_jp(j, al, gamma)
    zj, zj1 = Z(j, N, M), Z(j + 1, N, M)
    lead = 2.0 ** (2 * d + q - 1) * N**d
    tilde = lead * (a**q * zj**d * wnorm**q * float(M) ** (-s * q) + b**q * zj1**d)
    if not math.isfinite(tilde):
        return None
    kappa = ((1 - tilde) / (lead * a**q * zj**d)) ** (1.0 / q) if tilde < 1 else 0.0
    return dict(N=N, aleph=al, gamma_p=gamma, a_jp=a, b_jp=b,
                Z_seq=tuple(Z(i, N, M) for i in range(1, j + 2)),
                tilde_aleph=tilde, kappa_out=kappa)


def _step_p_to_infinity(kappa_p, p, sup, wnorm, s, d, delta, j, M):
    """Constants when the source bound is in l^p, p < inf, target l^inf."""
    N = float(M) ** (delta * (d + 1))
    al = aleph(M, N, sup, d)
    gamma = kappa_p - wnorm * float(M) ** (-s)
    if gamma <= 0 or al >= gamma:
        return None
    a = a_jp(j, al, gamma)
    b = b_jp(j, al, gamma)
    zj, zj1 = Z(j, N, M), Z(j + 1, N, M)
    tilde = 2.0 ** (d / p) * (a * zj ** (d / p) * wnorm * float(M) ** (-s) + b * zj1 ** (d / p))
    if not math.isfinite(tilde):
        return None
    kappa = (1 - tilde) / (a * (2 * zj) ** (d / p)) if tilde < 1 else 0.0
    return dict(N=N, aleph=al, gamma_p=gamma, a_jp=a, b_jp=b,
                Z_seq=tuple(Z(i, N, M) for i in range(1, j + 2)),
                tilde_aleph=tilde, kappa_out=kappa)


def _m_grid(m_max: int) -> list[int]:
    return sorted({int(round(v)) for v in np.geomspace(2, max(m_max, 2), 200)})


def certificate(A: SlantedMatrix, p, kappa_p: float, s: float, target_q=2,
                search_budget: int = 10**6, d: int = 1, allow_low_s: bool = False) -> BBCertificate:
    """Certify a lower bound in ``l^target_q`` from one in ``l^p``.

    ``kappa_p`` must be a lower bound for the infinite matrix whose finite
    section is ``A``; the tail ``||A - A_M||_p`` is bounded by
    ``||A||_{Sigma^omega} M^-s`` with ``omega = (1+|j|)^s`` so the result
    speaks about that infinite matrix, not just the section.

    Search: ``M`` ascending up to ``search_budget`` with
    ``N = M^(delta (d+1))``; for each ``M``, 16 log-spaced ``delta`` in
    ``(1, s*r/(d+1)^2)`` (``r`` the finite exponent involved) and ``j`` from
    its minimum up to 40.  The first valid combination wins; otherwise the best ``tilde_aleph`` seen is
    returned with ``valid=False``.

    ``p == target_q`` returns ``kappa_p`` itself.  Finite ``p`` to finite
    ``q`` goes through ``l^inf`` and returns the second leg's constants.
    """
    if kappa_p <= 0:
        raise ValueError("kappa_p must be positive")
    if s <= (d + 1) ** 2 and not allow_low_s:
        raise ValueError(f"weight exponent s={s} must exceed (d+1)^2={(d + 1) ** 2}")
    for r in (p, target_q):
        if not (r == INF or r >= 1):
            raise ValueError(f"norm index {r!r} out of range")

    sup = A.sup_norm()
    wnorm = slant_norm(A, Weight.polynomial(s))

    if p == target_q:
        return BBCertificate(p, target_q, kappa_p, s, d, math.nan, 0, 0, math.nan, math.nan,
                             math.nan, math.nan, math.nan, (), 0.0, kappa_p, True, wnorm)

    if p != INF and target_q != INF:
        first = certificate(A, p, kappa_p, s, INF, search_budget, d, allow_low_s)
        if not first.valid:
            return first
        return certificate(A, INF, first.kappa_out, s, target_q, search_budget, d, allow_low_s)

    if p == INF:
        r, step = target_q, _step_infinity_to_q
    else:
        r, step = p, _step_p_to_infinity

    best = None
    low_s = s <= (d + 1) ** 2
    delta_max = s * r / (d + 1) ** 2
    if delta_max > 1 and not low_s:
        # open interval (1, delta_max): drop both endpoints of a 18-point grid
        deltas = np.geomspace(1, delta_max, 18)[1:-1]
    else:
        deltas = np.array([])
    plan = []
    for delta in deltas:
        j_min = math.floor(delta * (d + 1) / (r * (delta - 1))) + 1
        plan.extend((float(delta), j) for j in range(j_min, 41))
    # smallest M first: kappa_out shrinks like a power of M
    for M in _m_grid(search_budget) if plan else []:
        for delta, j in plan:
            vals = step(kappa_p, r, sup, wnorm, s, d, delta, j, M)
            if vals is None:
                continue
            cert = BBCertificate(p=p, target_q=target_q, kappa_p=kappa_p, s=s, d=d,
                                 delta=delta, j=j, M=M,
                                 valid=vals["tilde_aleph"] < 1 and vals["kappa_out"] > 0,
                                 weighted_norm=wnorm, **vals)
            if cert.valid:
                return cert
            if best is None or cert.tilde_aleph < best.tilde_aleph:
                best = cert
    if best is None:
        best = BBCertificate(p, target_q, kappa_p, s, d, math.nan, 0, 0, math.nan, math.nan,
                             math.nan, math.nan, math.nan, (), math.inf, 0.0, False, wnorm)
    return best


# numerical lower bounds --------------------------------------------------

def diagonal_dominance_bound(A: SlantedMatrix) -> float:
    """``min_m (|a_mm| - sum_{n != m} |a_mn|)`` for a square slope-1 section.

    A positive value is a lower bound for the ``l^inf`` constant.
    """
    if float(A.slant) != 1 or A.rows != A.cols:
        raise ValueError("diagonal dominance needs a square section with alpha = 1")
    D = np.abs(A.to_dense())
    diag = np.diag(D)
    return float(np.min(2 * diag - D.sum(axis=1)))


def _descent(D, x0, p, sweeps=6):
    """Coordinate descent on ``||D x||_p / ||x||_p`` from ``x0``.

    Each coordinate tries a fixed set of moves (zeroing it, and signed
    geometric steps); only the column's nonzero rows are updated.
    """
    n = D.shape[1]
    support = [np.flatnonzero(D[:, i]) for i in range(n)]
    colvals = [D[s, i] for i, s in enumerate(support)]
    x = x0 / _norm(x0, p)
    y = D @ x
    ay = np.abs(y)
    best = _norm(y, p)
    factors = np.concatenate([-np.geomspace(2, 1 / 64, 10), np.geomspace(1 / 64, 2, 10)])
    for _ in range(sweeps):
        improved = False
        ax = np.abs(x)
        for i in range(n):
            S, col = support[i], colvals[i]
            step = max(ax[i], 1.0 / n if p == 1 else 0.25)
            ts = np.concatenate([[-x[i]], step * factors])
            YS = y[S, None] + col[:, None] * ts[None, :]
            Xi = np.abs(x[i] + ts)
            if p == INF:
                held = ay[S].copy()
                ay[S] = 0.0
                rest_y = ay.max(initial=0.0)
                ay[S] = held
                hx = ax[i]
                ax[i] = 0.0
                rest_x = ax.max(initial=0.0)
                ax[i] = hx
                num = np.maximum(rest_y, np.abs(YS).max(axis=0, initial=0.0))
                den = np.maximum(rest_x, Xi)
            else:
                num = ay.sum() - ay[S].sum() + np.abs(YS).sum(axis=0)
                den = ax.sum() - ax[i] + Xi
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(den > 0, num / den, np.inf)
            k = int(np.argmin(r))
            if r[k] < best * (1 - 1e-12):
                x[i] += ts[k]
                y[S] = YS[:, k]
                scale = _norm(x, p)
                x /= scale
                y /= scale
                ay = np.abs(y)
                ax = np.abs(x)
                best = r[k]
                improved = True
        if not improved:
            break
    return best


def estimate_kappa(A, p, trials: int = 4, seed: int = 0, rows=None, cols=None,
                   workers: int = 1, sweeps: int = 6) -> float:
    """Lower-bound constant ``min ||Ax||_p / ||x||_p`` of a finite section.

    ``p = 2``: exact smallest singular value (zero when the section has
    fewer rows than columns).  ``p in {1, inf}``: the best ratio found by
    deterministic multi-start coordinate descent, which is an upper
    estimate of the true constant.  Starts are the right singular vector of
    the smallest singular value, the alternating-sign vector, and
    ``trials`` random vectors seeded from ``seed``.
    """
    _check_p(p)
    D = A.to_dense() if isinstance(A, SlantedMatrix) else np.asarray(A, dtype=float)
    if rows is not None:
        D = D[rows]
    if cols is not None:
        D = D[:, cols]
    n = D.shape[1]
    if D.shape[0] < n:
        return 0.0
    _, sv, vt = np.linalg.svd(D, full_matrices=False)
    if p == 2:
        return float(sv[-1])
    starts = [vt[-1], (-1.0) ** np.arange(n)]
    for ss in np.random.SeedSequence(seed).spawn(trials):
        starts.append(np.random.default_rng(ss).standard_normal(n))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda x0: _descent(D, x0.copy(), p, sweeps), starts))
    else:
        results = [_descent(D, x0.copy(), p, sweeps) for x0 in starts]
    # unit vectors are cheap extra candidates
    col_norms = np.abs(D).max(axis=0) if p == INF else np.abs(D).sum(axis=0)
    return float(min(min(results), col_norms.min()))


# approximate eigenvector for alpha > 1 -------------------------------------

def pfander_witness(A: SlantedMatrix, epsilon: float, p=INF) -> np.ndarray:
    """Unit vector ``x`` (in ``l^p``) with ``||A x||_p <= epsilon``.

    Picks the smallest ``M`` whose slant tail ``||A - A_M||_{Sigma}`` is at
    most ``epsilon``, then the smallest box of columns ``|k| <= R`` for which
    the band of ``A_M`` touches fewer rows than there are columns.  A null
    vector of that box is annihilated by ``A_M`` and only sees the tail.
    """
    if float(A.slant) <= 1:
        raise ValueError("the construction needs alpha > 1")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    _check_p(p)
    K = A.slant.K()
    sups = A.slant_sup_norms()
    M = None
    for cand in range(1, A.M + 1):
        tail = K * sum(v for j, v in sups.items() if abs(j) > cand - 1)
        if tail <= epsilon:
            M = cand
            break
    AM = truncate(A, M)
    num, den = A.slant.numerator, A.slant.denominator
    c0 = (A.cols.lo + A.cols.hi) // 2
    m_all = A.rows.indices
    base = A.slant.floor_times(m_all)
    for R in range(1, A.cols.size):
        clo, chi = c0 - R, c0 + R
        if clo < A.cols.lo or chi > A.cols.hi:
            break
        # rows whose F^M band meets the column box, computed on all of Z
        lo_row = math.floor(((clo - (M - 1)) * den) / num) - 1
        hi_row = math.ceil(((chi + M) * den) / num) + 1
        cand = np.arange(lo_row, hi_row + 1)
        cb = A.slant.floor_times(cand)
        touches = (cb + (M - 1) >= clo) & (cb - (M - 1) <= chi)
        band_rows = cand[touches]
        if len(band_rows) >= 2 * R + 1:
            continue
        if band_rows.min() < A.rows.lo or band_rows.max() > A.rows.hi:
            raise ValueError("window too small to realize the construction")
        sub = AM.to_dense()[np.ix_(A.rows.position(band_rows), A.cols.position(np.arange(clo, chi + 1)))]
        null = scipy.linalg.null_space(sub)
        if null.shape[1] == 0:
            continue
        x = np.zeros(A.cols.size)
        x[A.cols.position(clo):A.cols.position(chi) + 1] = null[:, 0]
        return x / _norm(x, p)
    raise ValueError("window too small to realize the construction")


# bounded flow -------------------------------------------------------------

def bounded_flow_to_slanted(dense):
    """Reorder rows of a bounded-flow matrix into a slanted section.

    Each row is keyed by the first column of its support; rows sharing a
    key are stacked and every key gets the same number ``C`` of row slots,
    padding with zero rows.  The result is ``1/C``-slanted, and since only
    rows are permuted or zero rows inserted, ``||A x||`` is unchanged for
    every ``l^p``.  Returns ``(matrix, row_source)`` with ``row_source[r]``
    the original row in slot ``r`` or ``-1`` for padding.
    """
    from fractions import Fraction

    dense = np.asarray(dense, dtype=float)
    nrows, ncols = dense.shape
    keys = np.array([np.flatnonzero(r)[0] if r.any() else -1 for r in dense])
    live = keys >= 0
    if not live.any():
        raise ValueError("matrix has no nonzero rows")
    counts = np.bincount(keys[live], minlength=ncols)
    C = int(counts.max())
    source = -np.ones(ncols * C, dtype=int)
    fill = np.zeros(ncols, dtype=int)
    for r in np.flatnonzero(live):
        k = keys[r]
        source[k * C + fill[k]] = r
        fill[k] += 1
    out = np.zeros((ncols * C, ncols))
    used = source >= 0
    out[used] = dense[source[used]]
    rows = IndexWindow(0, ncols * C - 1)
    cols = IndexWindow(0, ncols - 1)
    return SlantedMatrix.from_dense(Fraction(1, C), out, rows, cols), source
