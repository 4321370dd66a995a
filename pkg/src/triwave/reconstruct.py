"""Reflectionless reconstruction: time evolution of the data and field solves.

The pole-only inverse problem is the partial-fraction ansatz

    M(lam) = I + sum_p [ A_p / (lam - lam_p) + B_p / (lam - conj(lam_p)) ],

with rank-one residues A_p = a_p e_{k_p}^T, B_p = b_p e_{l_p}^T tied by

    a_p = w_p(x,t) [ e_{l_p} + sum coupling terms ],
    b_p = -conj(w_p) [ e_{k_p} + sum coupling terms ],
    w_p(x,t) = C_p * exp(i lam_p Delta_j (x - c_j t) / eps),

for the mode-j index pair (k_p, l_p).  All couplings are scalars, so the
3-component vectors a_p, b_p solve one (2N x 2N) complex system with three
right-hand sides.  Rows whose weight |w_p| exceeds one are divided by w_p
before assembly, which keeps every matrix entry bounded; when a weight
underflows entirely the row degenerates to a_p = 0, reproducing the exact
zero-field limit far outside the soliton supports.

The fields come from the 1/lam coefficient of M:

    q1 = eta1 D1 sqrt(D2 D3) M1[1,2],  q2 = i D2 sqrt(D1 D3) M1[2,0],
    q3 = i D3 sqrt(D1 D2) M1[0,1],     D_j the J-gaps.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ensemble import EnsembleData, PoleData
from .model import FieldGrid, GridSpec, MODE_PAIRS, ModelParams

__all__ = [
    "ConditionReport",
    "evolve",
    "point_solve",
    "solve_points",
    "grid_solve",
    "conditioning",
    "underflow_radius",
]

_COND_FALLBACK = 1e12
_MP_DPS = 40


@dataclass(frozen=True)
class ConditionReport:
    """One-norm condition estimates of the reconstruction system at samples."""

    samples: tuple[tuple[float, float], ...]
    estimates: np.ndarray
    max_estimate: float
    precision: str
    underflow: np.ndarray

    def __post_init__(self) -> None:
        est = np.asarray(self.estimates, dtype=float)
        if est.size and (np.any(est < 1.0) or not np.all(np.isfinite(est))):
            raise ValueError("condition estimates must be finite and >= 1")
        est.setflags(write=False)
        object.__setattr__(self, "estimates", est)
        uf = np.asarray(self.underflow, dtype=bool)
        uf.setflags(write=False)
        object.__setattr__(self, "underflow", uf)


def _pole_arrays(e: EnsembleData):
    lams = np.array([p.lam for p in e.poles], dtype=np.complex128)
    modes = np.array([p.mode for p in e.poles], dtype=int)
    cs = np.array([p.norming for p in e.poles], dtype=np.complex128)
    kk = np.array([MODE_PAIRS[m - 1][0] for m in modes], dtype=int)
    ll = np.array([MODE_PAIRS[m - 1][1] for m in modes], dtype=int)
    lax = e.params.lax()
    deltas = np.array([lax.gaps[m - 1] for m in modes], dtype=float)
    speeds = np.array([e.params.speeds[m - 1] for m in modes], dtype=float)
    return lams, modes, cs, kk, ll, deltas, speeds


def evolve(e: EnsembleData, t: float) -> EnsembleData:
    """Ensemble at absolute time t: isospectral, with the explicit norming phases.

    Each constant is multiplied by exp(-i lam_p Delta_j c_j (t - e.time) / eps);
    the factors form a one-parameter group, so chaining evolve calls agrees
    exactly with a single call.
    """
    if not e.poles:
        return EnsembleData(e.params, (), float(t), e.norming_convention, e.correction_mode)
    lams, modes, cs, kk, ll, deltas, speeds = _pole_arrays(e)
    dt = float(t) - e.time
    factors = np.exp(-1j * lams * deltas * speeds * dt / e.params.epsilon)
    poles = tuple(
        PoleData(p.lam, p.mode, complex(c * f), p.packet_index, p.k_index)
        for p, c, f in zip(e.poles, cs, factors)
    )
    return EnsembleData(e.params, poles, float(t), e.norming_convention, e.correction_mode)


def _coupling_blocks(lams, kk, ll):
    n = lams.size
    lp = lams[:, None]
    lq = lams[None, :]
    off = ~np.eye(n, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        caa = np.where(off & (kk[None, :] == ll[:, None]), 1.0 / (lp - lq), 0.0)
        cab = np.where(ll[None, :] == ll[:, None], 1.0 / (lp - np.conj(lq)), 0.0)
        cba = np.where(kk[None, :] == kk[:, None], 1.0 / (np.conj(lp) - lq), 0.0)
        cbb = np.where(off & (ll[None, :] == kk[:, None]), 1.0 / (np.conj(lp) - np.conj(lq)), 0.0)
    return caa, cab, cba, cbb


def _assemble(e: EnsembleData, xs: np.ndarray):
    """System matrices (npts, 2N, 2N), right-hand sides (npts, 2N, 3), and
    the underflow mask (all weights negligible)."""
    lams, modes, cs, kk, ll, deltas, speeds = _pole_arrays(e)
    n = lams.size
    eps = e.params.epsilon
    caa, cab, cba, cbb = _coupling_blocks(lams, kk, ll)

    logw = np.log(cs)[None, :] + 1j * lams[None, :] * deltas[None, :] * xs[:, None] / eps
    re = logw.real
    big = re > 0.0
    w_small = np.exp(np.where(big, -np.inf, logw))
    winv = np.exp(np.where(big, -logw, -np.inf))

    npts = xs.size
    S = np.zeros((npts, 2 * n, 2 * n), dtype=np.complex128)
    rhs = np.zeros((npts, 2 * n, 3), dtype=np.complex128)

    beta = np.where(big, winv, 1.0)
    g = np.where(big, 1.0 + 0.0j, w_small)
    idx = np.arange(n)
    S[:, idx, idx] = beta
    S[:, idx + n, idx + n] = np.conj(beta)
    S[:, :n, :n] -= g[:, :, None] * caa[None, :, :]
    S[:, :n, n:] -= g[:, :, None] * cab[None, :, :]
    S[:, n:, :n] += np.conj(g)[:, :, None] * cba[None, :, :]
    S[:, n:, n:] += np.conj(g)[:, :, None] * cbb[None, :, :]
    rhs[:, idx, ll] = g
    rhs[:, idx + n, kk] = -np.conj(g)
    underflow = np.all(re < -700.0, axis=1)
    return S, rhs, underflow


def _extract_fields(e: EnsembleData, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lams, modes, cs, kk, ll, deltas, speeds = _pole_arrays(e)
    n = lams.size
    npts = X.shape[0]
    m1 = np.zeros((npts, 3, 3), dtype=np.complex128)
    for p in range(n):
        m1[:, :, kk[p]] += X[:, p, :]
        m1[:, :, ll[p]] += X[:, n + p, :]
    lax = e.params.lax()
    d1, d2, d3 = lax.gaps
    eta1 = e.params.effective_couplings[0]
    q1 = eta1 * d1 * math.sqrt(d2 * d3) * m1[:, 1, 2]
    q2 = 1j * d2 * math.sqrt(d1 * d3) * m1[:, 2, 0]
    q3 = 1j * d3 * math.sqrt(d1 * d2) * m1[:, 0, 1]
    if e.params.conjugate_fields:
        q1, q2, q3 = np.conj(q1), np.conj(q2), np.conj(q3)
    return q1, q2, q3


def _solve_mp(S: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Extended-precision solve of one system (double-double class accuracy)."""
    import mpmath as mp

    with mp.workdps(_MP_DPS):
        n = S.shape[0]
        A = mp.matrix(n, n)
        for i in range(n):
            for j in range(n):
                A[i, j] = mp.mpc(S[i, j].real, S[i, j].imag)
        out = np.empty_like(rhs)
        for col in range(rhs.shape[1]):
            bcol = mp.matrix([mp.mpc(v.real, v.imag) for v in rhs[:, col]])
            sol = mp.lu_solve(A, bcol)
            out[:, col] = np.array([complex(v.real, v.imag) for v in sol])
    return out


def solve_points(
    e: EnsembleData,
    xs: np.ndarray,
    precision: str = "double",
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fields (q1, q2, q3) at positions xs, at the ensemble's time stamp."""
    xs = np.asarray(xs, dtype=float).ravel()
    if precision not in ("double", "extended"):
        raise ValueError(f"unknown precision {precision!r}")
    if not e.poles:
        z = np.zeros(xs.size, dtype=np.complex128)
        return z, z.copy(), z.copy()
    S, rhs, underflow = _assemble(e, xs)
    try:
        X = np.linalg.solve(S, rhs)
    except np.linalg.LinAlgError as exc:
        cond = _cond_estimates(S)
        raise np.linalg.LinAlgError(
            f"singular reconstruction system (condition estimates up to "
            f"{np.max(cond):.3e}); coincident poles or catastrophic conditioning"
        ) from exc
    if precision == "extended":
        redo = np.arange(xs.size)
    else:
        cond = _cond_estimates(S)
        redo = np.nonzero(cond > _COND_FALLBACK)[0]
    for i in redo:
        X[i] = _solve_mp(S[i], rhs[i])
    return _extract_fields(e, X)


def _cond_estimates(S: np.ndarray) -> np.ndarray:
    norm1 = np.max(np.sum(np.abs(S), axis=-2), axis=-1)
    try:
        inv = np.linalg.inv(S)
    except np.linalg.LinAlgError:
        return np.full(S.shape[0], np.inf)
    inv1 = np.max(np.sum(np.abs(inv), axis=-2), axis=-1)
    return np.maximum(norm1 * inv1, 1.0)


def point_solve(e: EnsembleData, x: float, precision: str = "double") -> tuple[complex, complex, complex]:
    """Fields at one position, at the ensemble's time stamp."""
    q1, q2, q3 = solve_points(e, np.array([float(x)]), precision)
    return complex(q1[0]), complex(q2[0]), complex(q3[0])


def grid_solve(
    e: EnsembleData,
    spec: GridSpec,
    threads: int = 1,
    precision: str = "double",
) -> FieldGrid:
    """Evolve to every time slice (always from the given ensemble, absolute
    phases) and solve pointwise; identical to independent point_solve calls."""
    xs = spec.xs
    ts = spec.ts
    q1 = np.empty((spec.nt, spec.nx), dtype=np.complex128)
    q2 = np.empty_like(q1)
    q3 = np.empty_like(q1)

    def fill(it: int) -> None:
        ee = evolve(e, float(ts[it]))
        a, b, c = solve_points(ee, xs, precision)
        q1[it], q2[it], q3[it] = a, b, c

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, range(spec.nt)))
    else:
        for it in range(spec.nt):
            fill(it)
    return FieldGrid(
        spec.x_min, spec.x_max, spec.nx, spec.t_min, spec.t_max, spec.nt,
        q1, q2, q3, e.params,
    )


def underflow_radius(e: EnsembleData) -> float:
    """|x| beyond which every residue weight underflows at t = the time stamp."""
    if not e.poles:
        return 0.0
    lams, modes, cs, kk, ll, deltas, speeds = _pole_arrays(e)
    eps = e.params.epsilon
    rates = np.abs(lams.imag) * deltas / eps
    offsets = np.log(np.abs(cs))
    return float(np.max((700.0 + np.abs(offsets)) / rates))


def conditioning(
    e: EnsembleData,
    samples: Sequence[tuple[float, float]],
    precision: str = "double",
) -> ConditionReport:
    """One-norm condition estimates of the reconstruction system at (x, t) samples."""
    if not e.poles:
        raise ValueError("conditioning of an empty ensemble is undefined")
    ests = np.empty(len(samples))
    uf = np.empty(len(samples), dtype=bool)
    for i, (x, t) in enumerate(samples):
        ee = evolve(e, float(t))
        S, rhs, under = _assemble(ee, np.array([float(x)]))
        ests[i] = _cond_estimates(S)[0]
        uf[i] = bool(under[0])
    return ConditionReport(
        tuple((float(x), float(t)) for x, t in samples),
        ests,
        float(np.max(ests)),
        precision,
        uf,
    )
