"""Direct-scattering oracle: transfer matrices and eigenvalue location.

Everything here integrates the de-oscillated spectral ODE numerically and
serves as the ground truth against which the closed-form spectra and the
composition rules are checked.

Conventions (fixed package-wide):

* 3x3 problem: eps m' = Utilde m with J = diag(c1, c2, c3), de-oscillation
  phases referenced to x = 0, m(x_left) = I ("left" normalization).  The
  transfer matrix is T = m(x_right).
* 2x2 problem for a packet: eps u' = [[-i zeta, f(x)], [-f(x), i zeta]] u
  with f the packet envelope; de-oscillated the same way with J = (1, -1).
* Discrete eigenvalues in the upper half plane are zeros of the leading
  principal minors of T: D1 = T[0,0] and D2 = T[0,0]T[1,1] - T[0,1]T[1,0]
  for the 3x3 problem (a packet in mode 1 shows up only in D2, mode 3 only
  in D1, mode 2 in both); D1 = T[0,0] for the 2x2 problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .model import LaxCoefficients, ModelParams, Packet

__all__ = [
    "StiffnessError",
    "ContourError",
    "TransferMatrix",
    "EigenvalueList",
    "transfer_matrix",
    "zs_transfer_matrix",
    "transfer_batch",
    "zs_transfer_batch",
    "minor_values",
    "zs_minor_values",
    "locate_eigenvalues",
    "zs_locate_eigenvalues",
    "zs_norming_from_oracle",
]

_EXP_LIMIT = 690.0  # max |exponent| allowed inside the de-oscillation phases
_DET_TOL = 1e-10


class StiffnessError(RuntimeError):
    """Step-size underflow: spectral parameter too large for the window/tolerance."""


class ContourError(RuntimeError):
    """A zero sits on or too near a contour after maximal subdivision."""


@dataclass(frozen=True)
class TransferMatrix:
    """De-oscillated fundamental-solution matrix across an integration window."""

    dim: int
    entries: np.ndarray
    lam: complex
    x_left: float
    x_right: float
    normalization: str = "left/deosc-origin-0"

    def __post_init__(self) -> None:
        e = np.asarray(self.entries, dtype=np.complex128)
        if e.shape != (self.dim, self.dim):
            raise ValueError(f"entries shape {e.shape} does not match dim {self.dim}")
        if not np.all(np.isfinite(e.view(np.float64))):
            raise ValueError("transfer matrix has non-finite entries")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        if abs(self.det - 1.0) > _DET_TOL * max(1.0, float(np.max(np.abs(e)))):
            raise ValueError(f"|det - 1| = {abs(self.det - 1.0):.3e} violates unimodularity")

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.entries))

    def reframed(self, origin: float, j_diag: Sequence[float], epsilon: float) -> "TransferMatrix":
        """Same matrix with de-oscillation phases referenced to ``origin``."""
        jd = np.asarray(j_diag, dtype=float)
        ph = np.exp(-1j * self.lam * np.subtract.outer(jd, jd) * origin / epsilon)
        return TransferMatrix(
            self.dim,
            self.entries * ph,
            self.lam,
            self.x_left,
            self.x_right,
            normalization=f"left/deosc-origin-{origin}",
        )


# ---------------------------------------------------------------------------
# Slot tables and graded grids
# ---------------------------------------------------------------------------


def _slot_values_3x3(packets: Sequence[Packet], lax: LaxCoefficients, xs: np.ndarray) -> np.ndarray:
    """Upper-triangle slot values (mode order 1, 2, 3) at positions xs."""
    out = np.zeros((xs.size, 3), dtype=np.complex128)
    for p in packets:
        out[:, p.mode - 1] += lax.gammas[p.mode - 1] * p.envelope(xs)
    return out


def _amplitude_profile(packets: Sequence[Packet], weights: Sequence[float], xs: np.ndarray) -> np.ndarray:
    out = np.zeros(xs.size)
    for p, w in zip(packets, weights):
        out += abs(w) * p.envelope(xs)
    return out


def _union_window(packets: Sequence[Packet]) -> tuple[float, float]:
    if not packets:
        return (0.0, 1.0)
    los, his = zip(*(p.support for p in packets))
    return (min(los), max(his))


def _graded_grid(
    window: tuple[float, float],
    profile_fn: Callable[[np.ndarray], np.ndarray],
    kappa: float,
    eps: float,
    tol: float,
    breakpoints: Sequence[float] = (),
) -> np.ndarray:
    """Non-uniform step grid, dense where the potential is large.

    The RK4 error density scales like kappa^4 h^4 |U| / eps, so the local step
    follows |U|^(-1/5) with a hard cap; positions come from inverting the
    cumulative step density.  Envelope support edges are forced onto grid
    nodes so no step straddles a truncation discontinuity.
    """
    a, b = window
    cuts = sorted({a, b, *(float(c) for c in breakpoints if a < c < b)})
    probes, denses = [], []
    whole = np.linspace(a, b, 4097)
    prof_whole = profile_fn(whole)
    fmax = float(np.max(prof_whole))
    if fmax <= 0.0:
        return np.asarray(cuts, dtype=float)
    target = max(tol, 1e-13) * 0.02
    mass = float(np.trapz(prof_whole, whole)) + 1e-30
    h_core = (target * 120.0 * eps / (kappa**4 * mass)) ** 0.25
    h_core = min(h_core, (b - a) / 16.0, 0.25 / kappa)
    h_max = (b - a) / 16.0

    grids = []
    total_steps = 0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        probe = np.linspace(lo, hi, 1025)
        rel = np.maximum(profile_fn(probe) / fmax, 1e-10)
        dens = np.maximum((rel**0.2) / h_core, 1.0 / h_max)
        cum = np.concatenate(([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(probe))))
        nsteps = max(2, int(math.ceil(cum[-1])))
        total_steps += nsteps
        if total_steps > 4_000_000:
            raise StiffnessError(
                f"required over {total_steps} steps on window {window}; "
                "spectral parameter too large for this window/tolerance"
            )
        grids.append(np.interp(np.linspace(0.0, cum[-1], nsteps + 1), cum, probe))
    out = np.concatenate([g if i == 0 else g[1:] for i, g in enumerate(grids)])
    return out


def _step_samples(
    grid: np.ndarray,
    slot_fn: Callable[[np.ndarray], np.ndarray],
    breakpoints: Sequence[float] = (),
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Slot values at step starts, midpoints, and ends.

    Nodes sitting exactly on a truncation breakpoint are sampled a hair
    inside the step they serve, so each step sees only its own (smooth)
    branch of the envelope.
    """
    starts = grid[:-1].copy()
    ends = grid[1:].copy()
    mids = 0.5 * (grid[:-1] + grid[1:])
    if breakpoints:
        h = np.diff(grid)
        cuts = np.asarray(sorted(set(float(c) for c in breakpoints)))
        for arr, sign in ((starts, 1.0), (ends, -1.0)):
            on_cut = np.isclose(arr[:, None], cuts[None, :], rtol=0.0, atol=1e-12).any(axis=1)
            arr[on_cut] += sign * 1e-7 * h[on_cut]
    return slot_fn(starts), slot_fn(mids), slot_fn(ends)


def _refine(xs: np.ndarray) -> np.ndarray:
    out = np.empty(2 * xs.size - 1)
    out[::2] = xs
    out[1::2] = 0.5 * (xs[:-1] + xs[1:])
    return out


def _check_exponents(lams: np.ndarray, dj_max: float, window: tuple[float, float], eps: float) -> None:
    xbig = max(abs(window[0]), abs(window[1]))
    worst = float(np.max(np.abs(lams.imag))) * dj_max * xbig / eps
    if worst > _EXP_LIMIT:
        raise StiffnessError(
            f"de-oscillation exponent {worst:.1f} exceeds the floating-point range; "
            "lambda too large for this window"
        )


def _entry_error(cur: np.ndarray, prev: np.ndarray) -> float:
    """Per-entry error, absolute for O(1) entries and relative for large ones."""
    scale = np.maximum(1.0, np.abs(cur))
    return float(np.max(np.abs(cur - prev) / scale))


def _minor_error(cur: np.ndarray, prev: np.ndarray) -> float:
    """Convergence of the leading principal minors only.

    At a discrete eigenvalue the large off-corner entries of a one-sided
    transfer matrix are exponentially ill-conditioned, but the minors (the
    analytic scattering functions actually consumed downstream) stay well
    conditioned; eigenvalue work therefore converges on the minors alone.
    """
    if cur.shape[1] == 2:
        pairs = (cur[:, 0, 0], prev[:, 0, 0])
        err = np.abs(pairs[0] - pairs[1]) / np.maximum(1.0, np.abs(pairs[0]))
        return float(np.max(err))
    c1, c2 = minors_from_batch(cur)
    p1, p2 = minors_from_batch(prev)
    e1 = np.abs(c1 - p1) / np.maximum(1.0, np.abs(c1))
    e2 = np.abs(c2 - p2) / np.maximum(1.0, np.abs(c2))
    return float(max(np.max(e1), np.max(e2)))


def _adaptive_sweep(
    lams: np.ndarray,
    window: tuple[float, float],
    eps: float,
    kappa: float,
    slot_fn: Callable[[np.ndarray], np.ndarray],
    profile_fn: Callable[[np.ndarray], np.ndarray],
    sweep,
    jd: np.ndarray,
    tol: float,
    reduce_fn: Callable[[np.ndarray, np.ndarray], float] | None = None,
    breakpoints: Sequence[float] = (),
) -> np.ndarray:
    if reduce_fn is None:
        reduce_fn = _entry_error
    xs = _graded_grid(window, profile_fn, kappa, eps, tol, breakpoints)

    def run(grid: np.ndarray) -> np.ndarray:
        s_start, s_mid, s_end = _step_samples(grid, slot_fn, breakpoints)
        return sweep(lams, grid, s_start, s_mid, s_end, jd, eps)

    prev = run(xs)
    err = math.inf
    for _ in range(5):
        xs = _refine(xs)
        cur = run(xs)
        err = reduce_fn(cur, prev)
        if err <= tol:
            return cur
        prev = cur
    raise StiffnessError(
        f"transfer-matrix sweep did not reach tolerance {tol:.1e} "
        f"(last error {err:.2e}); lambda too large for this window/tolerance"
    )


class _FrozenSweep:
    """Pre-converged step grid plus slot samples; evaluates arbitrary lam batches.

    The grid is validated once (refinement until the requested reduction
    converges on probe parameters at the region's extreme modulus); later
    evaluations reuse it with a single kernel pass each.
    """

    def __init__(self, sweep, xs, samples, jd, eps):
        self._sweep = sweep
        self._xs = xs
        self._samples = samples
        self._jd = jd
        self._eps = eps

    def __call__(self, lams: np.ndarray) -> np.ndarray:
        lams = np.asarray(lams, dtype=np.complex128).ravel()
        return self._sweep(lams, self._xs, *self._samples, self._jd, self._eps)


def _freeze_sweep(
    probe_lams: np.ndarray,
    window: tuple[float, float],
    eps: float,
    kappa: float,
    slot_fn: Callable[[np.ndarray], np.ndarray],
    profile_fn: Callable[[np.ndarray], np.ndarray],
    sweep,
    jd,
    tol: float,
    reduce_fn: Callable[[np.ndarray, np.ndarray], float],
    breakpoints: Sequence[float] = (),
) -> _FrozenSweep:
    xs = _graded_grid(window, profile_fn, kappa, eps, tol, breakpoints)
    samples = _step_samples(xs, slot_fn, breakpoints)
    prev = sweep(probe_lams, xs, *samples, jd, eps)
    err = math.inf
    for _ in range(5):
        xs = _refine(xs)
        samples = _step_samples(xs, slot_fn, breakpoints)
        cur = sweep(probe_lams, xs, *samples, jd, eps)
        err = reduce_fn(cur, prev)
        if err <= tol:
            return _FrozenSweep(sweep, xs, samples, jd, eps)
        prev = cur
    raise StiffnessError(
        f"sweep grid did not converge to {tol:.1e} (last error {err:.2e})"
    )


def transfer_batch(
    packets: Sequence[Packet],
    params: ModelParams,
    lams: np.ndarray,
    window: tuple[float, float] | None = None,
    tol: float = 1e-10,
    reduce_fn: Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> np.ndarray:
    """3x3 transfer matrices for a batch of spectral parameters, shape (B, 3, 3)."""
    lams = np.asarray(lams, dtype=np.complex128).ravel()
    lax = params.lax()
    for p in packets:
        if not np.all(np.isfinite(p.envelope(np.linspace(*p.support, 64)))):
            raise ValueError("non-finite field sample")
    if window is None:
        window = _union_window(packets)
    if not packets or lams.size == 0:
        out = np.broadcast_to(np.eye(3, dtype=np.complex128), (lams.size, 3, 3)).copy()
        return out
    jd = np.asarray(lax.j_diag, dtype=float)
    dj_max = max(lax.gaps)
    _check_exponents(lams, dj_max, window, params.epsilon)
    kappa = float(np.max(np.abs(lams))) * dj_max / params.epsilon
    kappa += max(abs(lax.gammas[p.mode - 1]) * p.amplitude for p in packets) / params.epsilon
    kappa = max(kappa, 1.0)
    weights = [abs(lax.gammas[p.mode - 1]) for p in packets]
    return _adaptive_sweep(
        lams,
        window,
        params.epsilon,
        kappa,
        lambda xs: _slot_values_3x3(packets, lax, xs),
        lambda xs: _amplitude_profile(packets, weights, xs),
        _kernels.rk4_sweep_3x3,
        jd,
        tol,
        reduce_fn,
        breakpoints=[edge for p in packets for edge in p.support],
    )


def zs_transfer_batch(
    packet: Packet,
    epsilon: float,
    lams: np.ndarray,
    window: tuple[float, float] | None = None,
    tol: float = 1e-10,
    reduce_fn: Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> np.ndarray:
    """2x2 transfer matrices of the packet's own spectral problem, shape (B, 2, 2)."""
    lams = np.asarray(lams, dtype=np.complex128).ravel()
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if window is None:
        window = packet.support
    _check_exponents(lams, 2.0, window, epsilon)
    kappa = max(2.0 * float(np.max(np.abs(lams))) / epsilon, 1.0)
    kappa += packet.amplitude / epsilon

    def slots(xs: np.ndarray) -> np.ndarray:
        return packet.envelope(xs).astype(np.complex128)

    return _adaptive_sweep(
        lams,
        window,
        epsilon,
        kappa,
        slots,
        lambda xs: packet.envelope(xs),
        _kernels.rk4_sweep_2x2,
        2.0,
        tol,
        reduce_fn,
        breakpoints=packet.support,
    )


def transfer_matrix(
    packets: Sequence[Packet],
    params: ModelParams,
    lam: complex,
    window: tuple[float, float] | None = None,
    tol: float = 1e-10,
) -> TransferMatrix:
    """3x3 transfer matrix of the initial data across the window (left normalized)."""
    if window is None:
        window = _union_window(packets)
    T = transfer_batch(packets, params, np.array([lam]), window, tol)[0]
    return TransferMatrix(3, T, complex(lam), window[0], window[1])


def zs_transfer_matrix(
    packet: Packet,
    lam: complex,
    epsilon: float,
    window: tuple[float, float] | None = None,
    tol: float = 1e-10,
) -> TransferMatrix:
    """2x2 transfer matrix of the packet's nonselfadjoint spectral problem."""
    if window is None:
        window = packet.support
    T = zs_transfer_batch(packet, epsilon, np.array([lam]), window, tol)[0]
    return TransferMatrix(2, T, complex(lam), window[0], window[1])


# ---------------------------------------------------------------------------
# Minor evaluation
# ---------------------------------------------------------------------------


def minors_from_batch(T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d1 = T[:, 0, 0]
    d2 = T[:, 0, 0] * T[:, 1, 1] - T[:, 0, 1] * T[:, 1, 0]
    return d1, d2


def minor_values(
    packets: Sequence[Packet],
    params: ModelParams,
    lams: np.ndarray,
    which: int,
    window: tuple[float, float] | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """Values of leading principal minor 1 or 2 of the 3x3 transfer matrix."""
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    T = transfer_batch(packets, params, lams, window, tol, reduce_fn=_minor_error)
    d1, d2 = minors_from_batch(T)
    return d1 if which == 1 else d2


def zs_minor_values(
    packet: Packet,
    epsilon: float,
    lams: np.ndarray,
    window: tuple[float, float] | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    T = zs_transfer_batch(packet, epsilon, lams, window, tol, reduce_fn=_minor_error)
    return T[:, 0, 0]


# ---------------------------------------------------------------------------
# Argument-principle search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenvalueList:
    """Located discrete eigenvalues with per-point diagnostics."""

    points: np.ndarray
    residual_bounds: np.ndarray
    multiple: np.ndarray
    detectors: tuple[str, ...]
    converged: np.ndarray
    separation_tol: float = 1e-7
    acceptance_tol: float = 1e-8

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.complex128)
        res = np.asarray(self.residual_bounds, dtype=float)
        mult = np.asarray(self.multiple, dtype=bool)
        conv = np.asarray(self.converged, dtype=bool)
        if not (pts.shape == res.shape == mult.shape == conv.shape):
            raise ValueError("field arrays must share one shape")
        for arr in (pts, res, mult, conv):
            arr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "residual_bounds", res)
        object.__setattr__(self, "multiple", mult)
        object.__setattr__(self, "converged", conv)
        for i in range(pts.size):
            for j in range(i + 1, pts.size):
                if abs(pts[i] - pts[j]) <= self.separation_tol and not (mult[i] or mult[j]):
                    raise ValueError(
                        f"points {pts[i]} and {pts[j]} closer than the separation "
                        f"tolerance {self.separation_tol:.1e} and not flagged multiple"
                    )
        bad = conv & (res > self.acceptance_tol)
        if np.any(bad):
            raise ValueError(
                f"converged points with residuals above acceptance tolerance: "
                f"{res[bad]}"
            )

    def __len__(self) -> int:
        return int(self.points.size)


@lru_cache(maxsize=4)
def _gl_nodes(n: int = 16) -> np.ndarray:
    nodes, _ = np.polynomial.legendre.leggauss(n)
    return 0.5 * (nodes + 1.0)


_SPLIT = 0.5212320731  # off-center split point; dodges zeros on symmetry lines


def _subdivide(rect: tuple[float, float, float, float]) -> list[tuple[float, float, float, float]]:
    """Golden bisection along the longer side."""
    re0, re1, im0, im1 = rect
    if (re1 - re0) >= (im1 - im0):
        rm = re0 + _SPLIT * (re1 - re0)
        return [(re0, rm, im0, im1), (rm, re1, im0, im1)]
    im = im0 + _SPLIT * (im1 - im0)
    return [(re0, re1, im0, im), (re0, re1, im, im1)]


def _edge_nodes(a: complex, b: complex) -> np.ndarray:
    """Gauss-Legendre node positions along one oriented edge."""
    t = _gl_nodes()
    return a + t * (b - a)


def _winding_number(
    detector: Callable[[np.ndarray], np.ndarray],
    rect: tuple[float, float, float, float],
    max_inserts: int = 14,
) -> int:
    """Winding of the detector around a rectangle by phase continuation.

    The detector is sampled at 64 Gauss-Legendre nodes per edge; whenever the
    phase advances by more than pi/2 between neighbours the gap is bisected
    (adaptive subdivision) until the argument is continuously tracked, which
    pins the winding integral to an integer.  A persistent jump of about pi
    signals a zero on or next to the contour.
    """
    re0, re1, im0, im1 = rect
    corners = [
        complex(re0, im0),
        complex(re1, im0),
        complex(re1, im1),
        complex(re0, im1),
        complex(re0, im0),
    ]
    zs = np.concatenate(
        [_edge_nodes(a, b) for a, b in zip(corners[:-1], corners[1:])]
    )
    vals = detector(zs)
    zs = zs.tolist()
    vals = vals.tolist()
    if any(v == 0.0 for v in vals):
        raise ContourError("detector vanished exactly on a contour node; perturb the region")
    # close the loop
    zs.append(zs[0])
    vals.append(vals[0])
    total = 0.0
    i = 0
    while i < len(zs) - 1:
        dphi = np.angle(vals[i + 1] / vals[i])
        if abs(dphi) > 0.5 * np.pi:
            inserted = False
            for _ in range(max_inserts):
                mid = 0.5 * (zs[i] + zs[i + 1])
                if mid == zs[i] or mid == zs[i + 1]:
                    break
                fmid = detector(np.array([mid]))[0]
                if fmid == 0.0:
                    raise ContourError(
                        "detector vanished on a contour refinement point; perturb the region"
                    )
                zs.insert(i + 1, mid)
                vals.insert(i + 1, fmid)
                dphi = np.angle(vals[i + 1] / vals[i])
                if abs(dphi) <= 0.5 * np.pi:
                    inserted = True
                    break
            if not inserted and abs(dphi) > 0.5 * np.pi:
                raise ContourError(
                    f"argument jump {dphi:.2f} persists after maximal subdivision on "
                    f"{rect}; a zero lies on or near the contour - perturb the region"
                )
        total += dphi
        i += 1
    winding = total / (2.0 * np.pi)
    count = int(round(winding))
    if abs(winding - count) > 0.1:
        raise ContourError(f"winding {winding:.3f} on {rect} is not near an integer")
    return count


def _winding_candidates(
    detector: Callable[[np.ndarray], np.ndarray],
    region: tuple[float, float, float, float],
    separation_tol: float,
    max_depth: int = 48,
) -> list[tuple[complex, int, tuple[float, float, float, float]]]:
    """Rectangles isolating zeros, shrunk until Newton can be trusted locally.

    Multi-zero rectangles are split until each holds one zero (or reaches
    the separation scale, flagging a suspected multiple); single-zero
    rectangles keep shrinking to a small isolation diameter so the polish
    stage starts next to its zero.
    """
    re0, re1, im0, im1 = region
    if not (re1 > re0 and im1 > im0):
        raise ValueError(f"degenerate search region {region}")
    scale = math.hypot(re1 - re0, im1 - im0)
    isolate = max(2e-2 * scale, 4.0 * separation_tol)
    out: list[tuple[complex, int, tuple[float, float, float, float]]] = []
    queue: list[tuple[tuple[float, float, float, float], int]] = [(region, 0)]
    while queue:
        rect, depth = queue.pop()
        count = _winding_number(detector, rect)
        if count == 0:
            continue
        diam = math.hypot(rect[1] - rect[0], rect[3] - rect[2])
        small = diam <= (isolate if count == 1 else separation_tol)
        if small or depth >= max_depth:
            center = complex(0.5 * (rect[0] + rect[1]), 0.5 * (rect[2] + rect[3]))
            out.append((center, count, rect))
        else:
            queue.extend((r, depth + 1) for r in _subdivide(rect))
    return out


def _newton_polish(
    candidates: list[tuple[complex, int, tuple[float, float, float, float]]],
    detector_coarse: Callable[[np.ndarray], np.ndarray],
    detector_fine: Callable[[np.ndarray], np.ndarray],
    newton_tol: float = 1e-10,
    newton_maxit: int = 50,
) -> list[tuple[complex, float, bool, int, bool]]:
    """Newton iteration with finite-difference derivatives, batched over roots.

    Roots are first walked in on the search-grade detector, then polished on
    the tight one; an iterate escaping its isolating rectangle or failing to
    converge is reported per point, not raised.
    """
    if not candidates:
        return []
    zs = np.array([c for c, _, _ in candidates], dtype=np.complex128)
    counts = [n for _, n, _ in candidates]
    rects = [r for _, _, r in candidates]
    conv = np.zeros(zs.size, dtype=bool)
    fz = np.full(zs.size, np.inf)
    for det in (detector_coarse, detector_fine):
        active = np.ones(zs.size, dtype=bool)
        conv[:] = False
        for _ in range(newton_maxit):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            za = zs[idx]
            d = 1e-6 * (1.0 + np.abs(za))
            vals = det(np.concatenate([za, za + d, za - d]))
            m = idx.size
            f0, fp, fm = vals[:m], vals[m : 2 * m], vals[2 * m :]
            fz[idx] = np.abs(f0)
            deriv = (fp - fm) / (2.0 * d)
            dead = deriv == 0.0
            step = np.where(dead, 0.0, f0 / np.where(dead, 1.0, deriv))
            zs[idx] = za - step
            done = dead | (np.abs(step) <= newton_tol * (1.0 + np.abs(zs[idx])))
            conv[idx[done & ~dead]] = True
            active[idx[done]] = False
    for i, (re0, re1, im0, im1) in enumerate(rects):
        wre, wim = re1 - re0, im1 - im0
        inside = (re0 - wre <= zs[i].real <= re1 + wre) and (
            im0 - wim <= zs[i].imag <= im1 + wim
        )
        if not inside:
            conv[i] = False
    good = np.nonzero(conv)[0]
    if good.size:
        fz[good] = np.abs(detector_fine(zs[good]))
    results = [
        (complex(zs[i]), float(fz[i]), bool(conv[i]), counts[i], counts[i] > 1)
        for i in range(zs.size)
    ]
    merged: list[tuple[complex, float, bool, int, bool]] = []
    for item in sorted(results, key=lambda r: r[1]):
        if any(abs(item[0] - m[0]) <= 1e-7 for m in merged):
            continue
        merged.append(item)
    return merged


def _located_list(
    found: list[tuple[complex, float, bool, int, str]],
    separation_tol: float,
    acceptance_tol: float,
) -> EigenvalueList:
    found = sorted(found, key=lambda r: (-r[0].imag, r[0].real))
    pts = np.array([f[0] for f in found], dtype=np.complex128)
    res = np.array([f[1] for f in found], dtype=float)
    conv = np.array([f[2] for f in found], dtype=bool)
    mult = np.array([f[3] > 1 for f in found], dtype=bool)
    dets = tuple(f[4] for f in found)
    return EigenvalueList(pts, res, mult, dets, conv, separation_tol, acceptance_tol)


def locate_eigenvalues(
    packets: Sequence[Packet],
    params: ModelParams,
    region: tuple[float, float, float, float],
    window: tuple[float, float] | None = None,
    tol: float = 1e-10,
    separation_tol: float = 1e-7,
    acceptance_tol: float = 1e-8,
) -> EigenvalueList:
    """Discrete eigenvalues of the 3x3 problem inside a rectangle of the plane.

    Both leading principal minors are searched; a point where both vanish is
    a mode-2 eigenvalue and is reported once with detector tag "m1+m2".
    """
    if not packets:
        return _located_list([], separation_tol, acceptance_tol)
    if window is None:
        window = _union_window(packets)
    lax = params.lax()
    jd = np.asarray(lax.j_diag, dtype=float)
    re0, re1, im0, im1 = region
    probes = np.array(
        [complex(re0, im0), complex(re1, im0), complex(re0, im1), complex(re1, im1),
         complex(0.5 * (re0 + re1), 0.5 * (im0 + im1))],
        dtype=np.complex128,
    )
    _check_exponents(probes, max(lax.gaps), window, params.epsilon)
    kappa = float(np.max(np.abs(probes))) * max(lax.gaps) / params.epsilon
    kappa += max(abs(lax.gammas[p.mode - 1]) * p.amplitude for p in packets) / params.epsilon
    kappa = max(kappa, 1.0)
    weights = [abs(lax.gammas[p.mode - 1]) for p in packets]
    slot_fn = lambda xs: _slot_values_3x3(packets, lax, xs)
    profile_fn = lambda xs: _amplitude_profile(packets, weights, xs)
    breakpoints = [edge for p in packets for edge in p.support]
    search_tol = max(tol, 1e-3)
    coarse = _freeze_sweep(probes, window, params.epsilon, kappa, slot_fn, profile_fn,
                           _kernels.rk4_sweep_3x3, jd, search_tol, _minor_error, breakpoints)

    def det(frozen: _FrozenSweep, which: int):
        def inner(lams: np.ndarray) -> np.ndarray:
            d1, d2 = minors_from_batch(frozen(lams))
            return d1 if which == 1 else d2
        return inner

    # A minor identically equal to one (no packet feeds it) needs no search.
    probe_vals = minors_from_batch(coarse(probes))
    cand1 = (
        _winding_candidates(det(coarse, 1), region, separation_tol)
        if np.max(np.abs(probe_vals[0] - 1.0)) > 1e-12 else []
    )
    cand2 = (
        _winding_candidates(det(coarse, 2), region, separation_tol)
        if np.max(np.abs(probe_vals[1] - 1.0)) > 1e-12 else []
    )
    z1: list = []
    z2: list = []
    if cand1 or cand2:
        cand_pts = np.array([c for c, _, _ in cand1 + cand2], dtype=np.complex128)
        kappa_fine = float(np.max(np.abs(cand_pts))) * max(lax.gaps) / params.epsilon
        kappa_fine += max(
            abs(lax.gammas[p.mode - 1]) * p.amplitude for p in packets
        ) / params.epsilon
        fine = _freeze_sweep(cand_pts, window, params.epsilon, max(kappa_fine, 1.0),
                             slot_fn, profile_fn, _kernels.rk4_sweep_3x3, jd, tol,
                             _minor_error, breakpoints)
        z1 = _newton_polish(cand1, det(coarse, 1), det(fine, 1))
        z2 = _newton_polish(cand2, det(coarse, 2), det(fine, 2))

    found: list[tuple[complex, float, bool, int, str]] = []
    used2 = [False] * len(z2)
    for p1, r1, c1, n1, m1 in z1:
        tag = "m1"
        res, conv, cnt = r1, c1, n1
        for i, (p2, r2, c2, n2, m2) in enumerate(z2):
            if abs(p1 - p2) <= 10.0 * separation_tol and not used2[i]:
                used2[i] = True
                tag = "m1+m2"
                res = max(r1, r2)
                conv = c1 and c2
                cnt = max(n1, n2)
                break
        found.append((p1, res, conv, cnt, tag))
    for i, (p2, r2, c2, n2, m2) in enumerate(z2):
        if not used2[i]:
            found.append((p2, r2, c2, n2, "m2"))
    return _located_list(found, separation_tol, acceptance_tol)


def zs_locate_eigenvalues(
    packet: Packet,
    epsilon: float,
    region: tuple[float, float, float, float],
    window: tuple[float, float] | None = None,
    tol: float = 1e-10,
    separation_tol: float = 1e-7,
    acceptance_tol: float = 1e-8,
) -> EigenvalueList:
    """Discrete eigenvalues of a packet's own 2x2 problem inside a rectangle."""
    if window is None:
        window = packet.support
    re0, re1, im0, im1 = region
    probes = np.array(
        [complex(re0, im0), complex(re1, im0), complex(re0, im1), complex(re1, im1),
         complex(0.5 * (re0 + re1), 0.5 * (im0 + im1))],
        dtype=np.complex128,
    )
    _check_exponents(probes, 2.0, window, epsilon)
    kappa = 2.0 * float(np.max(np.abs(probes))) / epsilon + packet.amplitude / epsilon
    slot_fn = lambda xs: packet.envelope(xs).astype(np.complex128)
    search_tol = max(tol, 1e-3)
    coarse = _freeze_sweep(probes, window, epsilon, kappa, slot_fn, packet.envelope,
                           _kernels.rk4_sweep_2x2, 2.0, search_tol, _minor_error,
                           packet.support)

    def det(frozen: _FrozenSweep):
        def inner(lams: np.ndarray) -> np.ndarray:
            return frozen(lams)[:, 0, 0]
        return inner

    cands = _winding_candidates(det(coarse), region, separation_tol)
    zeros: list = []
    if cands:
        cand_pts = np.array([c for c, _, _ in cands], dtype=np.complex128)
        kappa_fine = 2.0 * float(np.max(np.abs(cand_pts))) / epsilon + packet.amplitude / epsilon
        fine = _freeze_sweep(cand_pts, window, epsilon, max(kappa_fine, 1.0), slot_fn,
                             packet.envelope, _kernels.rk4_sweep_2x2, 2.0, tol,
                             _minor_error, packet.support)
        zeros = _newton_polish(cands, det(coarse), det(fine))
    found = [(z, r, c, n, "a") for (z, r, c, n, m) in zeros]
    return _located_list(found, separation_tol, acceptance_tol)


def _zs_two_sided_columns(
    packet: Packet,
    epsilon: float,
    lams: np.ndarray,
    tol: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Left-normalized column 1 and right-normalized column 2 at the packet center.

    Each half-window sweep only crosses its own stable region, so both columns
    converge entrywise even at discrete eigenvalues; the one-sided sweep does
    not (its far off-corner entry is exponentially ill-conditioned there).
    """
    lo, hi = packet.support
    xm = packet.center
    kappa = 2.0 * float(np.max(np.abs(lams))) / epsilon + packet.amplitude / epsilon

    def slots(xs: np.ndarray) -> np.ndarray:
        return packet.envelope(xs).astype(np.complex128)

    def run(grid: np.ndarray) -> np.ndarray:
        s_start, s_mid, s_end = _step_samples(grid, slots, packet.support)
        return _kernels.rk4_sweep_2x2(lams, grid, s_start, s_mid, s_end, 2.0, epsilon)

    out = []
    for side_window, col in (((lo, xm), 0), ((xm, hi), 1)):
        a, b = side_window
        xs = _graded_grid((a, b), packet.envelope, kappa, epsilon, tol,
                          breakpoints=packet.support)
        if col == 1:
            xs = xs[::-1]

        def reduce_col(cur: np.ndarray, prev: np.ndarray, col: int = col) -> float:
            c, p = cur[:, :, col], prev[:, :, col]
            return float(np.max(np.abs(c - p) / np.maximum(1.0, np.abs(c))))

        prev = run(xs)
        err = math.inf
        ok = False
        for _ in range(5):
            xs = _refine(xs)
            cur = run(xs)
            err = reduce_col(cur, prev)
            if err <= tol:
                ok = True
                break
            prev = cur
        if not ok:
            raise StiffnessError(
                f"two-sided sweep stalled at error {err:.2e} (tolerance {tol:.1e})"
            )
        out.append(cur[:, :, col])
    return out[0], out[1]


def zs_norming_from_oracle(
    packet: Packet,
    epsilon: float,
    taus: np.ndarray,
    tol: float = 1e-11,
) -> np.ndarray:
    """Exact norming constants c_k = b_k / a'(i tau_k) from the integrator.

    The left-decaying solution is matched against the right-decaying one at
    the packet center: their proportionality gives b_k, and the Wronskian of
    the two columns gives a, differentiated by a central finite difference.
    The supplied taus are polished on the Wronskian first, so slightly
    perturbed (for example truncation-shifted) inputs are accepted.
    """
    taus = np.asarray(taus, dtype=float)
    zs = (1j * taus).astype(np.complex128)

    def wronskian(lams: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        c, d = _zs_two_sided_columns(packet, epsilon, lams, tol)
        return c[:, 0] * d[:, 1] - c[:, 1] * d[:, 0], c, d

    for _ in range(8):
        delta = 1e-6 * (1.0 + np.abs(zs))
        batch = np.concatenate([zs, zs + delta, zs - delta])
        w, c, d = wronskian(batch)
        n = taus.size
        w0, wp, wm = w[:n], w[n : 2 * n], w[2 * n :]
        aprime = (wp - wm) / (2.0 * delta)
        if np.any(aprime == 0.0):
            raise ValueError("vanishing a' at a requested eigenvalue")
        step = w0 / aprime
        zs = zs - step
        if np.max(np.abs(step)) <= 1e-12 * (1.0 + np.max(np.abs(zs))):
            break
    else:
        raise ValueError("eigenvalue polish on the Wronskian did not converge")

    delta = 1e-6 * (1.0 + np.abs(zs))
    batch = np.concatenate([zs, zs + delta, zs - delta])
    w, c, d = wronskian(batch)
    n = taus.size
    aprime = (w[n : 2 * n] - w[2 * n :]) / (2.0 * delta)
    cc, dd = c[:n], d[:n]
    # Proportionality of the two decaying columns at the matching point.
    use_top = np.abs(dd[:, 0]) >= np.abs(dd[:, 1])
    b = np.where(use_top, cc[:, 0] / dd[:, 0], cc[:, 1] / dd[:, 1])
    return b / aprime
