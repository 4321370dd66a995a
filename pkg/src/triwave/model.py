"""Model conventions, field containers, packets, and model-level diagnostics.

The three-wave resonant interaction system solved throughout this package is

    eps * (d_t + c_j d_x) q_j = i eta_j * conj(q_k) * conj(q_l),   (j,k,l) cyclic,

with strictly ordered characteristic speeds c1 > c2 > c3 and interaction
signs eta_j in {+1, -1}.  The associated 3x3 spectral problem is

    eps * d_x psi = (-i lam J + U(x,t)) psi,      J = diag(c1, c2, c3),

where U is skew-Hermitian and carries mode j in the off-diagonal pair
(k, l) of the complementary indices.  The temporal half of the Lax pair
uses K = diag(c2*c3, c3*c1, c1*c2).  Only the sign patterns
(eta1, eta2, eta3) = +-(1, -1, 1) admit this skew-Hermitian (soliton
supporting) structure; the other patterns are explosive and are accepted
by ModelParams for simulation only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

__all__ = [
    "ModelParams",
    "LaxCoefficients",
    "Packet",
    "GridSpec",
    "FieldGrid",
    "ResidualReport",
    "BoundaryDecayError",
    "MODE_PAIRS",
    "residual_norm",
    "manley_rowe_invariants",
    "packet_mass",
]

# Mode j (1-based) lives in the off-diagonal pair (k, l), 0-based row/col, k < l.
MODE_PAIRS: tuple[tuple[int, int], ...] = ((1, 2), (0, 2), (0, 1))

_SOLITON_SIGN_PATTERNS = {(1, -1, 1), (-1, 1, -1)}


class BoundaryDecayError(ValueError):
    """Fields do not decay at the spatial boundaries, so conservation checks are meaningless."""


@dataclass(frozen=True)
class ModelParams:
    """Model convention: semiclassical parameter, speeds, interaction signs.

    ``conjugate_fields`` toggles the global conjugation convention; it flips
    the sign of the imaginary coupling unit and is equivalent to negating all
    three ``couplings``.
    """

    epsilon: float
    speeds: tuple[float, float, float] = (1.0, 0.0, -1.0)
    couplings: tuple[int, int, int] = (1, -1, 1)
    conjugate_fields: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")
        c = tuple(float(v) for v in self.speeds)
        if len(c) != 3 or not all(math.isfinite(v) for v in c):
            raise ValueError(f"speeds must be three finite reals, got {self.speeds}")
        if not (c[0] > c[1] > c[2]):
            raise ValueError(
                f"speeds must be strictly decreasing (c1 > c2 > c3), got {self.speeds}"
            )
        eta = tuple(int(v) for v in self.couplings)
        if len(eta) != 3 or any(v not in (-1, 1) for v in eta):
            raise ValueError(f"couplings must be three signs +-1, got {self.couplings}")
        object.__setattr__(self, "speeds", c)
        object.__setattr__(self, "couplings", eta)

    @property
    def coupling_unit(self) -> complex:
        """The unit multiplying eta_j * conj(q_k) * conj(q_l) in the equations."""
        return -1j if self.conjugate_fields else 1j

    @property
    def effective_couplings(self) -> tuple[int, int, int]:
        """Signs after folding the global conjugation toggle into eta."""
        if self.conjugate_fields:
            return tuple(-v for v in self.couplings)  # type: ignore[return-value]
        return self.couplings

    def supports_solitons(self) -> bool:
        return self.effective_couplings in _SOLITON_SIGN_PATTERNS

    def lax(self) -> "LaxCoefficients":
        return LaxCoefficients.from_params(self)


@dataclass(frozen=True)
class LaxCoefficients:
    """Coefficients of the 3x3 Lax pair induced by a ModelParams.

    gaps[j]    : Delta_j = J_k - J_l > 0 for mode j's pair (k < l)
    rfactors[j]: |gamma_j| = 1 / sqrt(Delta_k * Delta_l), (j,k,l) cyclic
    gammas[j]  : U[k, l] = gamma_j * (q_j or conj(q_j)); lower entry is
                 -conj(gamma_j) times the conjugate slot value
    """

    j_diag: tuple[float, float, float]
    k_diag: tuple[float, float, float]
    gaps: tuple[float, float, float]
    rfactors: tuple[float, float, float]
    gammas: tuple[complex, complex, complex]

    @staticmethod
    def from_params(params: ModelParams) -> "LaxCoefficients":
        eta = params.effective_couplings
        if eta not in _SOLITON_SIGN_PATTERNS:
            raise ValueError(
                "coupling pattern "
                f"{params.couplings} (conjugate_fields={params.conjugate_fields}) has no "
                "skew-Hermitian Lax structure; soliton construction requires "
                "effective signs +-(1, -1, 1)"
            )
        c1, c2, c3 = params.speeds
        jd = (c1, c2, c3)
        kd = (c2 * c3, c3 * c1, c1 * c2)
        gaps = (c2 - c3, c1 - c3, c1 - c2)
        r = tuple(
            1.0 / math.sqrt(gaps[k] * gaps[l])
            for k, l in ((1, 2), (2, 0), (0, 1))
        )
        gammas = (1j * eta[0] * r[0], complex(r[1]), complex(r[2]))
        return LaxCoefficients(jd, kd, gaps, r, gammas)  # type: ignore[arg-type]

    def mode_pair(self, mode: int) -> tuple[int, int]:
        return MODE_PAIRS[mode - 1]


def _sech(y: np.ndarray) -> np.ndarray:
    # 1/cosh without overflow for large |y|.
    a = np.abs(y)
    return np.where(a < 350.0, 1.0 / np.cosh(np.minimum(a, 350.0)), 0.0)


def _default_halfwidth(shape: str, tol: float) -> float:
    if shape == "sech":
        return math.acosh(1.0 / tol)
    if shape == "gaussian":
        return math.sqrt(math.log(1.0 / tol))
    raise ValueError(f"no analytic support halfwidth for shape {shape!r}")


@dataclass(frozen=True)
class Packet:
    """One localized real envelope amplitude * shape((x - center) / width).

    The envelope is treated as exactly zero beyond ``support_halfwidth`` of
    the center.  For the analytic shapes the halfwidth defaults to the radius
    where the profile falls to ``truncation_tol`` of the peak.  Tabulated
    shapes supply ``samples = (y, f)`` on the unit-width coordinate; their
    support is the sampled domain.
    """

    mode: int
    shape: str = "sech"
    amplitude: float = 1.0
    width: float = 1.0
    center: float = 0.0
    support_halfwidth: float | None = None
    truncation_tol: float = 1e-14
    samples: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    _spline: object = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.mode not in (1, 2, 3):
            raise ValueError(f"mode must be 1, 2, or 3, got {self.mode}")
        if self.shape not in ("sech", "gaussian", "tabulated"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if not (self.amplitude > 0 and math.isfinite(self.amplitude)):
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ValueError(f"width must be positive, got {self.width}")
        if not (0 < self.truncation_tol < 1):
            raise ValueError(f"truncation_tol must lie in (0, 1), got {self.truncation_tol}")

        if self.shape == "tabulated":
            if self.samples is None:
                raise ValueError("tabulated shape requires samples=(y, f)")
            ys = np.asarray(self.samples[0], dtype=float)
            fs = np.asarray(self.samples[1], dtype=float)
            if ys.ndim != 1 or ys.shape != fs.shape or ys.size < 4:
                raise ValueError("tabulated samples need matching 1-d arrays of length >= 4")
            if np.any(np.diff(ys) <= 0):
                raise ValueError("tabulated sample abscissae must be strictly increasing")
            if np.any(fs < -1e-12) or not np.all(np.isfinite(fs)):
                raise ValueError("tabulated envelope values must be finite and nonnegative")
            from scipy.interpolate import CubicSpline

            object.__setattr__(self, "_spline", CubicSpline(ys, np.maximum(fs, 0.0)))
            if self.support_halfwidth is None:
                hw = self.width * float(max(abs(ys[0]), abs(ys[-1])))
                object.__setattr__(self, "support_halfwidth", hw)
        elif self.support_halfwidth is None:
            hw = self.width * _default_halfwidth(self.shape, self.truncation_tol)
            object.__setattr__(self, "support_halfwidth", hw)
        if not (self.support_halfwidth > 0):
            raise ValueError("support_halfwidth must be positive")

        edge = max(
            self.base_shape(np.array([self.support_halfwidth / self.width]))[0],
            self.base_shape(np.array([-self.support_halfwidth / self.width]))[0],
        )
        if edge > self.truncation_tol * 1.0000001:
            raise ValueError(
                f"envelope at the support edge is {edge:.3e} of peak, above the "
                f"truncation tolerance {self.truncation_tol:.1e}; widen support_halfwidth "
                "or loosen truncation_tol"
            )
        self._check_single_lobe()

    def base_shape(self, y: np.ndarray) -> np.ndarray:
        """Unit-amplitude profile on the unit-width coordinate, zero outside support."""
        y = np.asarray(y, dtype=float)
        if self.shape == "sech":
            out = _sech(y)
        elif self.shape == "gaussian":
            out = np.exp(-np.minimum(y * y, 700.0))
        else:
            ys = np.asarray(self.samples[0], dtype=float)  # type: ignore[index]
            out = np.zeros_like(y)
            inside = (y >= ys[0]) & (y <= ys[-1])
            if np.any(inside):
                out[inside] = np.maximum(self._spline(y[inside]), 0.0)  # type: ignore[operator]
        cut = self.support_halfwidth / self.width  # type: ignore[operator]
        return np.where(np.abs(y) <= cut, out, 0.0)

    def envelope(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.amplitude * self.base_shape((x - self.center) / self.width)

    @property
    def support(self) -> tuple[float, float]:
        hw = float(self.support_halfwidth)  # type: ignore[arg-type]
        return (self.center - hw, self.center + hw)

    def translated(self, dx: float) -> "Packet":
        return Packet(
            mode=self.mode,
            shape=self.shape,
            amplitude=self.amplitude,
            width=self.width,
            center=self.center + dx,
            support_halfwidth=self.support_halfwidth,
            truncation_tol=self.truncation_tol,
            samples=self.samples,
        )

    def canonical(self) -> "Packet":
        """Width-1, center-0 copy; the spectral problem of (A, w) at eps equals
        this packet's problem at eps / w."""
        return Packet(
            mode=self.mode,
            shape=self.shape,
            amplitude=self.amplitude,
            width=1.0,
            center=0.0,
            support_halfwidth=float(self.support_halfwidth) / self.width,  # type: ignore[arg-type]
            truncation_tol=self.truncation_tol,
            samples=self.samples,
        )

    def _check_single_lobe(self) -> None:
        lo, hi = self.support
        xs = np.linspace(lo, hi, 1024)
        f = self.envelope(xs)
        if not np.all(np.isfinite(f)):
            raise ValueError("envelope produced non-finite samples")
        if np.any(f < -1e-12 * self.amplitude):
            raise ValueError("envelope must be nonnegative")
        tol = 1e-10 * self.amplitude
        d = np.diff(f)
        rising = d > tol
        falling = d < -tol
        # A single lobe never rises again after it has fallen.
        fell = np.maximum.accumulate(falling)
        if np.any(rising & fell):
            raise ValueError("envelope is not single-lobe (multiple local maxima)")


@dataclass(frozen=True)
class GridSpec:
    """Rectangular (x, t) evaluation grid."""

    x_min: float
    x_max: float
    nx: int
    t_min: float
    t_max: float
    nt: int

    def __post_init__(self) -> None:
        if self.nx < 1 or self.nt < 1:
            raise ValueError("grid sizes must be positive")
        if self.nx > 1 and not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.nt > 1 and not self.t_max > self.t_min:
            raise ValueError("t_max must exceed t_min")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ts(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.nt)

    def refined(self) -> "GridSpec":
        """Spec with both spacings halved (node-aligned)."""
        return GridSpec(
            self.x_min, self.x_max, 2 * self.nx - 1,
            self.t_min, self.t_max, 2 * self.nt - 1,
        )


@dataclass(frozen=True)
class FieldGrid:
    """Sampled complex amplitudes q1, q2, q3 on a regular (t, x) grid."""

    x_min: float
    x_max: float
    nx: int
    t_min: float
    t_max: float
    nt: int
    q1: np.ndarray
    q2: np.ndarray
    q3: np.ndarray
    params: ModelParams

    def __post_init__(self) -> None:
        if self.nx < 1 or self.nt < 1:
            raise ValueError("grid sizes must be positive")
        if self.nx > 1 and not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.nt > 1 and not self.t_max > self.t_min:
            raise ValueError("t_max must exceed t_min")
        shape = (self.nt, self.nx)
        arrays = []
        for name in ("q1", "q2", "q3"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.complex128)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            arrays.append(arr)
            object.__setattr__(self, name, arr)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ts(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.nt)

    @property
    def hx(self) -> float:
        if self.nx < 2:
            raise ValueError("hx undefined for nx < 2")
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def ht(self) -> float:
        if self.nt < 2:
            raise ValueError("ht undefined for nt < 2")
        return (self.t_max - self.t_min) / (self.nt - 1)

    @property
    def values(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.q1, self.q2, self.q3)


@dataclass(frozen=True)
class ResidualReport:
    """Interior finite-difference residual norms of the model equations."""

    max_residual: tuple[float, float, float]
    l2_residual: tuple[float, float, float]
    interior_count: int

    def __post_init__(self) -> None:
        vals = (*self.max_residual, *self.l2_residual)
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise ValueError("residual norms must be finite and nonnegative")

    @property
    def max_overall(self) -> float:
        return max(self.max_residual)


def residual_norm(grid: FieldGrid) -> ResidualReport:
    """Residual of eps*(d_t + c_j d_x) q_j - i eta_j conj(q_k q_l) on interior points.

    Derivatives use second-order centered differences in both x and t, so for
    fields sampled from an exact solution the norms decay like O(h^2).
    """
    if grid.nx < 3 or grid.nt < 3:
        raise ValueError(f"residual_norm needs nx, nt >= 3, got ({grid.nx}, {grid.nt})")
    qs = grid.values
    if not all(np.all(np.isfinite(q.view(float))) for q in qs):
        raise ValueError("grid contains non-finite samples")
    p = grid.params
    eps, hx, ht = p.epsilon, grid.hx, grid.ht
    unit = p.coupling_unit
    maxr, l2r = [], []
    for j in range(3):
        k, l = (j + 1) % 3, (j + 2) % 3
        q, qk, ql = qs[j], qs[k], qs[l]
        dt = (q[2:, 1:-1] - q[:-2, 1:-1]) / (2.0 * ht)
        dx = (q[1:-1, 2:] - q[1:-1, :-2]) / (2.0 * hx)
        coupling = unit * p.couplings[j] * np.conj(qk[1:-1, 1:-1] * ql[1:-1, 1:-1])
        res = eps * (dt + p.speeds[j] * dx) - coupling
        maxr.append(float(np.max(np.abs(res))))
        l2r.append(float(np.sqrt(np.sum(np.abs(res) ** 2) * hx * ht)))
    interior = (grid.nt - 2) * (grid.nx - 2)
    return ResidualReport(tuple(maxr), tuple(l2r), interior)  # type: ignore[arg-type]


def manley_rowe_invariants(
    grid: FieldGrid,
    boundary_tol: float = 1e-8,
    periodic: bool = False,
) -> np.ndarray:
    """Time series M_jk(t) = eta_k int |q_j|^2 dx - eta_j int |q_k|^2 dx.

    Rows are the pairs (1,2), (1,3), (2,3); quadrature is trapezoidal in x.
    Raises BoundaryDecayError when the fields do not vanish at the x
    boundaries (conservation cannot be expected on a truncated domain).
    """
    if grid.nx < 2:
        raise ValueError("need nx >= 2 for quadrature")
    qs = grid.values
    if not periodic:
        edge = max(
            float(np.max(np.abs(q[:, c]))) for q in qs for c in (0, -1)
        )
        if edge > boundary_tol:
            raise BoundaryDecayError(
                f"max boundary amplitude {edge:.3e} exceeds tolerance {boundary_tol:.1e}"
            )
    eta = grid.params.couplings
    norms = [np.trapz(np.abs(q) ** 2, dx=grid.hx, axis=1) for q in qs]
    out = np.empty((3, grid.nt))
    for row, (j, k) in enumerate(((0, 1), (0, 2), (1, 2))):
        out[row] = eta[k] * norms[j] - eta[j] * norms[k]
    return out


def packet_mass(p: Packet) -> float:
    """Integral of the envelope over its truncated support (relative error <= 1e-10)."""
    lo, hi = p.support
    val, err = quad(
        lambda x: float(p.envelope(np.array([x]))[0]),
        lo,
        hi,
        points=[p.center],
        epsabs=1e-14,
        epsrel=1e-12,
        limit=400,
    )
    if not math.isfinite(val) or val <= 0:
        raise ValueError(f"packet mass quadrature failed (value {val})")
    return float(val)
