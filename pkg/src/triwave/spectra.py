"""Per-packet discrete scattering data.

Eigenvalues of the packet's 2x2 spectral problem are purely imaginary,
lam_k = i tau_k, with tau_k in (0, peak amplitude).  A packet of width w at
semiclassical parameter eps is equivalent to its width-1 "canonical" packet
at eps/w, so all formulas are stated at unit width.

The shipped norming-constant convention (a WKB-motivated default, exact for
reflectionless data) is

    c_k = b_k / a'(i tau_k),   b_k = (-1)^(k+1),
    a(z) = prod_m (z - i tau_m) / (z + i tau_m),

which reproduces the exact multi-soliton sech data whenever the quantized
ladder is reflectionless and places the k = 0 soliton component at the
packet center.  An "oracle" convention extracting the exact constants from
the direct-scattering integrator is available for diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .model import Packet, packet_mass
from . import scattering

__all__ = [
    "ZSData",
    "sech_spectrum_exact",
    "bohr_sommerfeld_spectrum",
    "wkb_norming_constants",
    "packet_spectrum",
    "quantization_count",
    "turning_point_integral",
    "blaschke_a",
]

_BOUNDARY_TOL = 1e-12
WKB_CONVENTION = "wkb-alternating-blaschke-default"
ORACLE_CONVENTION = "oracle-exact"


@dataclass(frozen=True)
class ZSData:
    """Discrete 2x2 scattering data of one packet: taus and norming constants.

    ``epsilon`` is the (physical) semiclassical parameter the data was
    computed at; width rescaling is already folded into the taus.  Norming
    constants are stated in the centered canonical frame; embeddings apply
    center shifts.
    """

    epsilon: float
    taus: np.ndarray
    norming: np.ndarray | None = None
    source_packet: Packet | None = None
    norming_convention: str | None = None
    excluded_boundary_indices: tuple[int, ...] = ()
    peak: float | None = None

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        taus = np.asarray(self.taus, dtype=float)
        taus.setflags(write=False)
        object.__setattr__(self, "taus", taus)
        if taus.size:
            if np.any(taus <= 0) or not np.all(np.isfinite(taus)):
                raise ValueError("taus must be positive and finite")
            if np.any(np.diff(taus) >= 0):
                raise ValueError("taus must be strictly decreasing")
            peak = self.peak
            if peak is None and self.source_packet is not None:
                peak = float(self.source_packet.amplitude)
            if peak is not None and np.any(taus >= peak):
                raise ValueError("taus must lie strictly below the envelope peak")
        if self.norming is not None:
            c = np.asarray(self.norming, dtype=np.complex128)
            if c.shape != taus.shape:
                raise ValueError("norming constants must match taus")
            if taus.size and (np.any(c == 0) or not np.all(np.isfinite(c.view(float)))):
                raise ValueError("norming constants must be nonzero and finite")
            c.setflags(write=False)
            object.__setattr__(self, "norming", c)

    def __len__(self) -> int:
        return int(self.taus.size)

    def with_norming(self, norming: np.ndarray, convention: str) -> "ZSData":
        return ZSData(
            self.epsilon,
            self.taus,
            norming,
            self.source_packet,
            convention,
            self.excluded_boundary_indices,
            self.peak,
        )


def quantization_count(mass: float, epsilon: float, offset: float = 0.5) -> int:
    """Number of indices with (k + offset) * pi * eps < mass."""
    return max(0, int(math.ceil(mass / (math.pi * epsilon) - offset - _BOUNDARY_TOL)))


def sech_spectrum_exact(amplitude: float, width: float, epsilon: float) -> ZSData:
    """Closed-form eigenvalues tau_k = A - (k + 1/2) eps / w of a sech packet.

    Indices whose tau lands within the boundary tolerance of zero are
    excluded (the reflectionless construction needs poles strictly off the
    real axis) and recorded.
    """
    if min(amplitude, width, epsilon) <= 0:
        raise ValueError("amplitude, width, epsilon must be positive")
    eps_c = epsilon / width
    taus = []
    excluded = []
    k = 0
    while True:
        tau = amplitude - (k + 0.5) * eps_c
        if tau <= _BOUNDARY_TOL * amplitude:
            if abs(tau) <= _BOUNDARY_TOL * amplitude:
                excluded.append(k)
            break
        taus.append(tau)
        k += 1
    return ZSData(
        epsilon,
        np.asarray(taus, dtype=float),
        peak=amplitude,
        excluded_boundary_indices=tuple(excluded),
    )


def _canonical_envelope(packet: Packet):
    cp = packet.canonical()

    def env(y: float | np.ndarray) -> np.ndarray:
        return cp.envelope(np.atleast_1d(np.asarray(y, dtype=float)))

    return cp, env


def _turning_points(packet: Packet, tau: float) -> tuple[float, float]:
    """Solutions of envelope(y) = tau either side of the peak (canonical frame)."""
    cp, env = _canonical_envelope(packet)
    lo, hi = cp.support
    ys = np.linspace(lo, hi, 2049)
    vals = env(ys)
    ipk = int(np.argmax(vals))
    peak = float(vals[ipk])
    if tau >= peak:
        raise ValueError(f"tau {tau} is not below the envelope peak {peak}")

    def g(y: float) -> float:
        return float(env(y)[0]) - tau

    left = brentq(g, lo, ys[ipk], xtol=1e-14, rtol=8.9e-16)
    right = brentq(g, ys[ipk], hi, xtol=1e-14, rtol=8.9e-16)
    return float(left), float(right)


def turning_point_integral(packet: Packet, tau: float) -> float:
    """Phi(tau) = integral of sqrt(max(envelope^2 - tau^2, 0)) dy, canonical frame.

    The integral is split at the turning points and the square-root endpoint
    behavior removed by the substitution y = y_tp -+ s^2, leaving smooth
    integrands for adaptive quadrature (absolute target 1e-11).
    """
    cp, env = _canonical_envelope(packet)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if tau == 0.0:
        lo, hi = cp.support
        val, _ = quad(lambda y: float(env(y)[0]), lo, hi, epsabs=1e-13, epsrel=1e-13, limit=400)
        return float(val)
    ym, yp = _turning_points(packet, tau)

    def g(y: float) -> float:
        v = float(env(y)[0])
        return math.sqrt(max(v * v - tau * tau, 0.0))

    span = yp - ym
    d = 0.15 * span
    sl = math.sqrt(d)
    left, _ = quad(lambda s: 2.0 * s * g(ym + s * s), 0.0, sl,
                   epsabs=1e-12, epsrel=1e-12, limit=200)
    right, _ = quad(lambda s: 2.0 * s * g(yp - s * s), 0.0, sl,
                    epsabs=1e-12, epsrel=1e-12, limit=200)
    mid, _ = quad(g, ym + d, yp - d, epsabs=1e-12, epsrel=1e-12, limit=400)
    return float(left + mid + right)


def bohr_sommerfeld_spectrum(
    packet: Packet,
    epsilon: float,
    offset: float = 0.5,
) -> ZSData:
    """Eigenvalues from the turning-point quantization Phi(tau_k) = eps pi (k + offset).

    Phi is strictly decreasing from the packet mass at tau = 0 to zero at the
    peak; each tau_k is bracketed and solved to 1e-10.  Indices whose target
    lies within the degeneracy tolerance of Phi(0) or of zero are excluded
    and flagged.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    eps_c = epsilon / packet.width
    cp = packet.canonical()
    mass_c = packet_mass(cp)
    peak = float(np.max(cp.envelope(np.linspace(*cp.support, 2049))))

    taus = []
    excluded = []
    n = quantization_count(mass_c, eps_c, offset)
    for k in range(n + 1):
        target = (k + offset) * math.pi * eps_c
        if target >= mass_c - _BOUNDARY_TOL * max(1.0, mass_c):
            if abs(target - mass_c) <= 1e-9 * max(1.0, mass_c):
                excluded.append(k)
            break
        if target <= _BOUNDARY_TOL:
            excluded.append(k)
            continue

        def shifted(tau: float, target: float = target) -> float:
            return turning_point_integral(packet, tau) - target

        lo_t = 1e-12 * peak
        hi_t = peak * (1.0 - 1e-13)
        tau_k = brentq(shifted, lo_t, hi_t, xtol=1e-12, rtol=8.9e-16)
        taus.append(float(tau_k))
    return ZSData(
        epsilon,
        np.asarray(taus, dtype=float),
        source_packet=packet,
        peak=packet.amplitude,
        excluded_boundary_indices=tuple(excluded),
    )


def blaschke_a(taus: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Reflectionless scattering function a(z) = prod (z - i tau_m)/(z + i tau_m)."""
    taus = np.asarray(taus, dtype=float)
    z = np.asarray(z, dtype=np.complex128)
    out = np.ones_like(z)
    for tau in taus:
        out = out * (z - 1j * tau) / (z + 1j * tau)
    return out


def _blaschke_a_prime(taus: np.ndarray, k: int) -> complex:
    tau = taus[k]
    val = 1.0 / (2j * tau)
    for m, tm in enumerate(taus):
        if m != k:
            val *= (tau - tm) / (tau + tm)
    return val


def wkb_norming_constants(
    packet: Packet,
    data: ZSData,
    epsilon: float,
    convention: str = WKB_CONVENTION,
) -> ZSData:
    """Attach norming constants to a packet spectrum.

    Default convention: alternating b_k = (-1)^(k+1) against the Blaschke
    scattering function of the quantized ladder; for lobes that are not even
    about the packet center the constants pick up the real exponential
    shift that centers each component at the midpoint of its turning points.
    The "oracle-exact" convention extracts the true constants numerically.
    """
    if abs(epsilon - data.epsilon) > 1e-12 * max(1.0, epsilon):
        raise ValueError("epsilon does not match the spectrum's epsilon")
    taus = data.taus
    if taus.size == 0:
        return data.with_norming(np.zeros(0, dtype=np.complex128), convention)
    if convention == ORACLE_CONVENTION:
        eps_c = epsilon / packet.width
        c = scattering.zs_norming_from_oracle(packet.canonical(), eps_c, taus)
        return data.with_norming(c, convention)
    if convention != WKB_CONVENTION:
        raise ValueError(f"unknown norming convention {convention!r}")
    c = np.empty(taus.size, dtype=np.complex128)
    for k in range(taus.size):
        b_k = (-1.0) ** (k + 1)
        c[k] = b_k / _blaschke_a_prime(taus, k)
    if packet.shape == "tabulated":
        eps_c = epsilon / packet.width
        for k, tau in enumerate(taus):
            ym, yp = _turning_points(packet, tau)
            c[k] *= math.exp(2.0 * tau * 0.5 * (ym + yp) / eps_c)
    return data.with_norming(c, convention)


def packet_spectrum(
    packet: Packet,
    epsilon: float,
    convention: str = WKB_CONVENTION,
) -> ZSData:
    """Spectrum plus norming constants; closed form for sech, quantization otherwise."""
    if packet.shape == "sech":
        data = sech_spectrum_exact(packet.amplitude, packet.width, epsilon)
        data = ZSData(
            epsilon,
            data.taus,
            source_packet=packet,
            peak=packet.amplitude,
            excluded_boundary_indices=data.excluded_boundary_indices,
        )
    else:
        data = bohr_sommerfeld_spectrum(packet, epsilon)
    return wkb_norming_constants(packet, data, epsilon, convention)
