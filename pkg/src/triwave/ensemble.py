"""Composition of per-packet scattering data into 3x3 reflectionless ensembles.

A packet in mode j with canonical taus {tau_k} and centered constants {c_k}
embeds into the 3x3 spectral plane as

    lam_k = (2 r_j / Delta_j) * i tau_k,
    C_k   = (2 / Delta_j) * conj(gamma_j) * c_k * exp(-i lam_k Delta_j x0 / eps),

where Delta_j is the J-gap of the mode's index pair, r_j = |gamma_j|, and
x0 is the packet center.  The mode-effective semiclassical parameter of the
canonical packet problem is eps / (r_j * w).

For disjointly supported packets the union of the embedded pole sets is the
exact discrete spectrum of the combined initial data (the leading principal
minors of the transfer matrix factor across mode blocks).  Only the norming
data feel the other packets: each pole picks up, for every packet strictly
to its right, the factor a_Q(lam)^s evaluated at the pole, with s = +1 when
the two mode pairs chain head-to-tail (the {1,3} mode combination) and
s = -1 when they share a head or a tail index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import LaxCoefficients, MODE_PAIRS, ModelParams, Packet
from .scattering import TransferMatrix, zs_minor_values
from .spectra import ZSData, blaschke_a, packet_spectrum

__all__ = [
    "PoleCollisionError",
    "PoleData",
    "EnsembleData",
    "effective_epsilon",
    "packet_zs_data",
    "embed_packet_data",
    "compose_ensemble",
    "compose_transfer_product",
]

POLE_SEPARATION_TOL = 1e-7


class PoleCollisionError(ValueError):
    """Two packets produced coincident poles in the composed spectral plane."""


@dataclass(frozen=True)
class PoleData:
    """One simple pole of the reflectionless ensemble."""

    lam: complex
    mode: int
    norming: complex
    packet_index: int = -1
    k_index: int = -1

    def __post_init__(self) -> None:
        if self.mode not in (1, 2, 3):
            raise ValueError(f"mode must be 1..3, got {self.mode}")
        if self.lam.imag == 0.0:
            raise ValueError(f"pole {self.lam} lies on the real axis")
        if self.norming == 0 or not (
            math.isfinite(self.norming.real) and math.isfinite(self.norming.imag)
        ):
            raise ValueError(f"norming constant {self.norming} must be nonzero and finite")


@dataclass(frozen=True)
class EnsembleData:
    """Reflectionless 3x3 scattering data: mode-tagged poles plus a time stamp.

    Norming constants are stated at the ensemble's ``time``.
    """

    params: ModelParams
    poles: tuple[PoleData, ...]
    time: float = 0.0
    norming_convention: str | None = None
    correction_mode: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "poles", tuple(self.poles))
        pts = [p.lam for p in self.poles]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if abs(pts[i] - pts[j]) <= POLE_SEPARATION_TOL:
                    pi, pj = self.poles[i], self.poles[j]
                    raise PoleCollisionError(
                        f"poles {pts[i]} (packet {pi.packet_index}, k={pi.k_index}) and "
                        f"{pts[j]} (packet {pj.packet_index}, k={pj.k_index}) closer than "
                        f"{POLE_SEPARATION_TOL:.1e}"
                    )

    def __len__(self) -> int:
        return len(self.poles)


def effective_epsilon(packet: Packet, params: ModelParams) -> float:
    """Semiclassical parameter of the packet's canonical problem inside the 3x3 system."""
    lax = params.lax()
    return params.epsilon / (lax.rfactors[packet.mode - 1] * packet.width)


def packet_zs_data(packet: Packet, params: ModelParams, convention: str | None = None) -> ZSData:
    """Per-packet data at the mode-effective epsilon, ready for embedding."""
    eps_eff = effective_epsilon(packet, params) * packet.width
    if convention is None:
        return packet_spectrum(packet, eps_eff)
    return packet_spectrum(packet, eps_eff, convention)


def embed_packet_data(
    data: ZSData,
    packet: Packet,
    params: ModelParams,
    packet_index: int = -1,
) -> list[PoleData]:
    """Map a packet's 2x2 data into 3x3 pole records (no ordering corrections).

    The supplied data must have been computed at the mode-effective epsilon
    (see ``packet_zs_data``); anything else indicates a mismatched pipeline.
    """
    lax = params.lax()
    j = packet.mode
    want = params.epsilon / lax.rfactors[j - 1]
    if abs(data.epsilon - want) > 1e-10 * max(1.0, want):
        raise ValueError(
            f"spectrum epsilon {data.epsilon} does not match the mode-{j} effective "
            f"value {want}; build the data with packet_zs_data"
        )
    if data.norming is None:
        raise ValueError("spectrum carries no norming constants")
    delta = lax.gaps[j - 1]
    r = lax.rfactors[j - 1]
    gamma = lax.gammas[j - 1]
    out = []
    for k, (tau, c) in enumerate(zip(data.taus, data.norming)):
        lam = (2.0 * r / delta) * 1j * tau
        shift = np.exp(-1j * lam * delta * packet.center / params.epsilon)
        norming = (2.0 / delta) * np.conj(gamma) * c * shift
        out.append(PoleData(complex(lam), j, complex(norming), packet_index, k))
    return out


def _check_disjoint(packets: Sequence[Packet]) -> list[int]:
    """Indices sorted by center; rejects overlapping or touching supports."""
    order = sorted(range(len(packets)), key=lambda i: packets[i].center)
    for a, b in zip(order[:-1], order[1:]):
        gap = packets[b].support[0] - packets[a].support[1]
        if gap <= 0.0:
            raise ValueError(
                f"packet supports {packets[a].support} and {packets[b].support} "
                f"overlap or touch (gap {gap:.3e}); composition requires disjoint supports"
            )
    return order


def _check_modes(packets: Sequence[Packet]) -> None:
    modes = [p.mode for p in packets]
    if len(set(modes)) != len(modes):
        raise ValueError(f"at most one packet per mode, got modes {modes}")


def _correction_sign(mode_p: int, mode_q: int) -> int:
    """+1 when the two mode pairs chain (share an index as head of one, tail of
    the other), -1 when they share a head or a tail."""
    kp, lp = MODE_PAIRS[mode_p - 1]
    kq, lq = MODE_PAIRS[mode_q - 1]
    if kp == kq or lp == lq:
        return -1
    return +1


def _packet_a_value(
    packet: Packet,
    data: ZSData,
    params: ModelParams,
    lam: complex,
    mode: str,
) -> complex:
    """The packet's scattering function a at a 3x3 spectral point."""
    lax = params.lax()
    j = packet.mode
    zeta_c = lam * lax.gaps[j - 1] / (2.0 * lax.rfactors[j - 1])
    if mode == "blaschke":
        return complex(blaschke_a(data.taus, np.array([zeta_c]))[0])
    if mode == "oracle":
        eps_c = effective_epsilon(packet, params)
        val = zs_minor_values(packet.canonical(), eps_c, np.array([zeta_c]), tol=1e-11)
        return complex(val[0])
    raise ValueError(f"unknown correction mode {mode!r}")


def compose_ensemble(
    packets: Sequence[Packet],
    params: ModelParams,
    spectra: Sequence[ZSData] | None = None,
    correction_mode: str = "oracle",
) -> EnsembleData:
    """Exact scattering data of disjointly supported packets at t = 0.

    Pole locations are the union of the embedded per-packet poles; each
    norming constant is multiplied by the evaluated scattering factors of
    the packets lying to its right.  ``correction_mode`` selects whether
    those factors come from the direct-scattering integrator ("oracle") or
    from the quantized reflectionless model ("blaschke").
    """
    _check_modes(packets)
    _check_disjoint(packets)
    if spectra is None:
        spectra = [packet_zs_data(p, params) for p in packets]
    if len(spectra) != len(packets):
        raise ValueError("spectra must match packets")

    embedded: list[list[PoleData]] = [
        embed_packet_data(d, p, params, i) for i, (p, d) in enumerate(zip(packets, spectra))
    ]
    flat = [pole for group in embedded for pole in group]
    for i in range(len(flat)):
        for j in range(i + 1, len(flat)):
            if abs(flat[i].lam - flat[j].lam) <= POLE_SEPARATION_TOL:
                a, b = flat[i], flat[j]
                raise PoleCollisionError(
                    f"embedded poles collide at {a.lam}: packet {a.packet_index} "
                    f"(mode {a.mode}, k={a.k_index}) and packet {b.packet_index} "
                    f"(mode {b.mode}, k={b.k_index})"
                )
    poles: list[PoleData] = []
    convention = None
    for i, (packet, group) in enumerate(zip(packets, embedded)):
        convention = spectra[i].norming_convention or convention
        for pole in group:
            factor = 1.0 + 0.0j
            for q, other in enumerate(packets):
                if other.center > packet.center:
                    a_val = _packet_a_value(other, spectra[q], params, pole.lam, correction_mode)
                    s = _correction_sign(packet.mode, other.mode)
                    factor *= a_val if s > 0 else 1.0 / a_val
            poles.append(
                PoleData(pole.lam, pole.mode, pole.norming * factor, i, pole.k_index)
            )
    return EnsembleData(
        params,
        tuple(poles),
        time=0.0,
        norming_convention=convention,
        correction_mode=correction_mode,
    )


def _embed_block(block: np.ndarray, pair: tuple[int, int]) -> np.ndarray:
    out = np.eye(3, dtype=np.complex128)
    k, l = pair
    out[k, k] = block[0, 0]
    out[k, l] = block[0, 1]
    out[l, k] = block[1, 0]
    out[l, l] = block[1, 1]
    return out


def compose_transfer_product(
    packets: Sequence[Packet],
    params: ModelParams,
    lam: complex,
    tol: float = 1e-11,
) -> TransferMatrix:
    """Exact 3x3 transfer matrix of disjoint packets as an ordered product.

    Each factor is the packet's canonical 2x2 transfer matrix mapped through
    the amplitude/width equivalences, phase-gauged into its mode block, and
    conjugated by the center-dependent diagonal exponential; factors multiply
    right-to-left in ascending center order (input order is irrelevant).
    """
    from .scattering import zs_transfer_batch  # local import to avoid cycle

    lax = params.lax()
    order = _check_disjoint(packets)
    _check_modes(packets)
    total = np.eye(3, dtype=np.complex128)
    window = (0.0, 1.0)
    for i in order:
        p = packets[i]
        j = p.mode
        pair = MODE_PAIRS[j - 1]
        delta = lax.gaps[j - 1]
        r = lax.rfactors[j - 1]
        gamma = lax.gammas[j - 1]
        eps_c = effective_epsilon(p, params)
        zeta_c = lam * delta / (2.0 * r)
        block = zs_transfer_batch(p.canonical(), eps_c, np.array([zeta_c]), tol=tol)[0]
        # Phase gauge from the canonical real potential to gamma_j * envelope.
        phase = gamma / abs(gamma)
        d = np.sqrt(phase)
        block = np.array(
            [[block[0, 0], block[0, 1] * d * d], [block[1, 0] / (d * d), block[1, 1]]],
            dtype=np.complex128,
        )
        emb = _embed_block(block, pair)
        jd = np.asarray(lax.j_diag)
        conj_ph = np.exp(1j * lam * jd * p.center / params.epsilon)
        emb = np.diag(conj_ph) @ emb @ np.diag(1.0 / conj_ph)
        total = emb @ total
    if packets:
        los, his = zip(*(p.support for p in packets))
        window = (min(los), max(his))
    return TransferMatrix(3, total, complex(lam), window[0], window[1],
                          normalization="left/deosc-origin-0 (product)")
