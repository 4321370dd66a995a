"""Built-in validation suites: oracle equivalences and conservation checks.

Each check prints one line and returns a boolean; ``run_validation`` drives
the stock suite the command-line ``validate`` subcommand uses.
"""

from __future__ import annotations

import numpy as np

from .ensemble import compose_ensemble, compose_transfer_product, packet_zs_data
from .model import GridSpec, ModelParams, Packet, manley_rowe_invariants, residual_norm
from .reconstruct import evolve, grid_solve, solve_points
from .scattering import locate_eigenvalues, transfer_batch, zs_transfer_batch
from .spectra import sech_spectrum_exact
from . import simulate as sim

__all__ = ["run_validation"]


def _report(name: str, ok: bool, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


def _check_zero_identity() -> bool:
    rng = np.random.default_rng(11)
    lams = rng.uniform(-1, 1, 25) + 1j * rng.uniform(-1, 1, 25)
    params = ModelParams(epsilon=0.4)
    t3 = transfer_batch([], params, lams)
    err3 = float(np.max(np.abs(t3 - np.eye(3))))
    packet = Packet(mode=2, shape="sech", amplitude=1e-300, support_halfwidth=1.0,
                    truncation_tol=0.5)
    t2 = zs_transfer_batch(packet, 0.4, lams)
    err2 = float(np.max(np.abs(t2 - np.eye(2))))
    err = max(err2, err3)
    return _report("zero-potential identity", err <= 1e-12, f"max deviation {err:.2e}")


def _check_sech_spectrum() -> bool:
    params = ModelParams(epsilon=0.4)
    packet = Packet(mode=2, shape="sech", amplitude=1.0)
    found = locate_eigenvalues([packet], params, (-0.5, 0.5, 0.05, 1.2))
    expected = sech_spectrum_exact(1.0, 1.0, 0.4).taus
    pts = np.sort(found.points.imag)[::-1]
    if pts.size != expected.size:
        return _report("sech spectrum", False, f"found {pts.size} of {expected.size} eigenvalues")
    err = float(np.max(np.abs(pts - expected)))
    return _report("sech spectrum", err <= 1e-6, f"max eigenvalue error {err:.2e}")


def _check_product_identity() -> bool:
    params = ModelParams(epsilon=2.0)
    pa = Packet(mode=1, shape="sech", amplitude=1.0, center=-6.0,
                support_halfwidth=5.5, truncation_tol=9e-3)
    pb = Packet(mode=2, shape="sech", amplitude=0.7, center=6.0,
                support_halfwidth=5.5, truncation_tol=9e-3)
    rng = np.random.default_rng(3)
    lams = rng.uniform(-1, 1, 6) + 1j * rng.uniform(-1, 1, 6)
    worst = 0.0
    for lam in lams:
        tp = compose_transfer_product([pa, pb], params, complex(lam))
        to = transfer_batch([pa, pb], params, np.array([lam]), tol=1e-11)[0]
        worst = max(worst, float(np.max(np.abs(tp.entries - to))))
    return _report("disjoint product identity", worst <= 1e-6, f"max entry diff {worst:.2e}")


def _collision_packets() -> tuple[Packet, Packet]:
    pa = Packet(mode=1, shape="sech", amplitude=2.5, width=0.25, center=-4.5,
                support_halfwidth=4.0, truncation_tol=3e-7)
    pb = Packet(mode=2, shape="sech", amplitude=2.0, width=0.25, center=4.5,
                support_halfwidth=4.0, truncation_tol=3e-7)
    return pa, pb


def _check_residual_convergence() -> bool:
    params = ModelParams(epsilon=0.4)
    e = compose_ensemble(list(_collision_packets()), params, correction_mode="blaschke")
    maxima = []
    for nx, nt in ((513, 257), (1025, 513)):
        grid = grid_solve(e, GridSpec(-14.0, 14.0, nx, 0.0, 12.0, nt))
        maxima.append(residual_norm(grid).max_overall)
    ratio = maxima[0] / maxima[1]
    return _report(
        "reconstruction residual convergence",
        3.0 <= ratio <= 5.0,
        f"refinement ratio {ratio:.2f} (residuals {maxima[0]:.2e} -> {maxima[1]:.2e})",
    )


def _check_manley_rowe() -> bool:
    params = ModelParams(epsilon=0.4)
    s0 = sim.initialize(list(_collision_packets()), params, -21.0, 21.0, 2048, t_max=12.0)
    snaps = sim.run(s0, 12.0, cfl=0.5, snapshot_times=np.linspace(0.0, 12.0, 7),
                    transport="spectral")
    grid = sim.to_field_grid(snaps)
    mr = manley_rowe_invariants(grid, boundary_tol=1e-6)
    drift = float(np.max(np.abs(mr - mr[:, :1]) / np.maximum(1.0, np.abs(mr[:, :1]))))
    return _report("Manley-Rowe conservation", drift <= 1e-6, f"max relative drift {drift:.2e}")


def _check_recovery() -> bool:
    params = ModelParams(epsilon=0.4)
    packet = Packet(mode=2, shape="sech", amplitude=1.0)
    e = compose_ensemble([packet], params)
    xs = np.linspace(-20.0, 20.0, 1601)
    _, q2, _ = solve_points(evolve(e, 0.0), xs)
    target = packet.envelope(xs)
    err = float(
        np.sqrt(np.sum(np.abs(q2 - target) ** 2) / np.sum(np.abs(target) ** 2))
    )
    return _report("initial-data recovery", err <= 0.2, f"relative L2 error {err:.3f}")


def run_validation() -> int:
    """Run the stock validation suite; returns the number of failures."""
    checks = (
        _check_zero_identity,
        _check_sech_spectrum,
        _check_product_identity,
        _check_residual_convergence,
        _check_manley_rowe,
        _check_recovery,
    )
    failures = 0
    for check in checks:
        try:
            ok = check()
        except Exception as exc:  # a crash is a failure, not an abort
            ok = _report(check.__name__, False, f"raised {type(exc).__name__}: {exc}")
        failures += 0 if ok else 1
    return failures
