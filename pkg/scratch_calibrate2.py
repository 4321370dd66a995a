"""Calibration battery for embedding/composition/evolution conventions."""
import time

import numpy as np

from triwave.model import ModelParams, Packet, GridSpec, residual_norm
from triwave import ensemble as en, reconstruct as rc, scattering as sc

t0 = time.time()
params = ModelParams(epsilon=0.4)

# --- 1. single-pole reconstruction in each mode: positive pulse at center, amp 2 tau_c
print("== per-mode single-pole pulses ==")
for mode, A in ((1, 0.5), (2, 0.5), (3, 0.5)):
    p = Packet(mode=mode, shape="sech", amplitude=A, center=1.5)
    eps_eff = en.effective_epsilon(p, params)  # canonical eps
    e = en.compose_ensemble([p], params)
    tau = A - 0.5 * eps_eff
    lax = params.lax()
    r = lax.rfactors[mode - 1]
    xs = np.linspace(-2, 5, 29)
    qs = rc.solve_points(e, xs)
    q = qs[mode - 1]
    expected = 2 * tau / np.cosh(2 * r * tau * (xs - 1.5) / params.epsilon)
    others = [np.max(np.abs(qs[m])) for m in range(3) if m != mode - 1]
    print(f"mode {mode}: tau_c={tau:.4f} maxerr={np.max(np.abs(q - expected)):.2e} others={max(others):.2e}")

# --- 2. SY exact recovery: mode-2 A=2, eps=1 -> q2(x,0) = 2 sech(x)
print("== SY exact 2-soliton recovery ==")
params1 = ModelParams(epsilon=1.0)
p2 = Packet(mode=2, shape="sech", amplitude=2.0)
e2 = en.compose_ensemble([p2], params1)
xs = np.linspace(-8, 8, 41)
q1, q2, q3 = rc.solve_points(e2, xs)
print("max|q2 - 2sech|:", np.max(np.abs(q2 - 2 / np.cosh(xs))))

# --- 3. evolution: transport of a mode-1 pulse at speed c1 = 1
print("== evolution / transport ==")
pm1 = Packet(mode=1, shape="sech", amplitude=0.5)
em1 = en.compose_ensemble([pm1], params)
ee = rc.evolve(em1, 2.0)
xs = np.linspace(-3, 6, 37)
qs0 = rc.solve_points(em1, xs - 2.0)
qs2 = rc.solve_points(ee, xs)
print("transport error:", np.max(np.abs(qs2[0] - qs0[0])))

# --- 4. residual gate on a 2-packet ensemble
print("== residual gate ==")
pa = Packet(mode=1, shape="sech", amplitude=2.5, width=0.25, center=-4.5,
            support_halfwidth=4.0, truncation_tol=3e-7)
pb = Packet(mode=2, shape="sech", amplitude=2.0, width=0.25, center=4.5,
            support_halfwidth=4.0, truncation_tol=3e-7)
e = en.compose_ensemble([pa, pb], params, correction_mode="blaschke")
print("poles:", [(np.round(pl.lam, 4), pl.mode, np.round(abs(pl.norming), 3)) for pl in e.poles])
maxes = []
for nx, nt in ((257, 129), (513, 257), (1025, 513)):
    g = rc.grid_solve(e, GridSpec(-14, 14, nx, 0.0, 12.0, nt))
    rep = residual_norm(g)
    maxes.append(rep.max_overall)
    print(f"nx={nx}: max residual {rep.max_overall:.4e}")
print("ratios:", [maxes[i] / maxes[i + 1] for i in range(len(maxes) - 1)])
print("elapsed %.1fs" % (time.time() - t0))
