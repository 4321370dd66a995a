"""Acceptance-number calibration."""
import time

import numpy as np

from triwave.model import ModelParams, Packet, GridSpec, manley_rowe_invariants, residual_norm
from triwave import ensemble as en, reconstruct as rc, scattering as sc, simulate as sim
from triwave import gridio

t0 = time.time()

# (8) recovery sweep
print("== recovery sweep (mode-2 sech A=1) ==")
xs = np.linspace(-24, 24, 1923)
for eps in (0.8, 0.4, 0.2):
    params = ModelParams(epsilon=eps)
    p = Packet(mode=2, shape="sech", amplitude=1.0)
    e = en.compose_ensemble([p], params)
    _, q2, _ = rc.solve_points(e, xs)
    target = p.envelope(xs)
    err = np.sqrt(np.sum(np.abs(q2 - target) ** 2) / np.sum(target**2))
    print(f"eps={eps}: N={len(e)} relL2={err:.4f}")

# (7-halving) upwind MR drift halving: smooth config
print("== MR halving (upwind, cfl 0.5) ==", "%.0fs" % (time.time() - t0))
params = ModelParams(epsilon=0.5)
pa = Packet(mode=1, shape="sech", amplitude=1.2, width=0.5, center=-6.0,
            support_halfwidth=5.0, truncation_tol=1e-4)
pb = Packet(mode=2, shape="sech", amplitude=1.0, width=0.5, center=6.0,
            support_halfwidth=5.0, truncation_tol=1e-4)
drifts = []
for nx in (1024, 2048, 4096):
    s0 = sim.initialize([pa, pb], params, -26.0, 26.0, nx, t_max=14.0)
    snaps = sim.run(s0, 14.0, cfl=0.5, snapshot_times=np.linspace(0, 14, 8))
    g = sim.to_field_grid(snaps)
    mr = manley_rowe_invariants(g, boundary_tol=1e-5)
    drift = np.max(np.abs(mr - mr[:, :1]) / np.maximum(1.0, np.abs(mr[:, :1])))
    drifts.append(drift)
    print(f"nx={nx}: drift {drift:.4e}")
print("halving ratios:", [drifts[i] / drifts[i + 1] for i in range(len(drifts) - 1)])

# (3) full 20-lambda product identity
print("== criterion 3 config ==", "%.0fs" % (time.time() - t0))
params2 = ModelParams(epsilon=2.0)
pa3 = Packet(mode=1, shape="sech", amplitude=1.0, center=-6.0, support_halfwidth=5.5, truncation_tol=9e-3)
pb3 = Packet(mode=2, shape="sech", amplitude=0.7, center=6.0, support_halfwidth=5.5, truncation_tol=9e-3)
rng = np.random.default_rng(42)
lams = rng.uniform(-1, 1, 20) + 1j * rng.uniform(-1, 1, 20)
worst = 0.0
for lam in lams:
    tp = en.compose_transfer_product([pa3, pb3], params2, complex(lam))
    to = sc.transfer_batch([pa3, pb3], params2, np.array([lam]), tol=1e-11)[0]
    worst = max(worst, float(np.max(np.abs(tp.entries - to))))
print("criterion3 worst entry diff over 20 lams:", worst)

# (2x2 b_k) alternation for truncated sech
print("== b_k for sech A=1 eps=0.4 ==", "%.0fs" % (time.time() - t0))
p = Packet(mode=2, shape="sech", amplitude=1.0)
taus = np.array([0.8, 0.4])
c = sc.zs_norming_from_oracle(p, 0.4, taus)
# numerical a'(i tau) by FD on the true a
d = 1e-6
av = sc.zs_minor_values(p, 0.4, np.concatenate([1j*taus + d, 1j*taus - d]), tol=1e-11)
aprime = (av[:2] - av[2:]) / (2*d)
print("b_k = c_k * a'_true:", c * aprime)

print("elapsed %.0fs" % (time.time() - t0))
