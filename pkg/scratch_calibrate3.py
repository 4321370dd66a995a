"""Calibration: composition corrections, product identity, 3x3 eigenvalue search."""
import itertools
import time

import numpy as np

from triwave.model import ModelParams, Packet, GridSpec
from triwave import ensemble as en, reconstruct as rc, scattering as sc

t0 = time.time()
params = ModelParams(epsilon=0.4)


def mk(mode, A, center, side):
    return Packet(mode=mode, shape="sech", amplitude=A, width=0.25, center=center,
                  support_halfwidth=4.0, truncation_tol=3e-7)


# --- composition: 2-packet t=0 field vs disjoint union of single-packet fields
print("== composition corrections (all ordered mode pairs) ==")
xs = np.linspace(-10, 10, 401)
for (m_left, m_right) in itertools.permutations((1, 2, 3), 2):
    pl = mk(m_left, 2.2, -4.5, "L")
    pr = mk(m_right, 2.0, +4.5, "R")
    e_both = en.compose_ensemble([pl, pr], params, correction_mode="blaschke")
    e_l = en.compose_ensemble([pl], params)
    e_r = en.compose_ensemble([pr], params)
    q_both = rc.solve_points(e_both, xs)
    q_l = rc.solve_points(e_l, xs)
    q_r = rc.solve_points(e_r, xs)
    err = max(
        np.max(np.abs(q_both[m] - q_l[m] - q_r[m])) for m in range(3)
    )
    # also check with NO corrections (identity factors) for comparison
    e_raw = en.EnsembleData(
        params,
        tuple(en.embed_packet_data(en.packet_zs_data(p, params), p, params, i)
              for i, p in enumerate([pl, pr]) for _ in [0])[0:0] or tuple(
            pole for i, p in enumerate([pl, pr])
            for pole in en.embed_packet_data(en.packet_zs_data(p, params), p, params, i)),
    )
    q_raw = rc.solve_points(e_raw, xs)
    err_raw = max(np.max(np.abs(q_raw[m] - q_l[m] - q_r[m])) for m in range(3))
    print(f"modes L={m_left} R={m_right}: corrected err={err:.3e}  uncorrected err={err_raw:.3e}")

# --- transfer product identity vs oracle
print("== product identity vs oracle (eps=2, w=1 packets) ==")
params2 = ModelParams(epsilon=2.0)
pa = Packet(mode=1, shape="sech", amplitude=1.0, center=-6.0, support_halfwidth=5.5,
            truncation_tol=9e-3)
pb = Packet(mode=2, shape="sech", amplitude=0.7, center=6.0, support_halfwidth=5.5,
            truncation_tol=9e-3)
rng = np.random.default_rng(7)
lams = rng.uniform(-1, 1, 6) + 1j * rng.uniform(-1, 1, 6)
errs = []
for lam in lams:
    Tp = en.compose_transfer_product([pa, pb], params2, complex(lam))
    To = sc.transfer_matrix([pa, pb], params2, complex(lam), tol=1e-12)
    errs.append(np.max(np.abs(Tp.entries - To.entries)))
print("max entry diff over random lams:", max(errs))

# --- 3x3 locate vs embedded poles (mode 1 and mode 2 packets, defaults w=1)
print("== 3x3 locate vs embedding ==")
params = ModelParams(epsilon=0.4)
p1 = Packet(mode=1, shape="sech", amplitude=1.0, center=-5.0)
e1 = en.compose_ensemble([p1], params)
pred = sorted([pl.lam for pl in e1.poles], key=lambda z: -z.imag)
found = sc.locate_eigenvalues([p1], params, (-1.0, 1.0, 0.01, 2.0))
print("mode-1 predicted:", np.round(pred, 8))
print("mode-1 located:  ", np.round(found.points, 8), "detectors:", found.detectors)

p2 = Packet(mode=2, shape="sech", amplitude=1.0)
e2 = en.compose_ensemble([p2], params)
pred2 = sorted([pl.lam for pl in e2.poles], key=lambda z: -z.imag)
found2 = sc.locate_eigenvalues([p2], params, (-1.0, 1.0, 0.01, 2.0))
print("mode-2 predicted:", np.round(pred2, 8))
print("mode-2 located:  ", np.round(found2.points, 8), "detectors:", found2.detectors)

print("elapsed %.1fs" % (time.time() - t0))
