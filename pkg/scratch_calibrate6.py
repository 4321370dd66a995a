"""Phenomenology calibration."""
import time
import numpy as np
from triwave.model import ModelParams, Packet, GridSpec, residual_norm
from triwave import ensemble as en, reconstruct as rc
from triwave.gridio import windowed_total_variation, render_heatmap
t0 = time.time()
print("== 3-packet phenomenology ==", "%.0fs" % (time.time() - t0))
params3 = ModelParams(epsilon=0.3)
packs = [
    Packet(mode=1, shape="gaussian", amplitude=3.0, width=0.6, center=-7.0),
    Packet(mode=2, shape="gaussian", amplitude=2.0, width=0.6, center=0.0),
    Packet(mode=3, shape="gaussian", amplitude=2.6, width=0.6, center=7.0),
]
e3 = en.compose_ensemble(packs, params3, correction_mode="blaschke")
print("poles:", [(np.round(p.lam, 3), p.mode) for p in e3.poles])
tg = time.time()
g3 = rc.grid_solve(e3, GridSpec(-16, 16, 641, 0.0, 14.0, 449))
print("grid solve: %.0fs" % (time.time() - tg))
tv, amp = windowed_total_variation(g3, 16, 16)
peak = amp.max()
quiescent = amp < 0.01 * peak
osc = tv >= np.quantile(tv, 0.95)
tv_q = tv[quiescent].mean() if quiescent.any() else 0.0
tv_o = tv[osc].mean()
print(f"quiescent windows: {quiescent.sum()}, mean TV {tv_q:.3e}")
print(f"oscillatory windows: {osc.sum()}, mean TV {tv_o:.3e}, ratio {tv_o/max(tv_q,1e-300):.1f}")
render_heatmap(g3, "q1", "/tmp/tw/pheno_q1.png")
render_heatmap(g3, "q2", "/tmp/tw/pheno_q2.png")
render_heatmap(g3, "q3", "/tmp/tw/pheno_q3.png")
print("elapsed %.0fs" % (time.time() - t0))
