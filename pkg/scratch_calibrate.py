"""Calibration scratch: verify integrator conventions against closed forms."""
import time

import numpy as np

from triwave.model import ModelParams, Packet
from triwave import scattering as sc

t0 = time.time()

p = Packet(mode=2, shape="sech", amplitude=1.0)
eps = 0.4

test = sc.zs_minor_values(p, eps, np.array([0.8j, 0.4j]), tol=1e-11)
print("|a| at SY points:", np.abs(test))

# det at moderate entry scale (eps = 2 keeps the exponents small)
T = sc.zs_transfer_batch(p, 2.0, np.array([0.3 + 0.5j]), tol=1e-11)[0]
print("det-1 (eps=2):", abs(np.linalg.det(T) - 1), "max entry", np.abs(T).max())

# --- norming constants
c = sc.zs_norming_from_oracle(p, eps, np.array([0.8, 0.4]))
print("oracle norming c_k (A=1, eps=0.4):", c)

# exact 1-soliton: A=eps=1: tau=0.5, reflectionless: expect c0 = -i exactly
c1 = sc.zs_norming_from_oracle(p, 1.0, np.array([0.5]))
print("A=eps=1 norming:", c1, "expected -1j")

# SY 2-soliton: A=2, eps=1: taus 1.5, 0.5: reflectionless: expect [-6i, -2i]
p2 = Packet(mode=2, shape="sech", amplitude=2.0)
c2 = sc.zs_norming_from_oracle(p2, 1.0, np.array([1.5, 0.5]))
print("A=2,eps=1 norming:", c2, "expected [-6i, -2i]")

# SY 3-soliton: A=3, eps=1: taus 2.5, 1.5, 0.5
p3 = Packet(mode=2, shape="sech", amplitude=3.0)
c3 = sc.zs_norming_from_oracle(p3, 1.0, np.array([2.5, 1.5, 0.5]))
pred = []
taus = np.array([2.5, 1.5, 0.5])
for k in range(3):
    prod = np.prod([(taus[k] + taus[m]) / (taus[k] - taus[m]) for m in range(3) if m != k])
    pred.append((-1) ** (k + 1) * 2j * taus[k] * prod)
print("A=3,eps=1 norming:", c3)
print("  blaschke prediction:", np.array(pred))

print("total elapsed %.1fs" % (time.time() - t0))
