"""Littlewood-Paley pieces of a disk indicator and the square function.

Run:  python demos/lp_pieces.py
"""
import numpy as np

from chifourier import domains, fields
from chifourier import littlewood_paley as lp
from chifourier import phi as phimod

spec = fields.GridSpec(2, 1024, 1.0)
ind = domains.rasterize(domains.Disk((0.5, 0.5), 0.25), spec)
ph = phimod.build_phi(0)
s = 0.5

dec = lp.decompose(ind, ph, s)
for k in dec.ks():
    piece = dec.pieces[k]
    print(f"k={k}  |P_k chi|_2={fields.lp_norm(piece, 2):.4e}  |P_k chi|_1={fields.lp_norm(piece, 1):.4e}")

S = lp.square_function(dec)
print(f"square function: max {S.values.max():.3f}, weak L^2 {fields.lorentz_quasinorm(S, 2):.4f}")
print(f"pieces L^2 slope over k=3..7: {np.polyfit(range(3, 8), np.log2([fields.lp_norm(dec.pieces[k], 2) for k in range(3, 8)]), 1)[0]:+.3f}")
