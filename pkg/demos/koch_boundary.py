"""Koch snowflake: boundary neighbourhood volumes and the fitted exponent.

Run:  python demos/koch_boundary.py [depth] [n]
"""
import math
import sys

from chifourier import experiments as ex

depth = int(sys.argv[1]) if len(sys.argv) > 1 else 5
n = int(sys.argv[2]) if len(sys.argv) > 2 else 2048
cfg = ex.ScenarioConfig.from_dict({
    "name": "koch", "n": n, "fit_window": [4, int(math.log2(n)) - 2],
    "shape": {"type": "koch", "center": [0.5, 0.5], "circumradius": 0.35, "n_iter": depth}})
scn = ex.Scenario(cfg)
prof = scn.profile

print("delta         |(dE)_delta|")
for d, v in zip(prof.deltas, prof.volumes):
    print(f"{d:.3e}     {v:.4e}")
res = ex.run_boundary(scn)
print(f"gamma_hat={scn.gamma_hat:.4f}  log4/log3={math.log(4) / math.log(3):.4f}  "
      f"box counting={res['box_counting']['dimension']:.4f}")
