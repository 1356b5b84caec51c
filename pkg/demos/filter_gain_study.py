"""How much feedback gain does the control filter need?

The stability certificate requires ||G||_L1 * L < 1, where G depends on the
loop filter C(s) = omega*k*D / (1 + omega*k*D).  Sweeping the gain product
omega*k traces out the curve of the certificate value; the design is feasible
wherever the curve drops below 1.
"""

import numpy as np

import l1adapt
from l1adapt import bounds

sc = l1adapt.load_builtin_scenario("robot_arm_sin")
sets = sc.cfg.sets
L = bounds.compute_L(sets)

print(f"uncertainty magnitude L = {L}")
print(f"{'omega*k':>8}  {'||G|| * L':>10}  certified")
for wk in np.linspace(10.0, 100.0, 10):
    value, ok = bounds.check_l1_requirement(sc.cfg.A_m, sc.cfg.b, sc.cfg.D,
                                            wk / sets.omega_l, sets,
                                            n_points=2)
    print(f"{wk:8.1f}  {value:10.4f}  {'yes' if ok else 'no'}")
