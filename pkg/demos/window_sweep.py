"""How the maximum search window trades matching rate against candidate count.

Withdrawals in the latency-tail world sometimes arrive hours late, so a short
window misses them and a long one drags in more candidates.

    python3 demos/window_sweep.py
"""

from bridgelink.pipeline import inflection, parse_deposits, sweep
from bridgelink.synth import DEPOSIT, generate, preset

world = generate(preset("latency_tail", seed=1, pairs=400, non_deposits=0))
src = world.spec.source_chain
deposits = [h for h, lab in world.truth.labeled(src) if lab.label == DEPOSIT]
rows = parse_deposits(world.store, src, deposits, world.configs)

points = sweep(rows, world.configs, world.store, [10, 20, 30, 45, 60, 90, 120, 150, 180, 240],
               world.truth.withdrawal_of())
print("delta_min    MR      mean candidates")
for delta, mr, space in points:
    bar = "#" * round(float(mr) * 40)
    print(f"{str(delta):>9}  {float(mr):6.2%}  {float(space):7.3f}  {bar}")
print(f"MR stops improving at delta = {inflection(points)} minutes")
