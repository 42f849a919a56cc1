"""The batch experiment engine: scenario files, deterministic replication
streams, and the LAN / total-variation diagnostics.

Equivalent command lines:
    gstable estimate --theta 1,1,1.5 --n 1000 --reps 20 --seed 1 --out out/
    gstable lan-check --theta 1,1,1.2 --n 100,10000 --reps 50 --seed 1
    gstable tv-study --alpha-value 0.5 --reps 2 --seed 1
"""
from gstable import Scenario, Theta, TemperingSpec, cmd_estimate, cmd_lan_check, cmd_tv_study
from gstable.experiments import summarize

scn = Scenario(model="levy", theta0=Theta(1.0, 1.0, 1.5), n_list=(1000,), R=20,
               seed=1, outputs="/tmp/gstable_demo")
rec = cmd_estimate(scn, workers=2)
print(summarize(rec, scn))

lan = cmd_lan_check(Theta(1.0, 1.0, 1.2), [100, 1000], [(1.0, 1.0, 1.0)], R=50, seed=1)
for n, r in lan.items():
    print(f"LAN remainder at n={n}: mean={r['mean']} sd={r['sd']}")

tv = cmd_tv_study(0.5, TemperingSpec("truncation", eta=1.0), [2**k for k in range(6, 12)], R=2)
print("TV-proxy slope:", tv["slope"], "(theory: -1 for truncation at alpha=0.5)")
