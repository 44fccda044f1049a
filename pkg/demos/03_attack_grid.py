"""A reduced attacker sweep: isolated forgers versus a colluding group.

Three replicates per cell keep this under a minute; the full grid is
``certmesh sweep``.
"""

import sys

from certmesh.harness import SweepSpec, emit_csv, run_sweep, summarise
from certmesh.sim.scenario import ScenarioConfig

fractions = (0.0, 0.2, 0.4)
rows = []
for mode in ("isolated", "colluding"):
    spec = SweepSpec(ScenarioConfig(attacker_mode=mode), attacker_fractions=fractions,
                     mpktvs=(0.5, 0.9), known_certs=(0, 10), replications=3)
    rows += run_sweep(spec)

summary = summarise(rows)
print(f"{'mode':<10} {'attackers':>9} {'mpktv':>5} {'known':>5}   valid  corrupted")
for (mode, f, m, k), s in sorted(summary.items()):
    print(f"{mode:<10} {f:>9.0%} {m:>5} {k:>5}   {s.valid_rate:5.2f}  {s.corrupted_rate:9.2f}")

if "--csv" in sys.argv:
    sys.stdout.write(emit_csv(rows))
