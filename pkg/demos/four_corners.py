# In two dimensions a prior with four differently weighted quadrants around
# the observation lets a pyramid satisfy the expected condition while the
# per-partition condition breaks on some bin faces.
import json

from peerhood.experiments import ExperimentConfig, run

rec = run(ExperimentConfig.from_dict({"experiment": "pi_impossibility_demo", "dim": 2}))
for row in rec.rows:
    print(f"{row['condition']}: passed={row['passed']}  worst margin {row['worst_margin']:+.4f}")
d = rec.diagnostics
print(f"boundary mismatch {d['boundary_mismatch']:.3f} (limit {d['boundary_limit']:.1e})")
print("worst boundary pair:", json.dumps(d["pi"]["boundary_pair"]))
print("base centre:", [round(x, 5) for x in d["base_center"]])
