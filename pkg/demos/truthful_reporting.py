import numpy as np

from peerhood.experiments import ExperimentConfig, run

# Agent side: peers are expected to follow the agent's own posterior.
# Sweep reports o + p and see where the expected payment peaks.
for kind in ("empirical", "gmm"):
    cfg = ExperimentConfig.from_dict({"experiment": "perturbation_agent", "seed": 0,
                                      "distribution": {"kind": kind}})
    rec = run(cfg)
    p = rec.column("p0")
    mean = rec.column("mean")
    print(f"{kind:9s} agent side: observation {rec.diagnostics['observation'][0]:.3f}, "
          f"best offset {rec.diagnostics['argmax_offset'][0]:+.3f}")
    for k in np.argsort(-mean)[:3]:
        print(f"    p = {p[k]:+.3f}  payment {mean[k]:.4f}")

# Center side: 200 truthful peers from the true distribution.  The peak
# need not sit at the observation.
for seed in range(5):
    rec = run(ExperimentConfig.from_dict({"experiment": "perturbation_center", "seed": seed}))
    print(f"seed {seed}: center-side best offset {rec.diagnostics['argmax_offset'][0]:+.3f}")
