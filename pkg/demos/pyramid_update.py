"""Solve for a pyramid kernel that keeps truthful reporting optimal in expectation, then check it."""
import numpy as np

from peerhood.conditions import check_pe, check_pi, local_competitors
from peerhood.measures import GaussianMixture, Rect, mix
from peerhood.partitions import RegularPartitionSpace
from peerhood.updates import solve_pe_apex

ps = RegularPartitionSpace([0.2])
prior = GaussianMixture([[0.2], [0.7]], 0.02, [0.6, 0.4])
o = np.array([0.4])
delta = 0.01

kernel, info = solve_pe_apex(prior, o, delta, ps, full_output=True)
print(f"base centre {kernel.center[0]:.6f} (apex at {o[0]}), {info.iterations} iterations, "
      f"relative residual {info.relative_residual:.1e}")

# 1D has a closed form: the base shifts towards the heavier neighbouring bin
left = float(prior.box_prob(o - 0.2, o))
right = float(prior.box_prob(o, o + 0.2))
print(f"closed form      {o[0] - delta + 2 * delta * right / (left + right):.6f}")

posterior = mix(prior, 0.5, kernel, 0.5)
pe = check_pe(prior, posterior, ps, o, local_competitors(o, ps), 2000, sampler="grid")
pi = check_pi(prior, posterior, ps, o, 1000, Rect([-1.0], [2.0]), sampler="grid")
print(f"PE passed={pe.passed} margin {pe.worst_margin:.4f}")
print(f"PI passed={pi.passed} boundary mismatch {pi.details['boundary_mismatch']:.1e}")

# without the update the observation has no edge at all
print("unchanged posterior PE:", check_pe(prior, prior, ps, o, local_competitors(o, ps), 2000,
                                          sampler="grid").passed)
