# %% [markdown]
# # A conventional posterior-threshold design
#
# Two arms, binary endpoint (event = bad outcome), uniform priors. The trial
# stops for efficacy at a look when the posterior probability that the
# treatment event rate is below the control rate exceeds a fixed threshold.

# %%
import numpy as np

from bayesgsd import HYPRESS, DesignSpec, FixedPosterior, build_schedule, compile_design, evaluate
from bayesgsd.frequentist import spend

schedule = build_schedule(356, (1 / 3, 2 / 3))
spec = DesignSpec(schedule, FixedPosterior(0.9890))
print("per-arm cumulative sizes:", schedule.per_arm)

# %% [markdown]
# The rule compiles to an integer boundary per look: with ``i`` control
# events, stop when the treatment arm has at most ``j*(i)`` events.

# %%
boundary = compile_design(spec)
first = np.asarray(boundary.per_stage[0])
print("first look, j*(i) for i = 0..20:", first[:21])

# %% [markdown]
# Exact operating characteristics under both truth points, and the
# cumulative null stopping profile next to a Pocock-type spending function.

# %%
null = evaluate(spec, boundary, HYPRESS.null())
alt = evaluate(spec, boundary, HYPRESS.alternative())
print(f"type I error {null.reject_prob:.5f}, power {alt.reject_prob:.5f}")
print(f"E[N | H0] {null.expected_n_total:.1f}, E[N | H1] {alt.expected_n_total:.1f}")
for t, c in null.cumulative_profile.points:
    print(f"  t={t:.3f}  Bayesian {c:.5f}  Pocock-type {spend('pocock_like', 0.025, t):.5f}")
