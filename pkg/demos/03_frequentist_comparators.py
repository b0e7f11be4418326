# %% [markdown]
# # Frequentist comparators
#
# Haybittle-Peto, Pocock-type and O'Brien-Fleming-type designs with two
# interims, sized for the same scenario by a normal approximation.

# %%
from bayesgsd import HYPRESS
from bayesgsd.frequentist import size_frequentist

for kind in ("haybittle_peto", "pocock_like", "obf_like"):
    r = size_frequentist(kind, HYPRESS, (1 / 3, 2 / 3))
    z = ", ".join(f"{c:.3f}" for c in r.design.critical_z)
    print(
        f"{kind:15s} n={r.n_total}  E[N|H0]={r.oc_null.expected_n_total:.1f}  "
        f"E[N|H1]={r.oc_alt.expected_n_total:.1f}  z=({z})  first-look spend={r.design.cumulative_spend[0]:.5f}"
    )
