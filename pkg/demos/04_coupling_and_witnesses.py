# %% [markdown]
# # Couplings and witness cells
#
# A grand coupling runs two initial measures on shared noise.  Agreement
# close to 1 is evidence of forgetting the start.  For layered maps the gap
# is read at a witness cell deep enough that its gate almost never fires.

# %%
from noisymaps.engine import ProductInit, couple_run
from noisymaps.maps import LayeredMaj, Maj, schedule_for_target
from noisymaps.meanfield import p_exact
from noisymaps.scan import bistability_gap, witness_gap_bound, witness_selection

# %%
for eps in (0.05, 0.2, 0.35, 0.6):
    c = couple_run(Maj(1), ProductInit(0.0), ProductInit(1.0), eps, 6, [0], 4000, seed=4)
    print(f"maj3 eps={eps}: agreement {float(c.agreement()[0][0]):.3f}")

# %% [markdown]
# The layered map targeted at 0.2 keeps two phases away from 0.2 and
# forgets its start at 0.2.

# %%
m = LayeredMaj(1, schedule_for_target(0.2))
for eps in (0.0, 0.1, 0.2, 0.3):
    try:
        w = witness_selection(m, eps)
        print(f"eps={eps}: witness cell {w}, guaranteed gap {witness_gap_bound(m, eps):.4f}")
    except LookupError as exc:
        print(f"eps={eps}: {exc}")

# %%
g = bistability_gap(m, 0.1, 8, 5000, witness_selection(m, 0.1), seed=5)
print(f"measured gap at the witness: {float(g.gap[0]):.4f} [{float(g.lo[0]):.4f}, {float(g.hi[0]):.4f}]")

# %% [markdown]
# At the target rate the coupling agreement at cell 0 against the bound
# built from the gate probabilities.

# %%
for t in range(2, 6):
    p = p_exact(m.layout.size(t - 1), 0.2, m.schedule.at(t - 1))
    c = couple_run(m, ProductInit(0.0), ProductInit(1.0), 0.2, t, [0], 10_000, seed=6, shortcut=True)
    print(f"t={t}: agreement {float(c.agreement()[0][0]):.4f}  bound {p ** 3 ** (t - 2):.4f}")
