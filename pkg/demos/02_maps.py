# %% [markdown]
# # Building maps
#
# Maps are small immutable descriptors: plain majorities, layered majorities
# whose second layer carries a noise-rate gate, interleavings of countably
# many rows, and densified blocks.  Every cell rule is computed on demand.

# %%
from noisymaps.maps import (
    LayeredMaj,
    Maj,
    build_e_layout,
    build_M,
    cone_block,
    dumps,
    loads,
    phi,
    phi_inv,
    schedule_for_target,
)

# %% [markdown]
# Rows are packed into one line by phi(i, j) = 2^j - 1 + i 2^(j+1).  The row
# index of cells 0..7 follows the ruler sequence.

# %%
print([phi_inv(k)[1] for k in range(16)])
print(phi(3, 2), phi_inv(phi(3, 2)))

# %% [markdown]
# Layered majority targeted at eps0 = 0.2: the cell reads three first-layer
# inputs one block deeper and a gate over its E-cells.

# %%
m = LayeredMaj(1, schedule_for_target(0.2))
for c in (0, 1, 4, 13):
    r = m.rule(c)
    print(c, r.kind, "inputs", list(r.neighborhood[:3]), "gate cells", r.gate_cells.count, "interval", r.gate_intervals)

# %% [markdown]
# E-cell blocks sit beyond the cone blocks they serve.

# %%
L = build_e_layout(3)
for t in range(5):
    lo, hi = cone_block(3, t)
    print(f"block {t}: cells [{lo}, {hi}]  E of cell {lo} = {L.interval(lo)}")

# %% [markdown]
# Descriptors round-trip through JSON.

# %%
M = build_M(4)
text = dumps(M)
print(text[:200], "...")
assert loads(text) == M
print(Maj(2).rule(0).neighborhood)
