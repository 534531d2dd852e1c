# %% [markdown]
# # Monte Carlo on the dependency cone
#
# Only the cells that can influence the targets within t steps are
# simulated.  Noise is counter-based: every draw is keyed by
# (seed, stream, sample, step, cell), so the result does not depend on how
# samples are chunked or on the thread count.

# %%
import time

from noisymaps.engine import ProductInit, dependency_cone, run
from noisymaps.maps import LayeredMaj, Maj, schedule_for_target
from noisymaps.meanfield import marginal_recursion
from noisymaps.oracle import layered_marginal

# %%
for t in range(6):
    print(t, len(dependency_cone(Maj(1), [0], t)))

# %% [markdown]
# Plain 3-majority from all zeros: the Monte Carlo frequency against the
# exact recursion.

# %%
t0 = time.perf_counter()
r = run(Maj(1), ProductInit(0.0), 0.1, 5, [0], 100_000, seed=1)
p, lo, hi = (float(x[0]) for x in r.first_layer())
print(f"MC {p:.5f} [{lo:.5f}, {hi:.5f}]  exact {marginal_recursion(1, 0.1, 0.0, 5).final:.5f}  "
      f"({time.perf_counter() - t0:.2f}s)")

# %% [markdown]
# Layered map: full cone against the shortcut that draws the gate directly
# from its exact firing probability.

# %%
m = LayeredMaj(1, schedule_for_target(0.2))
init = ProductInit(1.0, 0.0)
exact = layered_marginal(m, 0.2, init, 4, 0)[-1]
for shortcut in (False, True):
    cone = dependency_cone(m, [0], 4, shortcut=shortcut, init=init)
    r = run(m, init, 0.2, 4, [0], 20_000, seed=2, shortcut=shortcut)
    print(f"shortcut={shortcut}: cone {len(cone)} cells, P(first=1) {float(r.first_layer()[0][0]):.4f}  exact {exact:.4f}")

# %% [markdown]
# Same seed, different thread counts: identical counts.

# %%
a = run(m, init, 0.2, 3, [0, 1], 5000, seed=3, threads=1).counts
b = run(m, init, 0.2, 3, [0, 1], 5000, seed=3, threads=4).counts
print((a == b).all())
