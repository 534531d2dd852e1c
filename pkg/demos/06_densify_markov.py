# %% [markdown]
# # A densified block as a finite Markov chain
#
# densify(base, target, n) agrees with base on cells 0..n, writes 0 on
# n+1..r, copies cell r+1 forever and runs target further right.  The cells
# 0..r+1 form a closed finite system, so the perturbed map restricted to
# them is an ordinary Markov chain that can be solved exactly.

# %%
import numpy as np

from noisymaps.maps import Maj, densify
from noisymaps.oracle import densify_block, exact_finite_markov

m = densify(Maj(1), Maj(1), 2)
print("radius", m.radius)

# %% [markdown]
# With noise the chain is irreducible and has one stationary law.  Without
# noise the copied cell r+1 keeps its initial value, giving two.

# %%
for eps in (0.1, 0.0):
    chain = densify_block(m, eps)
    laws = exact_finite_markov(chain)
    print(f"eps={eps}: {chain.n_states} states, {len(laws)} stationary law(s)")
    for s in laws:
        first = [float(chain.marginal(s.distribution, c)[1]) for c in chain.cells]
        print("   residual %.1e  P(cell=1):" % s.residual, np.round(first, 3))
