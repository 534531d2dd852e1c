# %% [markdown]
# # Mean-field picture of noisy majority votes
#
# A cell that takes the majority of 2n+1 independent inputs, then gets
# resampled uniformly with probability eps, turns a marginal x into
# h(x) = eps/2 + (1 - eps) g(x), with g the binomial tail.  Fixed points
# of h tell us whether the all-0 and all-1 starts stay apart.

# %%
import numpy as np

from noisymaps.meanfield import (
    alpha_closed_form,
    eval_P,
    find_fixed_points,
    marginal_recursion,
    mf_threshold,
)

# %% [markdown]
# For the 3-majority there are three roots below eps = 1/3 and a single one
# above.  The lower root has a closed form.

# %%
for eps in (0.1, 0.2, 0.3, 0.4):
    fps = find_fixed_points(1, eps)
    print(f"eps={eps:.2f}  roots={[round(r, 6) for r in fps.roots]}  stable={[p.stable for p in fps.points]}")
print("closed form at 0.2:", alpha_closed_form(0.2))

# %% [markdown]
# The bistability threshold grows with the vote width.

# %%
for n in (1, 2, 3, 5, 10, 15):
    print(f"n={n:2d}  threshold={mf_threshold(n):.6f}")

# %% [markdown]
# Iterating h from the two extreme starts: below the threshold the orbits
# settle on different roots, above it they merge at 1/2.

# %%
for eps in (0.1, 0.5):
    lo = marginal_recursion(1, eps, 0.0, 12).values
    hi = marginal_recursion(1, eps, 1.0, 12).values
    print(f"eps={eps}: gap by step", np.round(np.subtract(hi, lo), 4))

# %% [markdown]
# A coarse bifurcation picture: the sign changes of P = h - x along x.

# %%
xs = np.linspace(0, 1, 2000)[1:-1]  # 1/2 is not a grid point
for eps in np.arange(0.0, 0.55, 0.05):
    s = np.sign(eval_P(1, eps, xs))
    print(f"eps={eps:.2f}  sign changes: {int(np.count_nonzero(np.diff(s)))}")
