# %% [markdown]
# # Phase-diagram scan
#
# Sweep eps, estimate the gap and coupling agreement at each point, and
# label it.  The result is written as CSV (with the resolved config in a
# header line), a JSON mirror and an SVG plot.

# %%
from pathlib import Path

from noisymaps.maps import LayeredMaj, Maj, schedule_for_target
from noisymaps.scan import ScanConfig, parse_grid, scan

out = Path(__file__).resolve().parent / "out"
out.mkdir(exist_ok=True)

# %%
res = scan(ScanConfig(Maj(1), parse_grid("0:1:0.1"), t=8, samples=2000, seed=7))
for r in res.rows:
    print(f"eps={r.eps:.1f}  gap={r.gap:.3f}  agree={r.agree:.3f}  exact={r.oracle_gap:.3f}  {r.label}")
res.write(out / "maj3.csv", out / "maj3.json", out / "maj3.svg")

# %% [markdown]
# The layered map targeted at 0.2: the witness cell changes with eps.

# %%
m = LayeredMaj(1, schedule_for_target(0.2))
res = scan(ScanConfig(m, parse_grid("0.1,0.2,0.3,0.5"), t=8, samples=1000, seed=8))
for r in res.rows:
    print(f"eps={r.eps:.1f}  witness={r.witnesses}  gap={r.gap:.3f}  agree={r.agree:.3f}  {r.label}")
res.write(out / "layered.csv", out / "layered.json", out / "layered.svg")
print("wrote", sorted(p.name for p in out.iterdir()))
