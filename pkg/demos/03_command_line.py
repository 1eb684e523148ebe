"""
End to end from the command line
================================

The same steps a user would type in a shell, driven through ``main`` so the
script is self-contained. Everything lands in a temporary directory.
"""
# %%
import csv
import tempfile
from pathlib import Path

from geodiverse.cli import main

work = Path(tempfile.mkdtemp(prefix="geodiverse-demo-"))
data = work / "data"
spec = work / "world.toml"
spec.write_text("n_papers = 2000\nn_cities = 150\nn_airports = 200\nseed = 7\n")

main(["synth", str(data), "--spec", str(spec)])
main(["build-cache", str(data)])
main(["build-cache", str(data)])  # second call finds the cached file

# %%
main(["analyze", str(data), "--out", str(work / "report")])
with open(work / "report" / "piecewise_fits.csv") as fh:
    for row in csv.reader(fh):
        print("  ".join(f"{v:>16.16}" for v in row[:6]))

# %% [markdown]
# A sweep repeats the analysis for several lambda values and collects the
# fits in one summary table.

# %%
main(["sweep", str(data), "--lambdas", "1/10000,1/2500", "--out", str(work / "sweep")])
print((work / "sweep" / "summary.csv").read_text())
print("outputs in", work)
