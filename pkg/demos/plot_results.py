"""
Plot the CSV outputs of a run, e.g.

    risbeam --scenario scenarios/desk.toml --out results/desk
    python demos/plot_results.py results/desk

Needs matplotlib, which the package itself does not depend on.
"""

import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


out = Path(sys.argv[1] if len(sys.argv) > 1 else "results/desk")
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))

pr = rows(out / "power_ratio.csv")
ax1.plot([int(r["position"]) for r in pr], [float(r["raw"]) for r in pr], ".", alpha=0.4,
         label="raw")
ax1.plot([int(r["position"]) for r in pr], [float(r["smoothed"]) for r in pr], label="smoothed")
ax1.axhline(1.0, color="k", lw=0.5)
ax1.set(xlabel="position", ylabel="power ratio on/off", title="power ratio")
ax1.legend()

curves = defaultdict(list)
for r in rows(out / "region_capacity.csv"):
    curves[(r["region"], r["state"])].append((float(r["snr_db"]), float(r["mean"])))
for (region, state), pts in sorted(curves.items()):
    snr, c = zip(*pts)
    ax2.plot(snr, c, "-" if state == "on" else "--", label=f"{region} ris-{state}")
ax2.set(xlabel="SNR [dB]", ylabel="capacity [bit/s/Hz]", title="region-mean capacity")
ax2.legend()

fig.tight_layout()
fig.savefig(out / "summary.png", dpi=120)
print(out / "summary.png")
