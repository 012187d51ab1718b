"""Which paths survive the calibrated blocker, placed as the pipeline does from position 40 on."""

from collections import Counter

from risbeam.blocker import apply_blocker
from risbeam.scenario import Scenario
from risbeam.scene import scene_to_mpcs

sc = Scenario()
lay = sc.layout()
blk = sc.blocker(lay, nlos_from=40)
rx = lay.rx_positions()
for p in (20, 39, 40, 60, 90):
    s = scene_to_mpcs(lay, p, "on", sensor=sc.sensor())
    kept = apply_blocker(s, blk, lay.tx, rx[p]) if p >= 40 else s
    gone = Counter(m.source for m in s) - Counter(m.source for m in kept)
    print(f"position {p:3d}: {kept.visibility:4s} kept {len(kept)}/{len(s)}, "
          f"removed {dict(sorted(gone.items()))}")
