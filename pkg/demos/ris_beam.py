"""
RIS path gain along the default trajectory.

``exact`` is 1-bit MRT towards the true RX position, ``vision`` the
configuration the pipeline uses (aimed at the camera's fixed-range position
estimate), ``off`` the all-zero panel.
"""

import numpy as np

from risbeam.ris import RisConfig, coherent_gain, mrt_config, ris_path_gain
from risbeam.scenario import Scenario
from risbeam.scene import ris_configuration

sc = Scenario()
lay = sc.layout()
panel = lay.ris_panel
off = RisConfig.zeros(panel)

print("position  exact_db  vision_db  off_db  coherent_db")
for p, rx in enumerate(lay.rx_positions()):
    if p % 8:
        continue
    on = ris_path_gain(panel, mrt_config(panel, lay.tx, rx), lay.tx, rx)
    vis = ris_path_gain(panel, ris_configuration(lay, p, "on", sensor=sc.sensor()), lay.tx, rx)
    z = ris_path_gain(panel, off, lay.tx, rx)
    c = coherent_gain(panel, lay.tx, rx)
    print(f"{p:8d}  {20 * np.log10(abs(on)):8.1f}  {20 * np.log10(abs(vis)):9.1f}  "
          f"{20 * np.log10(abs(z)):6.1f}  {20 * np.log10(c):11.1f}")
print()
print(mrt_config(panel, lay.tx, lay.rx_positions()[60]).to_text())
