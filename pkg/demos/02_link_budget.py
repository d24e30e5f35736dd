"""
Link budget and per-block rates
===============================

Path loss, thermal noise and the capped Shannon rate of one resource block,
then a channel sampler following a user walking away from the base station.
"""
import numpy as np

from zotnet import CellConfig, ChannelSampler, noise_power_dbm, path_loss_db, rb_rate

cfg = CellConfig()
print("noise per block:", round(noise_power_dbm(cfg.rb_bandwidth_hz, cfg.noise_figure_db), 2), "dBm")
for d in (1, 10, 100, 500):
    print(f"path loss at {d:3d} m: {path_loss_db(d):6.2f} dB")
print("rate at snr 1:", rb_rate(1.0), "Mb/s; cap:", rb_rate(1e9), "Mb/s")

# walking out along the x axis; shadowing changes only when a grid square is crossed
sampler = ChannelSampler(cfg, seed=1)
walk = np.column_stack([np.linspace(0, 500, 11), np.zeros(11)])
for x, y in walk:
    s = sampler.sample((x, y))
    print(f"x={x:5.0f} m  shadow {s.shadowing_db:6.2f} dB  mean block rate {s.rate.mean():.3f} Mb/s")
