"""
Recovering from a change in tolerance
=====================================

A user's tolerance flips half-way through a stream of feedback. The online
update brings the misprediction rate back down; a frozen copy of the model
stays wrong.
"""
import numpy as np

from zotnet import SimulationConfig, run_development
from zotnet.pipeline import drift_experiment, mirrored_tolerance

config = SimulationConfig(tolerance_noise_std=0.0, dev_duration_s=43200)
dev = run_development(config)
before = config.personas()[0]
after = mirrored_tolerance(before)

live = drift_experiment(dev.model.copy(), before, after, 8000, 4000, seed=1, config=config)
frozen = drift_experiment(dev.model.copy(), before, after, 8000, 4000, seed=1, config=config, learn=False)

trail = live.trailing()
for k in range(999, 8000, 500):
    print(f"sample {k + 1:5d}  trailing error live {trail[k]:.3f}  frozen {frozen.trailing()[k]:.3f}")
print("recovered", live.recovery_samples, "samples after the change")
print("error in the first 50 samples after the change:", np.mean(live.errors[4000:4050]))
