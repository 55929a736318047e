"""
Tracking a person through two links
===================================

One transmitter faces two receivers across a 3 m corridor.  The tracker
wakes up when a link reports shadowing, follows the person with a
particle filter and goes idle when both links are quiet again.
"""

import numpy as np

from tristate_dfl.experiment import detection_offset, RunSetup
from tristate_dfl.simulate import corridor_scenario, measurement_vectors, synthesize_rss
from tristate_dfl.tracking import Tracker, TrackerConfig

sc = corridor_scenario(3.0)
stream, truth = synthesize_rss(sc, seed=3)
times, r = measurement_vectors(stream)
pos, _ = truth.trajectory.at(times)

#%%
# Particles start where the HMM typically first flags shadowing, which
# is a little before the body reaches the line.
shift = detection_offset(RunSetup(sc))
print(f"initial particle offset from the link: {shift:.3f} m")

tracker = Tracker(sc.links, TrackerConfig(init_shift=shift), seed=3)
for k in range(len(times)):
    step = tracker.step(r[k])
    if step.estimate is not None and k % 8 == 0:
        e = step.estimate
        print(f"t={times[k]:5.2f}s  est ({e.px:+.3f}, {e.py:.3f})  "
              f"true ({pos[k, 0]:+.3f}, {pos[k, 1]:.3f})  vx {e.vx:+.2f} m/s")

#%%
# Any observation model can drive the same filter.
for model in ("exponential", "exponential-rayleigh"):
    trk = Tracker(sc.links, TrackerConfig(model=model, init_shift=shift), seed=3)
    active = sum(trk.step(r[k]).estimate is not None for k in range(len(times)))
    print(f"{model}: tracker active for {active} of {len(times)} steps")
