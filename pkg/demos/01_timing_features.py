"""Timing features: from press/release logs to feature steps and back."""
from __future__ import annotations

import numpy as np

from keysynth import KeystrokeSequence, extract_features, reconstruct_timestamps, truncate
from keysynth.errors import NonCausalSequence

# A three-key sample: 'H' then 'i' typed with rollover ('i' pressed before 'H'
# is released), then '!' after a short pause.
sample = KeystrokeSequence.from_events("alice", "s1", [(72, 0, 120), (73, 80, 200), (33, 350, 430)])
fs = extract_features(sample)

# Three keys give two steps. The hold of the last key is not part of any step.
print("columns:", "hold, inter_press, inter_release, inter_key, key_norm")
print(fs.values.round(3))

# The rollover shows up as a negative inter-key latency.
print("inter_key:", fs.inter_key)

# Holds plus inter-key latencies are enough to rebuild the timestamps,
# anchored at press time zero. The last hold is supplied separately.
back = reconstruct_timestamps(sample.key_codes, np.append(fs.hold, 80.0), fs.inter_key)
print("press:  ", back.press)
print("release:", back.release)
assert back.same_timing(sample)

# A rollover longer than the previous hold would press a key before the one
# before it: reconstruction refuses, and names the offending step.
try:
    reconstruct_timestamps([1, 2, 3], [50.0, 50.0, 50.0], [10.0, -60.0])
except NonCausalSequence as exc:
    print("non-causal steps:", exc.offending)

# Detectors look at fixed-length samples: keep the first L keys, or drop the sample.
long_sample = reconstruct_timestamps(np.arange(65, 105), np.full(40, 90.0), np.full(39, 60.0))
print("40 keys truncated to 30 ->", truncate(extract_features(long_sample), 30).n_steps, "steps")
print("3 keys truncated to 30 ->", truncate(fs, 30))
