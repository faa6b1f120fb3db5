"""The key-conditioned neural generator.

Four small networks, one per time feature, map a key code to the mean and
scale of a Gaussian. Synthesis draws a hold for every key and an inter-key
latency for every transition, then rebuilds timestamps.
"""
from __future__ import annotations

import numpy as np

from keysynth import GnnConfig, generate_pseudo_human, gnn_forward, synthesize_gnn, train_gnn

humans = generate_pseudo_human(60, 10, rng=2)
feats = humans.features()
model = train_gnn(feats, GnnConfig(max_epochs=40), seed=0)
for i, hist in enumerate(model.history, start=1):
    print(f"feature f{i}: {len(hist)} epochs, final NLL {hist[-1]:.3f}")

# Compare the learned hold distribution with the data for a few keys.
values = np.concatenate([f.values for f in feats])
print(" key  data mean  model mean  data sd  model sd")
for ch in " etaq":
    code = ord(ch)
    h = values[np.isclose(values[:, 4], code / 255), 0]
    mu, sigma = gnn_forward(model, 1, code / 255)
    print(f" {ch!r:4} {h.mean():9.1f} {float(mu):11.1f} {h.std():8.1f} {float(sigma):9.1f}")

# A synthetic sample typing the first human sentence.
text = humans.sequences[0]
bot = synthesize_gnn(model, text.key_codes, np.random.default_rng(5))
print("first five holds, human:", (text.release - text.press)[:5].round(1))
print("first five holds, bot:  ", (bot.release - bot.press)[:5].round(1))
