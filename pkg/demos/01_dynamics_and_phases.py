"""Regression dynamics and phase segmentation of one synthetic smile."""
import numpy as np

from genuine_smile.harness import SynthParams, synth_generate
from genuine_smile.features import SMILE, analyse

# one spontaneous and one posed sequence, light noise
ds = synth_generate(1, seed=42, params=SynthParams(noise=0.05))

for rec in ds.records:
    an = analyse(rec.signals)
    smile = an.dynamics[SMILE]
    print(f"{rec.sequence_id} ({rec.label}), {rec.signals.n_frames} frames at {rec.signals.fps:g} fps")

    # slope, correlation and the r-adjusted slope for each window size
    for w in smile.windows:
        tr = smile[w]
        print(f"  w={w:2d}  max slope {tr.slope.max():6.2f}/s  min {tr.slope.min():6.2f}/s  "
              f"mean |r| {np.abs(tr.coeff).mean():.2f}")

    # onset / apex / offset from the finest r-adjusted slope of the smile
    for name, iv in an.phases.phases().items():
        print(f"  {name:<7} frames [{iv.start:3d}, {iv.end:3d})  {len(iv) / rec.signals.fps:5.2f} s")

    onset = an.phases.onset
    print(f"  onset mean adjusted slope {smile.finest.adjusted[onset.start:onset.end].mean():.2f}/s\n")
