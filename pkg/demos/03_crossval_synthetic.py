"""Subject-disjoint 5-fold evaluation of every method on synthetic smiles.

Takes about half a minute on one core.  Raise ``n_per_class`` and switch to
10 folds to reproduce the acceptance run.
"""
from dataclasses import replace

from genuine_smile.harness import config_from_dict, kfold_evaluate, synth_generate
from genuine_smile.harness.config import ACCEPTANCE

cfg = replace(config_from_dict(ACCEPTANCE), folds=5, timing_sequences=1)
ds = synth_generate(40, seed=cfg.seed)
print(ds.class_counts)

report = kfold_evaluate(ds, config=cfg, timing=True)
print(report.to_table())

# per-fold accuracies behind the mean ± std
for name, res in report.methods.items():
    print(f"{name:<12}", " ".join(f"{a:5.1f}" for a in res.accuracies))
