"""
A small experiment grid end to end
==================================

Writes a synthetic memory-forensics style CSV, runs the task x classifier x
selection grid on it, prints the result tables and one confusion matrix,
then reruns to show that cached cells are reused.
Run with ``python demos/03_experiment_grid.py [out_dir]``.
The same steps from a shell::

    memsel load-check --data mem.csv
    memsel grid --data mem.csv --task type3,family5:Trojan --classifier lda,knn,rf --out results
    memsel render --out results
"""
import sys
import tempfile
import time
from pathlib import Path

from memsel.dataset import load_csv, write_csv
from memsel.runner import ExperimentConfig, render_table, run_experiments
from memsel.synthgen import synthetic_memory_dataset

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="memsel-demo-"))
out.mkdir(parents=True, exist_ok=True)
csv_path = out / "mem.csv"
write_csv(synthetic_memory_dataset(n_per_family=30, seed=0), csv_path)
ds = load_csv(csv_path)
print(f"{ds.n_rows} rows, {ds.n_features} features, classes {ds.counts('class')}")

cfg = ExperimentConfig(
    data=str(csv_path),
    tasks=("binary", "type3", "family5:Trojan"),
    classifiers=("mnb", "lda", "knn", "rf"),
    out=str(out / "results"),
)
t0 = time.perf_counter()
bundle = run_experiments(cfg)
print(f"grid: {len(bundle.reports)} cells in {time.perf_counter() - t0:.1f}s, bundle {bundle.bundle_hash[:12]}\n")
for task in cfg.tasks:
    print(render_table(bundle, task))

conf = out / "results" / "confusions" / "family5-trojan" / "rf__mi__50.csv"
print(conf.relative_to(out))
print(conf.read_text())

t0 = time.perf_counter()
again = run_experiments(cfg)
cached = sum(c["cached"] for c in again.manifest["cells"])
print(f"rerun: {cached}/{len(again.manifest['cells'])} cells cached, {time.perf_counter() - t0:.2f}s, "
      f"same bundle hash: {again.bundle_hash == bundle.bundle_hash}")
