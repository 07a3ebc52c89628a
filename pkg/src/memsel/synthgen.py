"""Synthetic datasets with known ground truth."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset, from_categories

# Family tokens spelled as in the public CSV's category column.
FAMILY_TOKENS = {
    "Trojan": ("Zeus", "Emotet", "Refroso", "Scar", "Reconyc"),
    "Spyware": ("180solutions", "CWS", "Gator", "Transponder", "TIBS"),
    "Ransomware": ("Conti", "Maze", "Pysa", "Ako", "Shade"),
}

MEMORY_FEATURE_NAMES = (
    "pslist.nproc", "pslist.nppid", "pslist.avg_threads", "pslist.avg_handlers",
    "dlllist.ndlls", "dlllist.avg_dlls_per_proc", "handles.nhandles", "handles.avg_handles_per_proc",
    "handles.nfile", "handles.nevent", "handles.nkey", "handles.nthread", "handles.nsection",
    "handles.nmutant", "ldrmodules.not_in_load", "ldrmodules.not_in_init", "ldrmodules.not_in_mem",
    "malfind.ninjections", "malfind.commitCharge", "malfind.protection", "psxview.not_in_pslist",
    "psxview.not_in_session", "modules.nmodules", "svcscan.nservices", "svcscan.kernel_drivers",
    "svcscan.process_services", "svcscan.nactive", "callbacks.ncallbacks", "callbacks.nanonymous",
    "callbacks.ngeneric",
)


@dataclass(frozen=True)
class SynthSpec:
    n_samples: int = 1000
    n_features: int = 20
    n_informative: int = 5
    n_classes: int = 3
    class_sep: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < self.n_classes:
            raise ValueError("need at least one sample per class")
        if not 0 <= self.n_informative <= self.n_features:
            raise ValueError("n_informative must lie in [0, n_features]")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if not self.class_sep > 0:
            raise ValueError("class_sep must be > 0")


def make_blobs(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gaussian class blobs with a known set of informative columns.

    Labels are balanced (sizes differ by at most one). On each informative
    column the class means are a seeded permutation of
    ``0, class_sep, 2 * class_sep, ...`` with unit noise; the remaining columns
    are standard normal noise independent of the label.

    Returns
    -------
    X : ndarray (n_samples, n_features)
    y : ndarray of int class ids
    informative : ascending ndarray of informative column indices
    """
    rng = np.random.default_rng(spec.seed)
    n, d = spec.n_samples, spec.n_features
    informative = np.sort(rng.choice(d, size=spec.n_informative, replace=False))
    y = rng.permutation(np.arange(n) % spec.n_classes).astype(np.int64)
    X = rng.standard_normal((n, d))
    for j in informative:
        means = rng.permutation(spec.n_classes) * spec.class_sep
        X[:, j] += means[y]
    return X, y, informative


def synthetic_memory_dataset(
    n_per_family: int = 40,
    n_benign: int | None = None,
    n_features: int = 12,
    seed: int = 0,
    family_sep: float = 1.5,
) -> LabeledDataset:
    """A small dataset shaped like the memory-forensics CSV.

    Benign rows plus 3 malware types x 5 families, nonnegative count-like
    features with names borrowed from memory-forensics extractors, and
    category strings of the form ``<Type>-<Family>-<hash>-<n>.raw``.
    Malware is far from benign; types and families are progressively harder
    to tell apart.
    """
    rng = np.random.default_rng(seed)
    if n_features > len(MEMORY_FEATURE_NAMES):
        raise ValueError(f"at most {len(MEMORY_FEATURE_NAMES)} features")
    n_benign = 15 * n_per_family if n_benign is None else n_benign
    rows, cats = [], []
    scale = rng.uniform(5, 200, size=n_features)
    benign_center = rng.normal(0, 1, size=n_features)
    rows.append(benign_center + rng.normal(0, 1, size=(n_benign, n_features)))
    cats += ["Benign"] * n_benign
    counter = 0
    for typ, fams in FAMILY_TOKENS.items():
        type_center = benign_center + 4.0 + rng.normal(0, 1.5, size=n_features)
        for fam in fams:
            center = type_center + family_sep * rng.normal(0, 1, size=n_features)
            rows.append(center + rng.normal(0, 1, size=(n_per_family, n_features)))
            for _ in range(n_per_family):
                digest = hashlib.sha256(f"{seed}:{counter}".encode()).hexdigest()
                cats.append(f"{typ}-{fam}-{digest}-{counter % 7 + 1}.raw")
                counter += 1
    Z = np.vstack(rows)
    X = np.round(np.maximum(0.0, (Z + 6.0) * scale), 2)
    order = rng.permutation(len(cats))
    return from_categories(X[order], MEMORY_FEATURE_NAMES[:n_features], [cats[i] for i in order])


def blobs_dataset(spec: SynthSpec) -> tuple[LabeledDataset, np.ndarray]:
    """:func:`make_blobs` wrapped as a labeled dataset for the pipeline and CLI.

    Class 0 becomes ``Benign`` and class c >= 1 the c-th malware type (one
    family each), so ``n_classes`` may be 2, 3 or 4. Returns the dataset and
    the informative column indices.
    """
    if spec.n_classes > 1 + len(FAMILY_TOKENS):
        raise ValueError("blobs_dataset supports at most 4 classes")
    X, y, informative = make_blobs(spec)
    types = list(FAMILY_TOKENS)
    cats = ["Benign" if c == 0 else f"{types[c - 1]}-{FAMILY_TOKENS[types[c - 1]][0]}-{i:08x}-1.raw"
            for i, c in enumerate(y)]
    names = [f"f{j:02d}" for j in range(spec.n_features)]
    return from_categories(X, names, cats), informative
