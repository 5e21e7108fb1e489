"""Dataset splitting and ROC/AUC evaluation.

Splits are stratified by (label, machine_id) by default: 25% test, then
10% of the remainder for validation. Unsupervised mode discards anomalous
clips from train and validation after splitting. The positive class is
'anomalous' throughout: higher score = more anomalous.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabelsError, InputError, InsufficientDataError

LABELS = ("normal", "anomalous")
MACHINE_TYPES = ("fan", "pump", "valve", "slide")


@dataclass(frozen=True)
class ManifestRecord:
    clip_id: str
    path: str
    machine_type: str
    machine_id: str
    label: str  # normal | anomalous


def read_manifest(path):
    records = []
    seen = set()
    with open(str(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["clip_id", "path", "machine_type", "machine_id", "label"]:
            raise InputError(
                f"{path}: expected header clip_id,path,machine_type,machine_id,label"
            )
        for row in reader:
            if not row:
                continue
            if len(row) != 5:
                raise InputError(f"{path}: malformed row {row!r}")
            if row[4] not in LABELS:
                raise InputError(f"{path}: unknown label {row[4]!r}")
            if row[0] in seen:
                raise InputError(f"{path}: duplicate clip_id {row[0]!r}")
            seen.add(row[0])
            records.append(ManifestRecord(*row))
    if not records:
        raise InputError(f"{path}: empty manifest")
    return records


def write_manifest(path, records):
    with open(str(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "path", "machine_type", "machine_id", "label"])
        for r in records:
            writer.writerow([r.clip_id, r.path, r.machine_type, r.machine_id, r.label])


@dataclass
class Split:
    train: list
    validation: list
    test: list
    mode: str  # supervised | unsupervised


def split(manifest, seed=0, mode="supervised", test_fraction=0.25,
          validation_fraction=0.10, stratified=True):
    """25% test, then 10% of the remainder for validation.

    stratified=False gives the plain uniform split (strict-baseline mode).
    """
    if mode not in ("supervised", "unsupervised"):
        raise InputError(f"unknown split mode {mode!r}")
    if len(manifest) < 4:
        raise InsufficientDataError("cannot split fewer than 4 clips")

    rng = np.random.Generator(np.random.PCG64(seed))
    if stratified:
        strata = {}
        for rec in manifest:
            strata.setdefault((rec.label, rec.machine_id), []).append(rec)
        groups = [strata[key] for key in sorted(strata)]
    else:
        groups = [list(manifest)]

    train, validation, test = [], [], []
    for group in groups:
        order = rng.permutation(len(group))
        n_test = int(round(test_fraction * len(group)))
        test_idx = set(order[:n_test].tolist())
        rest = [group[i] for i in order[n_test:]]
        n_val = int(round(validation_fraction * len(rest)))
        test.extend(group[i] for i in sorted(test_idx))
        validation.extend(rest[:n_val])
        train.extend(rest[n_val:])

    if mode == "unsupervised":
        train = [r for r in train if r.label == "normal"]
        validation = [r for r in validation if r.label == "normal"]

    key = lambda r: r.clip_id
    return Split(
        train=sorted(train, key=key),
        validation=sorted(validation, key=key),
        test=sorted(test, key=key),
        mode=mode,
    )


def write_split(path, split_result):
    with open(str(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "subset"])
        for subset in ("train", "validation", "test"):
            for rec in getattr(split_result, subset):
                writer.writerow([rec.clip_id, subset])


def read_split(path):
    """Returns {clip_id: subset}."""
    out = {}
    with open(str(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["clip_id", "subset"]:
            raise InputError(f"{path}: expected header clip_id,subset")
        for row in reader:
            if row:
                out[row[0]] = row[1]
    return out


# --------------------------------------------------------------------- ROC

@dataclass
class RocResult:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def roc_auc(scores, labels):
    """ROC over all distinct score thresholds plus trapezoidal AUC.

    Tied scores collapse into a single ROC step, which makes the
    trapezoidal area equal the tie-corrected Mann-Whitney statistic.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise InputError("scores and labels must be matching 1D arrays")
    if not np.all(np.isfinite(scores)):
        raise InputError("non-finite scores")
    y = labels.astype(np.float64)
    n_pos = float(y.sum())
    n_neg = float(y.size - y.sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError("AUC undefined with a single class")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_y = y[order]
    # indices where the threshold changes (last element of each tie group)
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    cut = np.concatenate([distinct, [y.size - 1]])
    tp = np.cumsum(sorted_y)[cut]
    fp = np.cumsum(1.0 - sorted_y)[cut]
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    auc = float(np.trapezoid(tpr, fpr))
    return RocResult(fpr=fpr, tpr=tpr, auc=auc)


def write_scores(path, rows):
    """rows: iterable of (clip_id, score) or (clip_id, score, vote)."""
    rows = list(rows)
    with_vote = rows and len(rows[0]) == 3
    with open(str(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "score", "vote"] if with_vote
                        else ["clip_id", "score"])
        for row in rows:
            writer.writerow([row[0], repr(float(row[1]))] + list(row[2:]))


def read_scores(path):
    """Returns list of (clip_id, score) tuples (votes, if present, dropped)."""
    out = []
    with open(str(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["clip_id", "score"]:
            raise InputError(f"{path}: expected header clip_id,score[,vote]")
        for row in reader:
            if row:
                out.append((row[0], float(row[1])))
    return out


def write_roc(path, roc):
    """Delimited fpr,tpr points with a trailing auc summary line."""
    with open(str(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for f, t in zip(roc.fpr, roc.tpr):
            writer.writerow([repr(float(f)), repr(float(t))])
        writer.writerow(["auc", f"{roc.auc:.6f}"])
