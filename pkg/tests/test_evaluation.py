import numpy as np
import pytest

from soundfault import evaluation as ev
from soundfault.errors import (
    DegenerateLabelsError,
    InputError,
    InsufficientDataError,
)


def _records(n_normal, n_anomalous, machine_id="id_00", start=0):
    recs = []
    for i in range(n_normal):
        recs.append(ev.ManifestRecord(
            f"{machine_id}_n{start + i:05d}", f"n{i}.wav", "fan", machine_id, "normal"
        ))
    for i in range(n_anomalous):
        recs.append(ev.ManifestRecord(
            f"{machine_id}_a{start + i:05d}", f"a{i}.wav", "fan", machine_id, "anomalous"
        ))
    return recs


# ---------------------------------------------------------------- manifest

def test_manifest_round_trip(tmp_path):
    recs = _records(3, 2)
    path = tmp_path / "manifest.csv"
    ev.write_manifest(path, recs)
    assert ev.read_manifest(path) == recs


def test_manifest_duplicate_id(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text(
        "clip_id,path,machine_type,machine_id,label\n"
        "a,1.wav,fan,id_00,normal\n"
        "a,2.wav,fan,id_00,normal\n"
    )
    with pytest.raises(InputError):
        ev.read_manifest(path)


def test_manifest_bad_label(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "clip_id,path,machine_type,machine_id,label\n"
        "a,1.wav,fan,id_00,weird\n"
    )
    with pytest.raises(InputError):
        ev.read_manifest(path)


def test_manifest_bad_header(tmp_path):
    path = tmp_path / "hdr.csv"
    path.write_text("id,file\n1,x.wav\n")
    with pytest.raises(InputError):
        ev.read_manifest(path)


# ------------------------------------------------------------------- split

def test_split_sizes_single_machine():
    # 1011 normal + 407 anomalous: test ~= round(0.25 * n) per stratum
    manifest = _records(1011, 407)
    result = ev.split(manifest, seed=0)
    assert len(result.test) == round(0.25 * 1011) + round(0.25 * 407)
    n_rest_normal = 1011 - round(0.25 * 1011)
    n_rest_anom = 407 - round(0.25 * 407)
    assert len(result.validation) == round(0.1 * n_rest_normal) + round(0.1 * n_rest_anom)
    assert len(result.train) == len(manifest) - len(result.test) - len(result.validation)


def test_split_partition_disjoint_and_complete():
    manifest = _records(60, 20, "id_00") + _records(40, 10, "id_02", start=100)
    result = ev.split(manifest, seed=3)
    ids = [r.clip_id for r in result.train + result.validation + result.test]
    assert len(ids) == len(set(ids)) == len(manifest)
    assert set(ids) == {r.clip_id for r in manifest}


def test_split_stratified_per_machine():
    manifest = _records(80, 20, "id_00") + _records(40, 12, "id_02", start=100)
    result = ev.split(manifest, seed=1)
    test_by_machine = {}
    for r in result.test:
        test_by_machine.setdefault((r.machine_id, r.label), 0)
        test_by_machine[(r.machine_id, r.label)] += 1
    assert test_by_machine[("id_00", "normal")] == round(0.25 * 80)
    assert test_by_machine[("id_02", "anomalous")] == round(0.25 * 12)


def test_unsupervised_mode_drops_anomalous_from_train_val():
    manifest = _records(60, 30)
    result = ev.split(manifest, seed=0, mode="unsupervised")
    assert all(r.label == "normal" for r in result.train)
    assert all(r.label == "normal" for r in result.validation)
    assert any(r.label == "anomalous" for r in result.test)


def test_split_deterministic():
    manifest = _records(50, 20)
    a = ev.split(manifest, seed=9)
    b = ev.split(manifest, seed=9)
    assert [r.clip_id for r in a.test] == [r.clip_id for r in b.test]
    assert [r.clip_id for r in a.train] == [r.clip_id for r in b.train]


def test_split_seed_changes_assignment():
    manifest = _records(50, 20)
    a = ev.split(manifest, seed=0)
    b = ev.split(manifest, seed=1)
    assert {r.clip_id for r in a.test} != {r.clip_id for r in b.test}


def test_split_too_small():
    with pytest.raises(InsufficientDataError):
        ev.split(_records(2, 1))


def test_split_bad_mode():
    with pytest.raises(InputError):
        ev.split(_records(10, 5), mode="semi")


def test_split_file_round_trip(tmp_path):
    result = ev.split(_records(20, 8), seed=0)
    path = tmp_path / "split.csv"
    ev.write_split(path, result)
    mapping = ev.read_split(path)
    assert len(mapping) == 28
    for r in result.test:
        assert mapping[r.clip_id] == "test"
    for r in result.train:
        assert mapping[r.clip_id] == "train"


# --------------------------------------------------------------------- ROC

def _mann_whitney(scores, labels):
    """Oracle: P(pos > neg) + 0.5 P(pos == neg) by direct enumeration."""
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (pos.size * neg.size)


def test_roc_perfect_separation():
    scores = np.array([0.1, 0.2, 0.8, 0.9])
    labels = np.array([0, 0, 1, 1])
    assert ev.roc_auc(scores, labels).auc == 1.0


def test_roc_inverted_separation():
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    labels = np.array([0, 0, 1, 1])
    assert ev.roc_auc(scores, labels).auc == 0.0


def test_roc_all_tied_is_half():
    scores = np.ones(10)
    labels = np.array([0, 1] * 5)
    assert ev.roc_auc(scores, labels).auc == pytest.approx(0.5)


def test_roc_matches_mann_whitney_oracle(rng):
    for _ in range(25):
        n = int(rng.integers(10, 60))
        labels = np.zeros(n, dtype=int)
        labels[: int(rng.integers(1, n))] = 1
        rng.shuffle(labels)
        # quantized scores force plenty of ties
        scores = np.round(rng.normal(0, 1, n) + labels, 1)
        got = ev.roc_auc(scores, labels).auc
        assert got == pytest.approx(_mann_whitney(scores, labels), abs=1e-12)


def test_roc_monotone_transform_invariant(rng):
    scores = rng.normal(0, 1, 200)
    labels = (rng.random(200) > 0.6).astype(int)
    a = ev.roc_auc(scores, labels).auc
    b = ev.roc_auc(np.exp(scores) * 3.0 + 7.0, labels).auc
    assert a == pytest.approx(b, abs=1e-12)


def test_roc_negation_complements(rng):
    scores = rng.normal(0, 1, 100)
    labels = (rng.random(100) > 0.5).astype(int)
    a = ev.roc_auc(scores, labels).auc
    b = ev.roc_auc(-scores, labels).auc
    assert a + b == pytest.approx(1.0, abs=1e-12)


def test_roc_curve_endpoints_and_monotone(rng):
    scores = rng.normal(0, 1, 50)
    labels = (rng.random(50) > 0.5).astype(int)
    roc = ev.roc_auc(scores, labels)
    assert roc.fpr[0] == 0.0 and roc.tpr[0] == 0.0
    assert roc.fpr[-1] == 1.0 and roc.tpr[-1] == 1.0
    assert np.all(np.diff(roc.fpr) >= 0)
    assert np.all(np.diff(roc.tpr) >= 0)


def test_roc_single_class_rejected():
    with pytest.raises(DegenerateLabelsError):
        ev.roc_auc(np.array([0.1, 0.2]), np.array([1, 1]))


def test_roc_non_finite_rejected():
    with pytest.raises(InputError):
        ev.roc_auc(np.array([0.1, np.nan]), np.array([0, 1]))


# ------------------------------------------------------------------- files

def test_scores_round_trip(tmp_path):
    rows = [("a", 0.123456789), ("b", 7.0)]
    path = tmp_path / "scores.csv"
    ev.write_scores(path, rows)
    back = ev.read_scores(path)
    assert back == [("a", 0.123456789), ("b", 7.0)]


def test_scores_with_votes(tmp_path):
    path = tmp_path / "scores.csv"
    ev.write_scores(path, [("a", 1.5, 1), ("b", 0.5, 0)])
    assert ev.read_scores(path) == [("a", 1.5), ("b", 0.5)]
    header = path.read_text().splitlines()[0]
    assert header == "clip_id,score,vote"


def test_roc_file(tmp_path):
    roc = ev.roc_auc(np.array([0.1, 0.9]), np.array([0, 1]))
    path = tmp_path / "roc.csv"
    ev.write_roc(path, roc)
    lines = path.read_text().splitlines()
    assert lines[0] == "fpr,tpr"
    assert lines[-1] == "auc,1.000000"
