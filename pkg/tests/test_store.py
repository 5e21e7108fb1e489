import pytest

from soundfault.errors import CorruptArtifactError, InputError
from soundfault.store import ArtifactStore, RunRecord, make_run_id


def test_put_get_round_trip(tmp_path):
    store = ArtifactStore(tmp_path / "store")
    payload = b"\x00\x01payload"
    digest = store.put("model", payload, {"stage": "test", "k": 4})
    back, meta = store.get("model", digest)
    assert back == payload
    assert meta == {"stage": "test", "k": "4"}


def test_identical_payload_identical_digest(tmp_path):
    store = ArtifactStore(tmp_path / "store")
    a = store.put("scores", b"same bytes")
    b = store.put("scores", b"same bytes")
    assert a == b
    assert len(a) == 64


def test_layout_uses_digest_prefix(tmp_path):
    store = ArtifactStore(tmp_path / "store")
    digest = store.put("roc", b"curve")
    assert (tmp_path / "store" / "roc" / digest[:2] / digest).exists()
    assert (tmp_path / "store" / "roc" / digest[:2] / digest).with_suffix(
        ".meta"
    ).exists()


def test_tampered_payload_detected(tmp_path):
    store = ArtifactStore(tmp_path / "store")
    digest = store.put("model", b"original")
    path = tmp_path / "store" / "model" / digest[:2] / digest
    path.write_bytes(b"tampered")
    with pytest.raises(CorruptArtifactError):
        store.get("model", digest)


def test_unknown_kind_rejected(tmp_path):
    store = ArtifactStore(tmp_path / "store")
    with pytest.raises(InputError):
        store.put("mystery", b"x")
    with pytest.raises(InputError):
        store.get("mystery", "0" * 64)


def test_missing_artifact(tmp_path):
    store = ArtifactStore(tmp_path / "store")
    with pytest.raises(InputError):
        store.get("model", "f" * 64)


def test_meta_rejects_unrepresentable_values(tmp_path):
    store = ArtifactStore(tmp_path / "store")
    with pytest.raises(InputError):
        store.put("model", b"x", {"note": "two\nlines"})


def test_ledger_append_only_order(tmp_path):
    store = ArtifactStore(tmp_path / "store")
    assert store.list_runs() == []
    for i in range(3):
        store.record_run(RunRecord(
            run_id=f"run{i}", stage="stage", config={"i": i},
            inputs=[f"in{i}"], outputs=[f"out{i}"],
        ))
    rows = store.list_runs()
    assert [r[0] for r in rows] == ["run0", "run1", "run2"]
    assert rows[1][1] == "stage"
    # appending again preserves earlier rows
    store.record_run(RunRecord("run3", "stage", {}, [], []))
    assert [r[0] for r in store.list_runs()] == ["run0", "run1", "run2", "run3"]


def test_run_id_format():
    rid = make_run_id("stage", {"a": 1})
    assert len(rid) == 12
    assert all(c in "0123456789abcdef" for c in rid)
    assert make_run_id("stage", {"a": 1}) != rid  # time-salted
