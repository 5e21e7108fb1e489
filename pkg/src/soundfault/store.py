"""Content-addressed artifact store and append-only run ledger.

Layout: ``store/<kind>/<digest-prefix>/<digest>`` with a plain-text
``.meta`` sidecar per artifact, plus ``store/ledger.csv`` recording one
row per pipeline stage execution.
"""

import csv
import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CorruptArtifactError, InputError

KINDS = ("spectrogram", "model", "embeddings", "scores", "roc", "attention",
         "split", "index", "coords")


@dataclass
class RunRecord:
    run_id: str
    stage: str
    config: dict
    inputs: list
    outputs: list  # artifact digests
    seed: int = 0
    timestamp: float = 0.0


def _meta_dump(meta):
    lines = []
    for key in sorted(meta):
        value = str(meta[key])
        if "\n" in value or "=" in str(key):
            raise InputError(f"metadata value for {key!r} not representable")
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def _meta_load(text):
    meta = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        meta[key] = value
    return meta


class ArtifactStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @property
    def ledger_path(self):
        return self.root / "ledger.csv"

    def _path(self, kind, digest):
        return self.root / kind / digest[:2] / digest

    def put(self, kind, payload, metadata=None):
        """Store payload bytes; returns its sha256 hex digest."""
        if kind not in KINDS:
            raise InputError(f"unknown artifact kind {kind!r}")
        digest = hashlib.sha256(payload).hexdigest()
        path = self._path(kind, digest)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
        path.with_suffix(".meta").write_text(_meta_dump(metadata or {}))
        return digest

    def get(self, kind, digest):
        """Returns (payload, metadata); verifies the content digest."""
        if kind not in KINDS:
            raise InputError(f"unknown artifact kind {kind!r}")
        path = self._path(kind, digest)
        if not path.exists():
            raise InputError(f"no {kind} artifact {digest}")
        payload = path.read_bytes()
        if hashlib.sha256(payload).hexdigest() != digest:
            raise CorruptArtifactError(f"{path}: content does not match digest")
        meta_path = path.with_suffix(".meta")
        meta = _meta_load(meta_path.read_text()) if meta_path.exists() else {}
        return payload, meta

    def record_run(self, record):
        new = not self.ledger_path.exists()
        if record.timestamp == 0.0:
            record.timestamp = time.time()
        with open(self.ledger_path, "a", newline="") as fh:
            writer = csv.writer(fh)
            if new:
                writer.writerow(
                    ["run_id", "stage", "timestamp", "seed",
                     "config", "inputs", "outputs"]
                )
            config = ";".join(f"{k}={record.config[k]}" for k in sorted(record.config))
            writer.writerow([
                record.run_id, record.stage, f"{record.timestamp:.6f}",
                record.seed, config,
                "|".join(str(p) for p in record.inputs),
                "|".join(record.outputs),
            ])

    def list_runs(self):
        if not self.ledger_path.exists():
            return []
        with open(self.ledger_path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            return [row for row in reader if row]


def make_run_id(stage, config):
    blob = stage + "|" + ";".join(f"{k}={v}" for k, v in sorted(config.items()))
    blob += f"|{time.time_ns()}"
    return hashlib.sha256(blob.encode()).hexdigest()[:12]
