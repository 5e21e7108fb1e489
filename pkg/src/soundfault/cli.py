"""Command-line entry point wiring the pipeline stages together.

Every subcommand writes its artifact into the content-addressed store,
appends a run record, and prints a one-line machine-parsable summary.
Exit codes: 1 usage, 2 input format, 3 numeric failure.
"""

import argparse
import configparser
import csv
import sys
from pathlib import Path

import numpy as np

from . import analysis, autoencoder, classifier_head, dsp, evaluation, lof, plots
from .audio_io import downmix, read_wav
from .errors import InputError, NumericError, SoundFaultError
from .store import ArtifactStore, RunRecord, make_run_id


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_config(path):
    if not path:
        return {}
    cfg = configparser.ConfigParser()
    if not cfg.read(path):
        raise InputError(f"cannot read config file {path}")
    return {s: dict(cfg[s]) for s in cfg.sections()}


def _resolve(args, config, section, key, default, cast=float):
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if section in config and key in config[section]:
        return cast(config[section][key])
    return default


def _store(args):
    return ArtifactStore(args.store)


def _record(store, stage, config, inputs, outputs, seed=0):
    store.record_run(
        RunRecord(
            run_id=make_run_id(stage, config), stage=stage, config=config,
            inputs=inputs, outputs=outputs, seed=seed,
        )
    )


def _read_index(path):
    rows = []
    with open(str(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["clip_id", "digest", "label", "machine_type", "machine_id"]:
            raise InputError(f"{path}: not a preprocess index file")
        for row in reader:
            if row:
                rows.append(row)
    return rows


def _load_windows(store, digest, context):
    payload, meta = store.get("spectrogram", digest)
    spec = dsp.spectrogram_from_bytes(payload, meta)
    return dsp.frame_windows(spec, context).data


# ------------------------------------------------------------- subcommands

def cmd_preprocess(args, config):
    store = _store(args)
    records = evaluation.read_manifest(args.manifest)
    index_path = args.index_out or (Path(args.store) / f"index_{args.profile}.csv")
    index_rows = []
    pooled = []
    for rec in records:
        clip = read_wav(rec.path)
        signal = downmix(clip)
        spec = dsp.profile_spectrogram(
            signal, clip.sample_rate_hz, args.profile, normalize=args.normalize
        )
        meta = dsp.spectrogram_meta(spec)
        meta.update(
            clip_id=rec.clip_id, label=rec.label, profile=args.profile,
            machine_type=rec.machine_type, machine_id=rec.machine_id,
        )
        digest = store.put("spectrogram", dsp.spectrogram_to_bytes(spec), meta)
        index_rows.append(
            [rec.clip_id, digest, rec.label, rec.machine_type, rec.machine_id]
        )
        if args.pooled_out:
            pooled.append(dsp.pooled_embedding(spec))

    with open(str(index_path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "digest", "label", "machine_type", "machine_id"])
        writer.writerows(index_rows)
    digests = [r[1] for r in index_rows]
    store.put("index", Path(index_path).read_bytes(), {"profile": args.profile})

    if args.pooled_out:
        emb = classifier_head.EmbeddingSet(
            vectors=np.array(pooled),
            clip_ids=[r.clip_id for r in records],
            labels=[r.label for r in records],
            source_tag=f"pooled-logmel-{args.profile}",
        )
        classifier_head.write_embeddings(args.pooled_out, emb)

    _record(store, "preprocess",
            {"profile": args.profile, "manifest": args.manifest},
            [args.manifest], digests)
    print(f"preprocess profile={args.profile} clips={len(records)} "
          f"index={index_path}")


def cmd_split(args, config):
    store = _store(args)
    records = evaluation.read_manifest(args.manifest)
    result = evaluation.split(
        records, seed=args.seed, mode=args.mode,
        stratified=not (args.uniform or args.strict_paper),
    )
    evaluation.write_split(args.out, result)
    digest = store.put("split", Path(args.out).read_bytes(),
                       {"mode": args.mode, "seed": args.seed})
    _record(store, "split",
            {"mode": args.mode, "seed": args.seed, "manifest": args.manifest},
            [args.manifest], [digest], seed=args.seed)
    print(f"split train={len(result.train)} validation={len(result.validation)} "
          f"test={len(result.test)}")


def cmd_train_ae(args, config):
    store = _store(args)
    epochs = int(_resolve(args, config, "autoencoder", "epochs", 50, int))
    lr = _resolve(args, config, "autoencoder", "lr", 0.001)
    batch_size = int(_resolve(args, config, "autoencoder", "batch-size", 512, int))
    context = int(_resolve(args, config, "autoencoder", "context", 5, int))

    subsets = evaluation.read_split(args.split)
    index = _read_index(args.index)
    train_rows = [
        r for r in index
        if subsets.get(r[0]) == "train" and r[2] == "normal"
    ]
    if not train_rows:
        raise InputError("no normal training clips in index/split")
    windows = np.concatenate(
        [_load_windows(store, r[1], context) for r in train_rows]
    )
    model, history = autoencoder.train_autoencoder(
        windows, epochs=epochs, lr=lr, batch_size=batch_size,
        seed=args.seed, standardize=not args.strict_paper,
    )
    meta = {"stage": "autoencoder", "epochs": epochs, "lr": lr,
            "context": context, "seed": args.seed,
            "standardize": int(not args.strict_paper)}
    digest = store.put("model", autoencoder.model_to_bytes(model), meta)
    _record(store, "train-ae", meta, [args.index, args.split], [digest],
            seed=args.seed)
    final = history[-1] if history else float("nan")
    print(f"train-ae model={digest} windows={windows.shape[0]} "
          f"final_loss={final:.6f}")


def cmd_score_ae(args, config):
    store = _store(args)
    context = int(_resolve(args, config, "autoencoder", "context", 5, int))
    payload, _ = store.get("model", args.model)
    model = autoencoder.model_from_bytes(payload)
    subsets = evaluation.read_split(args.split) if args.split else None
    index = _read_index(args.index)
    rows = []
    for clip_id, digest, label, _, _ in index:
        if subsets is not None and subsets.get(clip_id) != args.subset:
            continue
        windows = _load_windows(store, digest, context)
        rows.append((clip_id, autoencoder.score_clip(model, windows)))
    evaluation.write_scores(args.out, rows)
    digest = store.put("scores", Path(args.out).read_bytes(),
                       {"stage": "score-ae", "model": args.model})
    _record(store, "score-ae", {"model": args.model, "subset": args.subset},
            [args.index], [digest])
    print(f"score-ae clips={len(rows)} scores={args.out}")


def cmd_train_head(args, config):
    store = _store(args)
    epochs = int(_resolve(args, config, "head", "epochs", 1, int))
    lr = _resolve(args, config, "head", "lr", 0.001)
    batch_size = int(_resolve(args, config, "head", "batch-size", 64, int))

    emb = classifier_head.read_embeddings(args.embeddings)
    head, history, norm = classifier_head.train_head(
        emb, epochs=epochs, lr=lr, batch_size=batch_size,
        seed=args.seed, standardize=args.standardize,
    )
    meta = {"stage": "head", "epochs": epochs, "lr": lr, "seed": args.seed,
            "dim": emb.dim}
    digest = store.put("model", classifier_head.head_to_bytes(head, norm), meta)
    _record(store, "train-head", meta, [args.embeddings], [digest],
            seed=args.seed)
    final = history[-1] if history else float("nan")
    print(f"train-head model={digest} rows={emb.vectors.shape[0]} "
          f"final_loss={final:.6f}")


def cmd_score_head(args, config):
    store = _store(args)
    payload, _ = store.get("model", args.model)
    head, norm = classifier_head.head_from_bytes(payload)
    emb = classifier_head.read_embeddings(args.embeddings)
    scores = classifier_head.score(head, emb, norm=norm)
    rows = list(zip(emb.clip_ids, scores))
    evaluation.write_scores(args.out, rows)
    digest = store.put("scores", Path(args.out).read_bytes(),
                       {"stage": "score-head", "model": args.model})
    _record(store, "score-head", {"model": args.model}, [args.embeddings],
            [digest])
    print(f"score-head clips={len(rows)} scores={args.out}")


def cmd_lof_fit(args, config):
    store = _store(args)
    k = int(_resolve(args, config, "lof", "k", 4, int))
    p = _resolve(args, config, "lof", "p", 2.0)
    emb = classifier_head.read_embeddings(args.embeddings)
    model = lof.fit_lof(emb.vectors, k=k, p=p)
    meta = {"stage": "lof", "k": k, "p": p, "dim": emb.dim,
            "n_train": emb.vectors.shape[0]}
    digest = store.put("model", lof.model_to_bytes(model), meta)
    _record(store, "lof-fit", meta, [args.embeddings], [digest])
    print(f"lof-fit model={digest} n={emb.vectors.shape[0]} k={k}")


def cmd_lof_score(args, config):
    store = _store(args)
    payload, _ = store.get("model", args.model)
    model = lof.model_from_bytes(payload)
    emb = classifier_head.read_embeddings(args.embeddings)
    scores = lof.score_lof(model, emb.vectors)
    levels = tuple(
        float(v) for v in _resolve(
            args, config, "lof", "contamination", "0.1,0.2,0.3,0.4", str
        ).split(",")
    )
    votes = lof.predict_vote(
        model.train_scores, scores, lof.VoteConfig(levels)
    )
    rows = [(cid, s, int(v)) for cid, s, v in zip(emb.clip_ids, scores, votes)]
    evaluation.write_scores(args.out, rows)
    digest = store.put("scores", Path(args.out).read_bytes(),
                       {"stage": "lof-score", "model": args.model})
    _record(store, "lof-score", {"model": args.model}, [args.embeddings],
            [digest])
    print(f"lof-score clips={len(rows)} scores={args.out}")


def cmd_eval_auc(args, config):
    store = _store(args)
    score_rows = evaluation.read_scores(args.scores)
    labels_by_id = {
        r.clip_id: 1.0 if r.label == "anomalous" else 0.0
        for r in evaluation.read_manifest(args.manifest)
    }
    missing = [cid for cid, _ in score_rows if cid not in labels_by_id]
    if missing:
        raise InputError(f"scored clips missing from manifest: {missing[:3]}")
    scores = np.array([s for _, s in score_rows])
    labels = np.array([labels_by_id[cid] for cid, _ in score_rows])
    roc = evaluation.roc_auc(scores, labels)
    if args.roc_out:
        evaluation.write_roc(args.roc_out, roc)
    if args.svg:
        plots.roc_svg(roc, args.svg)
    payload = ("\n".join(f"{f!r},{t!r}" for f, t in zip(roc.fpr, roc.tpr))
               + f"\nauc,{roc.auc:.6f}\n").encode()
    digest = store.put("roc", payload, {"auc": f"{roc.auc:.6f}"})
    _record(store, "eval-auc", {"scores": args.scores}, [args.scores], [digest])
    print(f"auc={roc.auc:.4f}")


def cmd_tsne(args, config):
    store = _store(args)
    emb = classifier_head.read_embeddings(args.embeddings)
    cfg = analysis.TsneConfig(
        perplexity=_resolve(args, config, "tsne", "perplexity", 30.0),
        iterations=int(_resolve(args, config, "tsne", "iterations", 1000, int)),
        learning_rate=_resolve(args, config, "tsne", "learning-rate", 200.0),
        seed=args.seed,
    )
    coords, kl_trace = analysis.tsne(emb.vectors, cfg)
    with open(str(args.out), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "x", "y"])
        for cid, (x, y) in zip(emb.clip_ids, coords):
            writer.writerow([cid, repr(float(x)), repr(float(y))])
    if args.svg:
        plots.tsne_svg(coords, emb.labels, args.svg)
    digest = store.put("coords", Path(args.out).read_bytes(),
                       {"stage": "tsne", "kl": f"{kl_trace[-1]:.6f}"})
    _record(store, "tsne", {"perplexity": cfg.perplexity, "seed": args.seed},
            [args.embeddings], [digest], seed=args.seed)
    print(f"tsne points={coords.shape[0]} kl={kl_trace[-1]:.4f} out={args.out}")


def cmd_attn_distance(args, config):
    store = _store(args)
    rows = []
    for layer_idx, path in enumerate(args.attention):
        payload = Path(path).read_bytes()
        meta_path = Path(str(path) + ".meta")
        if not meta_path.exists():
            raise InputError(f"missing sidecar {meta_path}")
        meta = {}
        for line in meta_path.read_text().splitlines():
            if line.strip():
                k, _, v = line.partition("=")
                meta[k] = v
        attn = analysis.attention_from_bytes(payload, meta)
        label = attn.label or str(layer_idx)
        for head_idx, dist in enumerate(analysis.mean_attention_distance(attn)):
            rows.append((label, head_idx, float(dist)))
    with open(str(args.out), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "head", "mean_distance_px"])
        for layer, head, dist in rows:
            writer.writerow([layer, head, repr(dist)])
    if args.svg:
        plots.attention_distance_svg(rows, args.svg)
    digest = store.put("attention", Path(args.out).read_bytes(),
                       {"stage": "attn-distance"})
    _record(store, "attn-distance", {}, list(args.attention), [digest])
    print(f"attn-distance heads={len(rows)} out={args.out}")


def cmd_runs(args, config):
    store = _store(args)
    if args.runs_action != "list":
        raise UsageError(f"unknown runs action {args.runs_action!r}")
    rows = store.list_runs()
    for row in rows:
        print(f"{row[0]} {row[1]} {row[2]}")
    print(f"runs total={len(rows)}")


# ------------------------------------------------------------------ parser

def build_parser():
    parser = _Parser(prog="soundfault",
                     description="Acoustic machine-fault detection pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        p.add_argument("--store", default="store", help="artifact store root")
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--strict-paper", action="store_true",
                       help="disable deviations-by-default (standardization, "
                            "stratified split)")
        return p

    p = add("preprocess", cmd_preprocess, help="WAV -> log-mel spectrograms")
    p.add_argument("--manifest", required=True)
    p.add_argument("--profile", choices=sorted(dsp.PROFILES), required=True)
    p.add_argument("--normalize", choices=["minmax", "zscore"], default=None)
    p.add_argument("--index-out", default=None)
    p.add_argument("--pooled-out", default=None,
                   help="also write mean+std pooled embeddings CSV")

    p = add("split", cmd_split, help="train/validation/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=["supervised", "unsupervised"],
                   default="supervised")
    p.add_argument("--uniform", action="store_true",
                   help="disable stratification")
    p.add_argument("--out", required=True)

    p = add("train-ae", cmd_train_ae, help="train the autoencoder")
    p.add_argument("--index", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--context", type=int, default=None)

    p = add("score-ae", cmd_score_ae, help="score clips by reconstruction error")
    p.add_argument("--model", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--subset", default="test")
    p.add_argument("--context", type=int, default=None)
    p.add_argument("--out", required=True)

    p = add("train-head", cmd_train_head, help="train the supervised head")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--standardize", action="store_true")

    p = add("score-head", cmd_score_head, help="score embeddings with the head")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)

    p = add("lof-fit", cmd_lof_fit, help="fit LOF on training embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--p", type=float, default=None)

    p = add("lof-score", cmd_lof_score, help="LOF scores + contamination vote")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--contamination", default=None,
                   help="comma-separated levels, default 0.1,0.2,0.3,0.4")
    p.add_argument("--out", required=True)

    p = add("eval-auc", cmd_eval_auc, help="ROC/AUC from a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--roc-out", default=None)
    p.add_argument("--svg", default=None)

    p = add("tsne", cmd_tsne, help="2-D embedding projection")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--perplexity", type=float, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None)

    p = add("attn-distance", cmd_attn_distance,
            help="per-head mean attention distance")
    p.add_argument("--attention", nargs="+", required=True,
                   help="attention container files (one per layer)")
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None)

    p = add("runs", cmd_runs, help="inspect the run ledger")
    p.add_argument("runs_action", choices=["list"])
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config(args.config)
        args.func(args, config)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return 3
    except (InputError, SoundFaultError, OSError) as exc:
        print(f"error: input: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
