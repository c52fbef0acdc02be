"""Command-line entry points for reproducible pipeline runs.

Subcommands: synth, preprocess, extract, train, predict, rerank, simulate,
report.  All take a JSON config (``--config``); ``--seed``, ``--out`` and
``--mode`` override the corresponding config entries.  Exit codes: 0 success,
2 configuration error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import features as feats
from .errors import ConfigurationError, DataError, EegRankError
from .model import (ANNOTATION_TO_LABEL, LabeledExample, Origin, ParagraphPredictor,
                    RfeConfig, VotingConfig, dataset_matrix, load_model, rfe,
                    save_model, split_by_task, standardize, train_baselines)
from .preprocess import PreprocessConfig, has_artifact, preprocess
from .rerank import apply_feedback, load_task_labels, new_session, show
from .segments import load_segment, load_segment_extra_meta, save_segment
from .simulate import (ClickStrategy, EegStrategy, NoFeedbackStrategy,
                       evaluate_feedback, compare_strategies, load_session_log,
                       load_traces, report_from_traces, save_report, save_traces)
from .synth import SynthSpec, synth_sessions, write_dataset
from .util import atomic_write_text

CONFIG_VERSION = 1
_CONFIG_SECTIONS = ("version", "seed", "paths", "preprocess", "features", "rfe",
                    "voting", "strategies", "synth")


@dataclass
class RunConfig:
    seed: int
    data_dir: Path
    out_dir: Path
    preprocess: PreprocessConfig
    stats: feats.StatConfig
    band_mode: str
    rfe: RfeConfig
    voting: VotingConfig
    strategies: list[dict]
    synth: dict
    raw: dict


def _build_section(cls, payload: dict, name: str, tuple_fields=()):
    valid = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - valid
    if unknown:
        raise ConfigurationError(f"unknown keys in config section {name!r}: {sorted(unknown)}")
    payload = {k: tuple(v) if k in tuple_fields and v is not None else v
               for k, v in payload.items()}
    return cls(**payload)


def load_config(path: str | Path, *, seed=None, out=None, mode=None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if raw.get("version") != CONFIG_VERSION:
        raise ConfigurationError(f"config version must be {CONFIG_VERSION}, "
                                 f"got {raw.get('version')!r}")
    unknown = set(raw) - set(_CONFIG_SECTIONS)
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")

    base = path.parent
    paths = raw.get("paths", {})
    data_dir = base / paths.get("data_dir", "data")
    out_dir = base / (out if out is not None else paths.get("out_dir", "out"))

    feature_cfg = dict(raw.get("features", {}))
    band_mode = feature_cfg.pop("band_mode", feats.MODE_RESOLUTION_AWARE)
    if mode is not None:
        band_mode = mode
    if band_mode not in feats.BAND_MODES:
        raise ConfigurationError(f"band mode must be one of {feats.BAND_MODES}, "
                                 f"got {band_mode!r}")

    pre = dict(raw.get("preprocess", {}))
    if "baseline_window" in pre and pre["baseline_window"] is not None:
        pre["baseline_window"] = tuple(pre["baseline_window"])

    return RunConfig(
        seed=int(seed if seed is not None else raw.get("seed", 0)),
        data_dir=data_dir,
        out_dir=out_dir,
        preprocess=_build_section(PreprocessConfig, pre, "preprocess",
                                  tuple_fields=("reference_channels",)),
        stats=_build_section(feats.StatConfig, feature_cfg, "features",
                             tuple_fields=("window_lengths", "order_ranks")),
        band_mode=band_mode,
        rfe=_build_section(RfeConfig, raw.get("rfe", {}), "rfe"),
        voting=_build_section(VotingConfig, raw.get("voting", {}), "voting"),
        strategies=raw.get("strategies",
                           [{"kind": "none"}, {"kind": "click", "threshold": 2},
                            {"kind": "eeg"}]),
        synth=raw.get("synth", {}),
        raw=raw,
    )


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise DataError(f"missing {what}: expected {path}")
    return path


def _segment_key(segment) -> str:
    m = segment.meta
    return f"{m.user}__{m.query}__{m.judgment}__{m.paragraph}"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(cfg: RunConfig, args) -> int:
    spec = _build_section(SynthSpec,
                          {k: tuple(v) if isinstance(v, list) else v
                           for k, v in cfg.synth.items()}, "synth")
    dataset = synth_sessions(spec, cfg.seed)
    write_dataset(dataset, cfg.data_dir)
    print(f"wrote {len(dataset.segments)} segments, {len(dataset.logs)} sessions, "
          f"{len(dataset.labels)} task label files to {cfg.data_dir}")
    return 0


def cmd_preprocess(cfg: RunConfig, args) -> int:
    src = cfg.data_dir / "segments"
    if not src.is_dir() or not any(src.iterdir()):
        print(f"warning: no input segments under {src}", file=sys.stderr)
        return 0
    dest = cfg.out_dir / "preprocessed"
    failures = 0
    written = 0
    for directory in sorted(p for p in src.iterdir() if p.is_dir()):
        try:
            segment = load_segment(directory)
            extra = load_segment_extra_meta(directory)
            if extra.get("preprocessed") and not args.force_reprocess:
                raise DataError(
                    f"{directory} is already preprocessed (pass --force-reprocess to redo)")
            out = preprocess(segment, cfg.preprocess)
            save_segment(out, dest / directory.name, extra_meta={"preprocessed": True})
            written += 1
        except EegRankError as exc:
            print(f"error: {directory.name}: {exc}", file=sys.stderr)
            failures += 1
    print(f"preprocessed {written} segments into {dest}")
    return 3 if failures else 0


def cmd_extract(cfg: RunConfig, args) -> int:
    src = _require(cfg.out_dir / "preprocessed", "preprocessed segments")
    rows = []
    channel_labels = None
    skipped = 0
    for directory in sorted(p for p in src.iterdir() if p.is_dir()):
        segment = load_segment(directory)
        if channel_labels is None:
            channel_labels = segment.channel_labels
        elif segment.channel_labels != channel_labels:
            raise DataError(
                f"{directory.name}: channel labels {segment.channel_labels} differ "
                f"from {channel_labels}; feature columns would not align")
        if segment.is_degenerate or has_artifact(segment, cfg.preprocess.artifact_threshold_v):
            print(f"warning: skipping {directory.name} "
                  f"({'degenerate' if segment.is_degenerate else 'artifact amplitude'})",
                  file=sys.stderr)
            skipped += 1
            continue
        values = feats.extract_features(segment, cfg.stats, feats.DEFAULT_BANDS,
                                        cfg.band_mode)
        rows.append((_segment_key(segment), values))
    if channel_labels is None:
        raise DataError(f"no segment directories under {src}")
    feats.write_feature_csv(cfg.out_dir / "features.csv", rows)
    feats.write_feature_descriptor(cfg.out_dir / "feature_columns.json", cfg.stats,
                                   feats.DEFAULT_BANDS, channel_labels, cfg.band_mode)
    print(f"extracted {len(rows)} feature rows "
          f"({feats.feature_length(cfg.stats, len(channel_labels))} columns, "
          f"{skipped} skipped) into {cfg.out_dir}")
    return 0


def _load_examples(cfg: RunConfig):
    feature_path = _require(cfg.out_dir / "features.csv", "feature matrix")
    label_path = _require(cfg.data_dir / "labels" / "paragraphs.jsonl", "paragraph labels")
    by_id = dict(feats.read_feature_csv(feature_path))
    examples = []
    n_unlabeled = 0
    for lineno, line in enumerate(label_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        record = json.loads(line)
        label = ANNOTATION_TO_LABEL.get(record["annotation"], None)
        if label is None:
            continue  # "hard_to_say" never enters a dataset
        key = "__".join(str(record[k]) for k in ("user", "task", "judgment", "paragraph"))
        values = by_id.get(key)
        if values is None:
            n_unlabeled += 1
            continue
        examples.append(LabeledExample(values, label,
                                       Origin(str(record["user"]), str(record["task"]),
                                              str(record["judgment"]),
                                              str(record["paragraph"]))))
    if n_unlabeled:
        print(f"warning: {n_unlabeled} labels without feature rows "
              "(artifact-skipped segments?)", file=sys.stderr)
    if not examples:
        raise DataError("no labeled examples after joining features with labels")
    return examples


def cmd_train(cfg: RunConfig, args) -> int:
    examples = _load_examples(cfg)
    train_set, test_set = split_by_task(examples)
    if not train_set:
        raise DataError("empty training split")
    X_train, y_train = dataset_matrix(train_set)
    X_std, scaler = standardize(X_train)
    result = rfe(X_std, y_train, cfg.rfe)
    predictor = ParagraphPredictor(result.model, scaler, {
        "features": {"window_lengths": list(cfg.stats.window_lengths),
                     "order_ranks": list(cfg.stats.order_ranks),
                     "band_mode": cfg.band_mode},
        "rfe": dataclasses.asdict(cfg.rfe),
        "voting": {"threshold": cfg.voting.threshold},
        "seed": cfg.seed,
    })
    save_model(cfg.out_dir / "model.json", predictor)

    metrics = {"n_train": len(train_set), "n_test": len(test_set),
               "surviving_dims": int(result.model.feature_mask.size),
               "rfe_rounds": len(result.round_sizes) - 1}
    if test_set:
        X_test, y_test = dataset_matrix(test_set)
        pred = predictor.predict_many(X_test)
        accuracy, f1 = evaluate_feedback(pred.tolist(), y_test.tolist())
        metrics["svm_rfe"] = {"accuracy": accuracy, "f1": f1}
        baselines = train_baselines(scaler.transform(X_train), y_train, seed=cfg.seed)
        table = {}
        for name, base_model in baselines.items():
            bp = base_model.predict(scaler.transform(X_test))
            b_acc, b_f1 = evaluate_feedback(bp.tolist(), y_test.tolist())
            table[name] = {"accuracy": b_acc, "f1": b_f1}
            if base_model.chosen_depth is not None:
                table[name]["depth"] = base_model.chosen_depth
        metrics["baselines"] = table
    atomic_write_text(cfg.out_dir / "train_metrics.json",
                      json.dumps(metrics, sort_keys=True, indent=2) + "\n")
    print(f"trained model ({metrics['surviving_dims']} surviving dims) "
          f"-> {cfg.out_dir / 'model.json'}")
    if "svm_rfe" in metrics:
        print(f"held-out paragraph accuracy {metrics['svm_rfe']['accuracy']:.3f}, "
              f"F1 {metrics['svm_rfe']['f1']:.3f}")
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    predictor = load_model(_require(cfg.out_dir / "model.json", "trained model"))
    rows = feats.read_feature_csv(_require(cfg.out_dir / "features.csv", "feature matrix"))
    lines = []
    for segment_id, values in rows:
        if values.shape[0] != predictor.model.n_features:
            raise DataError(f"{segment_id}: {values.shape[0]} features do not match "
                            f"the model's {predictor.model.n_features}")
        satisfied = bool(predictor.predict(values))
        lines.append(json.dumps({"segment_id": segment_id, "satisfied": satisfied},
                                sort_keys=True))
    atomic_write_text(cfg.out_dir / "predictions.jsonl",
                      "\n".join(lines) + ("\n" if lines else ""))
    print(f"wrote {len(lines)} predictions to {cfg.out_dir / 'predictions.jsonl'}")
    return 0


def cmd_rerank(cfg: RunConfig, args) -> int:
    labels = load_task_labels(_require(Path(args.labels), "task label file"))
    feedback_path = _require(Path(args.feedback), "feedback file")
    state = new_session(labels)
    lines = []
    for lineno, line in enumerate(feedback_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        record = json.loads(line)
        try:
            judgment, satisfied = record["judgment"], bool(record["satisfied"])
        except KeyError as exc:
            raise DataError(f"{feedback_path}:{lineno}: missing field {exc}") from exc
        if judgment not in state.remaining:
            raise DataError(f"{feedback_path}:{lineno}: judgment {judgment!r} "
                            "is not available to show")
        state = apply_feedback(show(state, judgment), labels, judgment, satisfied)
        lines.append(json.dumps({
            "step": len(lines), "judgment": judgment, "feedback": satisfied,
            "profile": state.profile.as_dict(),
        }, sort_keys=True))
    atomic_write_text(cfg.out_dir / "rerank_trace.jsonl",
                      "\n".join(lines) + ("\n" if lines else ""))
    print(f"wrote {len(lines)} re-ranking steps to {cfg.out_dir / 'rerank_trace.jsonl'}")
    return 0


def _build_strategies(cfg: RunConfig):
    strategies = []
    for entry in cfg.strategies:
        kind = entry.get("kind")
        if kind == "none":
            strategies.append(NoFeedbackStrategy())
        elif kind == "click":
            strategies.append(ClickStrategy(int(entry.get("threshold", 2))))
        elif kind == "eeg":
            predictor = load_model(_require(cfg.out_dir / "model.json", "trained model"))
            voting = VotingConfig(int(entry.get("threshold", cfg.voting.threshold)))
            strategies.append(EegStrategy(predictor, voting, cfg.stats,
                                          feats.DEFAULT_BANDS, cfg.band_mode))
        else:
            raise ConfigurationError(f"unknown strategy kind {kind!r}")
    return strategies


def _load_sessions(cfg: RunConfig):
    session_dir = _require(cfg.data_dir / "sessions", "session logs")
    logs = [load_session_log(p) for p in sorted(session_dir.glob("*.jsonl"))]
    if not logs:
        raise DataError(f"no session logs under {session_dir}")
    labels = {}
    for path in sorted((cfg.data_dir / "labels" / "tasks").glob("*.json")):
        task_labels = load_task_labels(path)
        labels[task_labels.task] = task_labels
    if not labels:
        raise DataError(f"no task label files under {cfg.data_dir / 'labels' / 'tasks'}")
    return logs, labels


def _load_segment_store(cfg: RunConfig) -> dict:
    src = _require(cfg.out_dir / "preprocessed", "preprocessed segments")
    store = {}
    for directory in sorted(p for p in src.iterdir() if p.is_dir()):
        segment = load_segment(directory)
        m = segment.meta
        store[(m.user, m.query, m.judgment, m.paragraph)] = segment
    return store


def cmd_simulate(cfg: RunConfig, args) -> int:
    logs, labels = _load_sessions(cfg)
    strategies = _build_strategies(cfg)
    segments = None
    if any(isinstance(s, EegStrategy) for s in strategies):
        segments = _load_segment_store(cfg)
    report, traces = compare_strategies(logs, strategies, labels, segments)
    save_traces(cfg.out_dir / "traces.jsonl", traces)
    meta = [{"kind": s.kind, "threshold": s.threshold, "label": s.label}
            for s in strategies]
    atomic_write_text(cfg.out_dir / "strategies.json",
                      json.dumps(meta, sort_keys=True, indent=2) + "\n")
    print(f"simulated {len(logs)} sessions x {len(strategies)} strategies "
          f"-> {cfg.out_dir / 'traces.jsonl'}")
    return 0


def cmd_report(cfg: RunConfig, args) -> int:
    traces = load_traces(_require(cfg.out_dir / "traces.jsonl", "simulation traces"))
    meta_path = _require(cfg.out_dir / "strategies.json", "strategy listing")
    meta = [(m["kind"], m["threshold"], m["label"])
            for m in json.loads(meta_path.read_text(encoding="utf-8"))]
    logs, _ = _load_sessions(cfg)
    report = report_from_traces(traces, logs, meta)
    save_report(cfg.out_dir / "report.json", cfg.out_dir / "report.txt", report)
    print((cfg.out_dir / "report.txt").read_text(encoding="utf-8"), end="")
    print(f"report written to {cfg.out_dir / 'report.json'}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "extract": cmd_extract,
    "train": cmd_train,
    "predict": cmd_predict,
    "rerank": cmd_rerank,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eegrank",
                                     description="EEG reading-feedback pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--mode", choices=list(feats.BAND_MODES), default=None,
                       help="band-energy column mode")
        if name == "preprocess":
            p.add_argument("--force-reprocess", action="store_true",
                           help="allow running on already-preprocessed inputs")
        if name == "rerank":
            p.add_argument("--labels", required=True, help="task label JSON file")
            p.add_argument("--feedback", required=True,
                           help="JSONL of (judgment, satisfied) feedback records")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out, mode=args.mode)
        return _COMMANDS[args.command](cfg, args)
    except EegRankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # anything unexpected is an internal error
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
