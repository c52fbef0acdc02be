"""Deterministic session replay comparing feedback strategies.

A session log is the per-judgment behavior bank of one user on one task:
paragraph views with timing, clicks, annotations, a gold satisfaction label
per judgment, task-level human labels (ranking quality 1-4, satisfied 0/1)
and the number of judgments the user read before stopping.  Replays pick the
judgment order themselves (fixed relevance order, or re-ranked after click /
EEG feedback) and reuse the logged behavior for whichever judgment is shown,
so different orders stay comparable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError
from .features import (DEFAULT_BANDS, DEFAULT_STATS, MODE_RESOLUTION_AWARE,
                       extract_features)
from .model import ParagraphPredictor, VotingConfig, judge_satisfaction
from .rerank import TaskLabels, apply_feedback, new_session, rank_remaining, show
from .util import atomic_write_text

STRATEGY_NONE = "none"
STRATEGY_CLICK = "click"
STRATEGY_EEG = "eeg"


# ---------------------------------------------------------------------------
# Session events and logs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ViewEvent:
    judgment: str | int
    paragraph: str | int
    start_s: float
    end_s: float


@dataclass(frozen=True)
class ClickEvent:
    judgment: str | int
    paragraph: str | int
    t_s: float


@dataclass(frozen=True)
class AnnotateEvent:
    judgment: str | int
    paragraph: str | int
    annotation: str


@dataclass(frozen=True)
class JudgeEvent:
    judgment: str | int
    satisfied: bool


@dataclass(frozen=True)
class TaskLabelEvent:
    ranking_quality: int
    satisfied: int
    judgments_read: int


@dataclass
class SessionLog:
    user: str | int
    task: str | int
    events: list
    arm: str | None = None

    def __post_init__(self):
        times = [e.start_s for e in self.events if isinstance(e, ViewEvent)]
        if any(b < a for a, b in zip(times, times[1:])):
            raise DataError(f"view events out of time order for {self.user}/{self.task}")
        viewed = {(e.judgment, e.paragraph) for e in self.events if isinstance(e, ViewEvent)}
        for e in self.events:
            if isinstance(e, AnnotateEvent) and (e.judgment, e.paragraph) not in viewed:
                raise DataError(
                    f"annotation for unviewed paragraph {e.judgment}/{e.paragraph}"
                )

    def viewed_paragraphs(self, judgment) -> list:
        seen, out = set(), []
        for e in self.events:
            if isinstance(e, ViewEvent) and e.judgment == judgment and e.paragraph not in seen:
                seen.add(e.paragraph)
                out.append(e.paragraph)
        return out

    def viewed_judgments(self) -> list:
        seen, out = set(), []
        for e in self.events:
            if isinstance(e, ViewEvent) and e.judgment not in seen:
                seen.add(e.judgment)
                out.append(e.judgment)
        return out

    def clicked_paragraphs(self, judgment) -> set:
        return {e.paragraph for e in self.events
                if isinstance(e, ClickEvent) and e.judgment == judgment}

    def annotations(self) -> list[AnnotateEvent]:
        return [e for e in self.events if isinstance(e, AnnotateEvent)]

    def gold_satisfaction(self) -> dict:
        return {e.judgment: e.satisfied for e in self.events if isinstance(e, JudgeEvent)}

    def task_label(self) -> TaskLabelEvent | None:
        for e in self.events:
            if isinstance(e, TaskLabelEvent):
                return e
        return None

    def judgments_read(self) -> int:
        label = self.task_label()
        if label is not None:
            return label.judgments_read
        return len(self.viewed_judgments())


# ---------------------------------------------------------------------------
# Feedback rules
# ---------------------------------------------------------------------------

def click_feedback(log: SessionLog, judgment, threshold: int) -> bool:
    """Satisfied iff at least ``threshold`` distinct paragraphs were clicked."""
    if judgment not in set(log.viewed_judgments()):
        raise DataError(f"judgment {judgment!r} does not appear in the session log")
    return len(log.clicked_paragraphs(judgment)) >= threshold


def eeg_feedback(log: SessionLog, judgment, predictor: ParagraphPredictor,
                 voting: VotingConfig, segments: dict,
                 stat_config=DEFAULT_STATS, bands=DEFAULT_BANDS,
                 band_mode: str = MODE_RESOLUTION_AWARE) -> bool:
    """Predict each viewed paragraph from its EEG segment, then vote.

    ``segments`` maps (user, task, judgment, paragraph) to an EegSegment.
    """
    paragraphs = log.viewed_paragraphs(judgment)
    if not paragraphs:
        raise DataError(f"judgment {judgment!r} does not appear in the session log")
    labels = []
    for paragraph in paragraphs:
        key = (log.user, log.task, judgment, paragraph)
        segment = segments.get(key)
        if segment is None:
            raise DataError(f"no EEG segment for paragraph {paragraph!r} "
                            f"of judgment {judgment!r}")
        labels.append(predictor.predict(extract_features(segment, stat_config,
                                                         bands, band_mode)))
    return judge_satisfaction(labels, voting)


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoFeedbackStrategy:
    """Fixed relevance-descending order; produces no feedback predictions."""

    kind: str = STRATEGY_NONE
    threshold = None

    @property
    def label(self) -> str:
        return STRATEGY_NONE


@dataclass(frozen=True)
class ClickStrategy:
    threshold: int = 2
    kind: str = STRATEGY_CLICK

    @property
    def label(self) -> str:
        return f"{STRATEGY_CLICK}@{self.threshold}"

    def feedback(self, log: SessionLog, judgment, segments) -> bool:
        return click_feedback(log, judgment, self.threshold)


@dataclass(frozen=True)
class EegStrategy:
    predictor: ParagraphPredictor
    voting: VotingConfig = VotingConfig()
    stat_config: object = DEFAULT_STATS
    bands: object = DEFAULT_BANDS
    band_mode: str = MODE_RESOLUTION_AWARE
    kind: str = STRATEGY_EEG

    @property
    def threshold(self) -> int:
        return self.voting.threshold

    @property
    def label(self) -> str:
        return f"{STRATEGY_EEG}@{self.voting.threshold}"

    def feedback(self, log: SessionLog, judgment, segments) -> bool:
        if segments is None:
            raise DataError("the EEG strategy needs a segment store")
        return eeg_feedback(log, judgment, self.predictor, self.voting, segments,
                            self.stat_config, self.bands, self.band_mode)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceStep:
    step: int
    judgment: str | int
    feedback: bool | None
    profile: dict


def simulate_session(log: SessionLog, strategy, labels: TaskLabels,
                     segments: dict | None = None) -> list[TraceStep]:
    """Replay one session under a strategy; fully deterministic.

    The number of judgments shown follows the log's stop decision.  The
    no-feedback strategy shows the fixed grade-descending order; feedback
    strategies re-rank the remaining pool after every judgment.
    """
    pool = labels.judgment_ids()
    known = set(pool)
    logged = set(log.viewed_judgments()) | set(log.gold_satisfaction())
    stray = logged - known
    if stray:
        raise DataError(f"session log mentions judgments missing from task labels: "
                        f"{sorted(map(str, stray))}")
    steps_to_show = min(log.judgments_read(), len(pool))

    if isinstance(strategy, NoFeedbackStrategy):
        jmap = labels.judgment_map()
        order = sorted(pool, key=lambda jid: (-jmap[jid].grade, jid))
        profile = labels.profile.as_dict()
        return [TraceStep(i, jid, None, profile)
                for i, jid in enumerate(order[:steps_to_show])]

    state = new_session(labels)
    steps = []
    for i in range(steps_to_show):
        head = rank_remaining(state, labels)[0]
        state = show(state, head)
        fb = strategy.feedback(log, head, segments)
        state = apply_feedback(state, labels, head, fb)
        steps.append(TraceStep(i, head, bool(fb), state.profile.as_dict()))
    return steps


def evaluate_feedback(predictions, gold):
    """Accuracy and binary F1 with satisfied as the positive class."""
    predictions = [bool(p) for p in predictions]
    gold = [bool(g) for g in gold]
    if not predictions or len(predictions) != len(gold):
        raise DataError(
            f"need aligned nonempty prediction/gold lists, got {len(predictions)}/{len(gold)}"
        )
    correct = sum(p == g for p, g in zip(predictions, gold))
    tp = sum(p and g for p, g in zip(predictions, gold))
    fp = sum(p and not g for p, g in zip(predictions, gold))
    fn = sum(g and not p for p, g in zip(predictions, gold))
    accuracy = correct / len(gold)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return accuracy, f1


# ---------------------------------------------------------------------------
# Strategy comparison report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StrategyMetrics:
    strategy: str
    threshold: int | None
    accuracy: float | None
    f1: float | None
    mean_ranking_quality: float | None
    satisfied_rate: float | None
    n_sessions: int
    n_predictions: int


@dataclass
class MetricsReport:
    rows: list[StrategyMetrics] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {"version": 1, "rows": [vars(r) for r in self.rows]}

    def render_table(self) -> str:
        header = ("strategy", "threshold", "accuracy", "f1",
                  "ranking_quality", "satisfied")
        body = []
        for r in self.rows:
            body.append((
                r.strategy,
                "-" if r.threshold is None else str(r.threshold),
                "-" if r.accuracy is None else f"{100 * r.accuracy:.1f}%",
                "-" if r.f1 is None else f"{r.f1:.3f}",
                "-" if r.mean_ranking_quality is None else f"{r.mean_ranking_quality:.2f}",
                "-" if r.satisfied_rate is None else f"{100 * r.satisfied_rate:.0f}%",
            ))
        widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h)
                  for i, h in enumerate(header)]
        def fmt(row):
            return "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
        lines = [fmt(header), fmt(tuple("-" * w for w in widths))]
        lines.extend(fmt(row) for row in body)
        return "\n".join(lines) + "\n"


def _human_label_aggregates(logs: list[SessionLog], kind: str) -> tuple:
    """Mean ranking quality and satisfied rate from logs matching the arm.

    When no log carries an arm tag, all logs aggregate into every row.
    """
    arms_present = any(log.arm for log in logs)
    if arms_present:
        pool = [log for log in logs if log.arm == kind]
    else:
        pool = logs
    labels = [log.task_label() for log in pool]
    labels = [l for l in labels if l is not None]
    if not labels:
        return None, None
    quality = sum(l.ranking_quality for l in labels) / len(labels)
    satisfied = sum(1 for l in labels if l.satisfied) / len(labels)
    return quality, satisfied


def compare_strategies(logs: list[SessionLog], strategies, labels_by_task: dict,
                       segments: dict | None = None):
    """Run every strategy over every log; returns (MetricsReport, traces).

    Feedback accuracy/F1 micro-average over all simulated judgments against
    the logs' gold satisfaction.  ``traces`` maps (user, task, strategy label)
    to the simulated step list.
    """
    if not logs:
        raise DataError("no session logs to compare on")
    report = MetricsReport()
    traces: dict = {}
    for strategy in strategies:
        predictions, gold = [], []
        n_sessions = 0
        for log in logs:
            labels = labels_by_task.get(log.task)
            if labels is None:
                raise DataError(f"no task labels for task {log.task!r}")
            steps = simulate_session(log, strategy, labels, segments)
            traces[(log.user, log.task, strategy.label)] = steps
            n_sessions += 1
            gold_map = log.gold_satisfaction()
            for step in steps:
                if step.feedback is None:
                    continue
                if step.judgment not in gold_map:
                    raise DataError(f"no gold satisfaction for judgment "
                                    f"{step.judgment!r} in {log.user}/{log.task}")
                predictions.append(step.feedback)
                gold.append(gold_map[step.judgment])
        if predictions:
            accuracy, f1 = evaluate_feedback(predictions, gold)
        else:
            accuracy, f1 = None, None
        quality, satisfied = _human_label_aggregates(logs, strategy.kind)
        report.rows.append(StrategyMetrics(
            strategy=strategy.kind, threshold=strategy.threshold,
            accuracy=accuracy, f1=f1, mean_ranking_quality=quality,
            satisfied_rate=satisfied, n_sessions=n_sessions,
            n_predictions=len(predictions),
        ))
    return report, traces


# ---------------------------------------------------------------------------
# Files: session logs (JSONL), traces (JSONL), reports (JSON + text table)
# ---------------------------------------------------------------------------

def _event_to_record(event) -> dict:
    if isinstance(event, ViewEvent):
        return {"type": "view", "judgment": event.judgment, "paragraph": event.paragraph,
                "start_s": event.start_s, "end_s": event.end_s}
    if isinstance(event, ClickEvent):
        return {"type": "click", "judgment": event.judgment, "paragraph": event.paragraph,
                "t_s": event.t_s}
    if isinstance(event, AnnotateEvent):
        return {"type": "annotate", "judgment": event.judgment,
                "paragraph": event.paragraph, "annotation": event.annotation}
    if isinstance(event, JudgeEvent):
        return {"type": "judge", "judgment": event.judgment, "satisfied": event.satisfied}
    if isinstance(event, TaskLabelEvent):
        return {"type": "task_label", "ranking_quality": event.ranking_quality,
                "satisfied": event.satisfied, "judgments_read": event.judgments_read}
    raise DataError(f"unknown event type {type(event).__name__}")


def _record_to_event(record: dict, where: str):
    kind = record.get("type")
    try:
        if kind == "view":
            return ViewEvent(record["judgment"], record["paragraph"],
                             float(record["start_s"]), float(record["end_s"]))
        if kind == "click":
            return ClickEvent(record["judgment"], record["paragraph"], float(record["t_s"]))
        if kind == "annotate":
            return AnnotateEvent(record["judgment"], record["paragraph"],
                                 record["annotation"])
        if kind == "judge":
            return JudgeEvent(record["judgment"], bool(record["satisfied"]))
        if kind == "task_label":
            return TaskLabelEvent(int(record["ranking_quality"]), int(record["satisfied"]),
                                  int(record["judgments_read"]))
    except KeyError as exc:
        raise DataError(f"{where}: event missing field {exc}") from exc
    raise DataError(f"{where}: unknown event type {kind!r}")


def save_session_log(path: str | Path, log: SessionLog) -> Path:
    head = {"type": "session", "user": log.user, "task": log.task}
    if log.arm is not None:
        head["arm"] = log.arm
    lines = [json.dumps(head, sort_keys=True, ensure_ascii=False)]
    lines.extend(json.dumps(_event_to_record(e), sort_keys=True, ensure_ascii=False)
                 for e in log.events)
    return atomic_write_text(path, "\n".join(lines) + "\n")


def load_session_log(path: str | Path) -> SessionLog:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    records = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    if not records or records[0].get("type") != "session":
        raise DataError(f"{path}: first line must be the session header")
    head = records[0]
    events = [_record_to_event(r, f"{path}") for r in records[1:]]
    return SessionLog(head["user"], head["task"], events, head.get("arm"))


def save_traces(path: str | Path, traces: dict) -> Path:
    lines = []
    for (user, task, label), steps in sorted(traces.items(), key=lambda kv: tuple(map(str, kv[0]))):
        for step in steps:
            lines.append(json.dumps({
                "user": user, "task": task, "strategy": label, "step": step.step,
                "judgment": step.judgment, "feedback": step.feedback,
                "profile": step.profile,
            }, sort_keys=True, ensure_ascii=False))
    return atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def load_traces(path: str | Path) -> dict:
    traces: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            r = json.loads(line)
            key = (r["user"], r["task"], r["strategy"])
            traces.setdefault(key, []).append(
                TraceStep(int(r["step"]), r["judgment"], r["feedback"], r["profile"]))
        except (json.JSONDecodeError, KeyError) as exc:
            raise DataError(f"{path}:{lineno}: bad trace record: {exc}") from exc
    for steps in traces.values():
        steps.sort(key=lambda s: s.step)
    return traces


def report_from_traces(traces: dict, logs: list[SessionLog], strategy_meta: list[tuple]):
    """Rebuild a MetricsReport from stored traces.

    ``strategy_meta`` lists (kind, threshold, label) in presentation order;
    aggregation matches :func:`compare_strategies` exactly.
    """
    logs_by_key = {(log.user, log.task): log for log in logs}
    report = MetricsReport()
    for kind, threshold, label in strategy_meta:
        predictions, gold = [], []
        n_sessions = 0
        for (user, task, trace_label), steps in traces.items():
            if trace_label != label:
                continue
            log = logs_by_key.get((user, task))
            if log is None:
                raise DataError(f"trace references unknown session {user}/{task}")
            n_sessions += 1
            gold_map = log.gold_satisfaction()
            for step in steps:
                if step.feedback is None:
                    continue
                predictions.append(step.feedback)
                gold.append(gold_map[step.judgment])
        accuracy, f1 = (evaluate_feedback(predictions, gold)
                        if predictions else (None, None))
        quality, satisfied = _human_label_aggregates(logs, kind)
        report.rows.append(StrategyMetrics(kind, threshold, accuracy, f1,
                                           quality, satisfied, n_sessions,
                                           len(predictions)))
    return report


def save_report(json_path: str | Path, text_path: str | Path, report: MetricsReport):
    atomic_write_text(json_path, json.dumps(report.to_json_dict(), sort_keys=True,
                                            indent=2) + "\n")
    atomic_write_text(text_path, report.render_table())
