"""Intent-weighted candidate scoring and feedback-driven re-ranking.

Each task carries a set of intents with weights in [0, 1] and, per candidate
judgment, a relevance value for every intent plus an overall relevance grade
r in 1..4.  A judgment's ranking score is the dot product of intent weights
and its relevance row.  Unsatisfying feedback halves the weights of the
intents blamed for the shown judgment; satisfied feedback leaves the profile
untouched.  Ranking state is a value: transitions return new states.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError
from .util import atomic_write_text

#: Blame the intents with the largest weight * judgment-relevance product.
ATTRIBUTION_PRODUCT = "product"
#: Blame the intents with the largest profile weight, ignoring the judgment.
ATTRIBUTION_PROFILE = "profile"

ATTRIBUTION_MODES = (ATTRIBUTION_PRODUCT, ATTRIBUTION_PROFILE)


@dataclass(frozen=True)
class IntentProfile:
    intent_ids: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.intent_ids) == 0:
            raise DataError("a profile needs at least one intent")
        if weights.shape != (len(self.intent_ids),):
            raise DataError(f"{weights.shape} weights for {len(self.intent_ids)} intents")
        if np.any((weights < 0) | (weights > 1)):
            raise DataError(f"intent weights must lie in [0, 1]: {weights}")
        weights = weights.copy()
        weights.flags.writeable = False
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "intent_ids", tuple(self.intent_ids))

    def as_dict(self) -> dict:
        return {i: float(w) for i, w in zip(self.intent_ids, self.weights)}


@dataclass(frozen=True)
class JudgmentLabel:
    judgment: str | int
    intent_relevance: np.ndarray  # one value in [0, 1] per intent
    grade: int                    # overall relevance r in 1..4

    def __post_init__(self):
        rel = np.asarray(self.intent_relevance, dtype=np.float64)
        if np.any((rel < 0) | (rel > 1)):
            raise DataError(f"intent relevance must lie in [0, 1]: {rel}")
        if self.grade not in (1, 2, 3, 4):
            raise DataError(f"relevance grade must be 1..4, got {self.grade}")
        rel = rel.copy()
        rel.flags.writeable = False
        object.__setattr__(self, "intent_relevance", rel)


@dataclass(frozen=True)
class TaskLabels:
    """Intents and candidate judgments of one task."""

    task: str | int
    profile: IntentProfile
    judgments: tuple[JudgmentLabel, ...]

    def __post_init__(self):
        n = len(self.profile.intent_ids)
        ids = [j.judgment for j in self.judgments]
        if len(set(ids)) != len(ids):
            raise DataError(f"duplicate judgment ids in task {self.task!r}")
        for j in self.judgments:
            if j.intent_relevance.shape != (n,):
                raise DataError(
                    f"judgment {j.judgment!r} has {j.intent_relevance.shape[0]} "
                    f"relevance values for {n} intents"
                )
        object.__setattr__(self, "judgments", tuple(self.judgments))

    def judgment_map(self) -> dict:
        return {j.judgment: j for j in self.judgments}

    def judgment_ids(self) -> tuple:
        return tuple(j.judgment for j in self.judgments)


def ranking_score(profile: IntentProfile, relevance_row: np.ndarray) -> float:
    """Sum over intents of weight * relevance."""
    row = np.asarray(relevance_row, dtype=np.float64)
    if row.shape != profile.weights.shape:
        raise DataError(f"relevance row {row.shape} does not match {profile.weights.shape}")
    return float(profile.weights @ row)


@dataclass(frozen=True)
class FeedbackEvent:
    judgment: str | int
    satisfied: bool
    halved_intents: tuple[str, ...]


@dataclass(frozen=True)
class RankingState:
    profile: IntentProfile
    shown: tuple
    remaining: frozenset
    history: tuple[FeedbackEvent, ...] = ()


def new_session(labels: TaskLabels) -> RankingState:
    return RankingState(labels.profile, (), frozenset(labels.judgment_ids()))


def rank_remaining(state: RankingState, labels: TaskLabels) -> list:
    """Remaining judgments by descending score; ties by higher grade, lower id."""
    if not state.remaining:
        raise DataError("no remaining judgments to rank")
    jmap = labels.judgment_map()
    rows = []
    for jid in state.remaining:
        label = jmap.get(jid)
        if label is None:
            raise DataError(f"judgment {jid!r} missing from task labels")
        rows.append((-ranking_score(state.profile, label.intent_relevance),
                     -label.grade, jid))
    rows.sort()
    return [jid for _, _, jid in rows]


def show(state: RankingState, judgment) -> RankingState:
    """Move a judgment from the remaining pool to the shown list."""
    if judgment not in state.remaining:
        raise DataError(f"judgment {judgment!r} is not in the remaining pool")
    return replace(state, shown=state.shown + (judgment,),
                   remaining=state.remaining - {judgment})


def apply_feedback(state: RankingState, labels: TaskLabels, judgment,
                   satisfied: bool, top_t: int = 1,
                   attribution: str = ATTRIBUTION_PRODUCT) -> RankingState:
    """Update the intent profile from feedback on a shown judgment.

    Satisfied feedback leaves all weights unchanged.  Unsatisfied feedback
    halves the weights of the top-t intents of the judgment, ranked by the
    chosen attribution (weight * relevance by default); ties go to the lower
    intent index.
    """
    if judgment not in state.shown:
        raise DataError(f"judgment {judgment!r} has not been shown")
    if attribution not in ATTRIBUTION_MODES:
        raise ConfigurationError(f"unknown attribution {attribution!r}")
    if top_t < 1:
        raise ConfigurationError("top_t must be >= 1")
    if satisfied:
        event = FeedbackEvent(judgment, True, ())
        return replace(state, history=state.history + (event,))

    label = labels.judgment_map().get(judgment)
    if label is None:
        raise DataError(f"judgment {judgment!r} missing from task labels")
    if attribution == ATTRIBUTION_PRODUCT:
        blame = state.profile.weights * label.intent_relevance
    else:
        blame = state.profile.weights
    # Largest blame first; ties resolved toward the lower intent index.
    order = np.lexsort((np.arange(blame.size), -blame))
    targets = order[: min(top_t, blame.size)]
    weights = state.profile.weights.copy()
    weights[targets] = weights[targets] / 2.0
    profile = IntentProfile(state.profile.intent_ids, weights)
    halved = tuple(state.profile.intent_ids[i] for i in sorted(targets))
    event = FeedbackEvent(judgment, False, halved)
    return replace(state, profile=profile, history=state.history + (event,))


def select_candidate_pool(labels: TaskLabels, pool_size: int = 7) -> list:
    """Candidate pool: each intent's best judgment, then top-graded fillers.

    For every intent the judgment maximizing that intent's relevance is
    included (ties to the lower judgment id), so each intent keeps at least
    one dedicated candidate; remaining slots fill by descending grade.
    """
    judgments = labels.judgments
    if len(judgments) < pool_size:
        raise DataError(f"{len(judgments)} candidates cannot fill a pool of {pool_size}")
    picks: list = []
    for i in range(len(labels.profile.intent_ids)):
        best = min(judgments, key=lambda j: (-j.intent_relevance[i], j.judgment))
        if best.judgment not in picks:
            picks.append(best.judgment)
    picks = picks[:pool_size]
    for label in sorted(judgments, key=lambda j: (-j.grade, j.judgment)):
        if len(picks) >= pool_size:
            break
        if label.judgment not in picks:
            picks.append(label.judgment)
    return picks


# ---------------------------------------------------------------------------
# Task label files and ranking traces
# ---------------------------------------------------------------------------

def save_task_labels(path: str | Path, labels: TaskLabels) -> Path:
    payload = {
        "version": 1,
        "task": labels.task,
        "intents": [{"id": i, "weight": float(w)}
                    for i, w in zip(labels.profile.intent_ids, labels.profile.weights)],
        "judgments": [{"id": j.judgment,
                       "relevance": [float(v) for v in j.intent_relevance],
                       "r": j.grade} for j in labels.judgments],
    }
    return atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_task_labels(path: str | Path) -> TaskLabels:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read task labels {path}: {exc}") from exc
    try:
        profile = IntentProfile(tuple(i["id"] for i in payload["intents"]),
                                np.array([i["weight"] for i in payload["intents"]]))
        judgments = tuple(
            JudgmentLabel(j["id"], np.array(j["relevance"], dtype=np.float64), int(j["r"]))
            for j in payload["judgments"]
        )
        return TaskLabels(payload["task"], profile, judgments)
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed task labels in {path}: {exc}") from exc
