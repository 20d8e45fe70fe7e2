"""Structured preference signals and the truthful oracle extractor.

A signal is the unit of linguistic evidence: (entity, signal_type, target,
stance) as produced by utterance analysis. Targets use external labels ("A"
for an issue, "A1" for option 1 of issue A); comparison targets hold exactly
two references of the same entity kind.

The oracle extractor is the offline stand-in for LLM extraction: it samples
signals directly from a party's true score table, so sampled frequencies match
the Luce-choice likelihoods the opponent model assigns to them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import SignalValidationError
from .scenario import Party, Scenario

ENTITY_ISSUE = "issue"
ENTITY_OPTION = "option"
TYPE_POINT = "point"
TYPE_COMPARISON = "comparison"
STANCE_PREFER = "prefer"
STANCE_OPPOSE = "oppose"

STRENGTH_FLOOR = 1e-6

# Sampling mixture of the oracle extractor, by signal kind.
DEFAULT_KIND_WEIGHTS: Mapping[str, float] = {
    "issue_prefer": 0.30,
    "option_prefer": 0.30,
    "issue_comparison": 0.15,
    "option_comparison": 0.15,
    "issue_oppose": 0.05,
    "option_oppose": 0.05,
}


@dataclass(frozen=True)
class Signal:
    """One structured preference observation about an agent."""

    agent: str
    entity: str
    signal_type: str
    targets: tuple[str, ...]
    stance: str

    def __post_init__(self):
        if self.entity not in (ENTITY_ISSUE, ENTITY_OPTION):
            raise SignalValidationError(f"bad entity {self.entity!r}")
        if self.signal_type not in (TYPE_POINT, TYPE_COMPARISON):
            raise SignalValidationError(f"bad signal_type {self.signal_type!r}")
        if self.stance not in (STANCE_PREFER, STANCE_OPPOSE):
            raise SignalValidationError(f"bad stance {self.stance!r}")
        expected = 1 if self.signal_type == TYPE_POINT else 2
        if len(self.targets) != expected:
            raise SignalValidationError(
                f"{self.signal_type} signal needs {expected} target(s), "
                f"got {len(self.targets)}"
            )

    def to_wire(self) -> dict:
        """Render the wire-format dict; comparison targets join as "A, B"."""
        return {
            "entity": self.entity,
            "signal_type": self.signal_type,
            "target": ", ".join(self.targets),
            "stance": self.stance,
        }

    @classmethod
    def from_wire(cls, agent: str, payload: Mapping) -> "Signal":
        try:
            entity = payload["entity"]
            signal_type = payload["signal_type"]
            target = payload["target"]
            stance = payload["stance"]
        except (KeyError, TypeError) as exc:
            raise SignalValidationError(f"signal payload missing field: {exc}")
        if not isinstance(target, str):
            raise SignalValidationError(f"target must be a string, got {target!r}")
        targets = tuple(t.strip() for t in target.split(",") if t.strip())
        return cls(
            agent=agent,
            entity=entity,
            signal_type=signal_type,
            targets=targets,
            stance=stance,
        )


@dataclass(frozen=True)
class Utterance:
    """A natural-language statement made by a party in some round."""

    round: int
    speaker: str
    text: str

    def __post_init__(self):
        if not self.speaker:
            raise ValueError("utterance needs a speaker")


def _resolve_target(label: str, scenario: Scenario) -> tuple[str, int | None]:
    """Resolve "A" -> ("A", None) or "A1" -> ("A", 0); raise if unknown."""
    for issue in scenario.issues:
        if label == issue.id:
            return issue.id, None
        if label.startswith(issue.id) and label[len(issue.id):].isdigit():
            index = int(label[len(issue.id):]) - 1
            if 0 <= index < issue.n_options:
                return issue.id, index
            raise SignalValidationError(
                f"option {label!r} out of range for issue {issue.id}"
            )
    raise SignalValidationError(f"unknown target {label!r}")


def validate_signal(signal: Signal, scenario: Scenario) -> str | None:
    """Check a signal against a scenario; return None if valid, else a reason.

    Never raises: callers log the reason and drop the signal.
    """
    try:
        resolved = [_resolve_target(t, scenario) for t in signal.targets]
    except SignalValidationError as exc:
        return str(exc)
    for issue_id, option_index in resolved:
        if signal.entity == ENTITY_ISSUE and option_index is not None:
            return f"issue signal targets option {issue_id}{option_index + 1}"
        if signal.entity == ENTITY_OPTION and option_index is None:
            return f"option signal targets bare issue {issue_id}"
    if signal.signal_type == TYPE_COMPARISON:
        kinds = {option_index is None for _, option_index in resolved}
        if len(kinds) != 1:
            return "comparison mixes an issue with an option"
        if resolved[0] == resolved[1]:
            return "comparison targets are identical"
    return None


def resolve_signal(signal: Signal, scenario: Scenario) -> list[tuple[int, int | None]]:
    """Resolve targets to (issue position, option index or None); raises if invalid."""
    reason = validate_signal(signal, scenario)
    if reason is not None:
        raise SignalValidationError(reason)
    return [
        (scenario.issue_index(issue_id), option_index)
        for issue_id, option_index in (
            _resolve_target(t, scenario) for t in signal.targets
        )
    ]


@dataclass
class TruthfulPreferences:
    """A party's score table normalized into weight/value strengths."""

    issue_ids: tuple[str, ...]
    weights: np.ndarray                  # per-issue max / sum of maxima
    option_values: tuple[np.ndarray, ...]  # per-issue scores / issue max (max 1)

    @classmethod
    def from_party(cls, party: Party) -> "TruthfulPreferences":
        issue_ids = tuple(party.scores.keys())
        maxima = np.array([max(party.scores[i]) for i in issue_ids], dtype=float)
        total = maxima.sum()
        weights = maxima / total if total > 0 else np.full(len(issue_ids), 1.0 / len(issue_ids))
        values = tuple(
            np.asarray(party.scores[i], dtype=float) / maxima[m]
            if maxima[m] > 0
            else np.zeros(len(party.scores[i]))
            for m, i in enumerate(issue_ids)
        )
        return cls(issue_ids=issue_ids, weights=weights, option_values=values)


def _luce_pick(rng: np.random.Generator, strengths: np.ndarray) -> int:
    floored = np.maximum(np.asarray(strengths, dtype=float), 0.0)
    total = floored.sum()
    if total <= 0:
        probs = np.full(len(floored), 1.0 / len(floored))
    else:
        probs = floored / total
    return int(rng.choice(len(probs), p=probs))


def oracle_extract(
    truth: Party,
    seed: int | np.random.Generator,
    count: int,
    kind_weights: Mapping[str, float] | None = None,
) -> list[Signal]:
    """Sample `count` truthful signals from a party's true score table.

    Issue-point signals pick the issue proportionally to its true normalized
    weight; option-point signals pick the issue by weight then the option by
    Luce over true option scores; comparison directions are Bernoulli in the
    same strength ratios the opponent model assigns them. Deterministic given
    the seed.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    prefs = TruthfulPreferences.from_party(truth)
    weights = prefs.weights
    n_issues = len(prefs.issue_ids)
    mix = dict(DEFAULT_KIND_WEIGHTS if kind_weights is None else kind_weights)
    kinds = list(mix)
    kind_probs = np.array([mix[k] for k in kinds], dtype=float)
    kind_probs = kind_probs / kind_probs.sum()

    def issue_label(m: int) -> str:
        return prefs.issue_ids[m]

    def option_label_at(m: int, j: int) -> str:
        return f"{prefs.issue_ids[m]}{j + 1}"

    def strength(m: int, j: int) -> float:
        return max(float(weights[m] * prefs.option_values[m][j]), STRENGTH_FLOOR)

    signals: list[Signal] = []
    while len(signals) < count:
        kind = kinds[int(rng.choice(len(kinds), p=kind_probs))]
        if kind == "issue_prefer":
            m = _luce_pick(rng, weights)
            sig = Signal(truth.id, ENTITY_ISSUE, TYPE_POINT, (issue_label(m),), STANCE_PREFER)
        elif kind == "issue_oppose":
            if n_issues < 2:
                continue
            m = _luce_pick(rng, 1.0 - weights)
            sig = Signal(truth.id, ENTITY_ISSUE, TYPE_POINT, (issue_label(m),), STANCE_OPPOSE)
        elif kind == "option_prefer":
            m = _luce_pick(rng, weights)
            j = _luce_pick(rng, prefs.option_values[m])
            sig = Signal(truth.id, ENTITY_OPTION, TYPE_POINT, (option_label_at(m, j),), STANCE_PREFER)
        elif kind == "option_oppose":
            m = _luce_pick(rng, weights)
            values = prefs.option_values[m]
            total = values.sum()
            normalized = values / total if total > 0 else np.full(len(values), 1.0 / len(values))
            j = _luce_pick(rng, 1.0 - normalized)
            sig = Signal(truth.id, ENTITY_OPTION, TYPE_POINT, (option_label_at(m, j),), STANCE_OPPOSE)
        elif kind == "issue_comparison":
            if n_issues < 2:
                continue
            x, y = (int(v) for v in rng.choice(n_issues, size=2, replace=False))
            # Direction is consistent with the true ordering; coin-flip on ties.
            if weights[x] < weights[y] or (
                weights[x] == weights[y] and rng.random() < 0.5
            ):
                x, y = y, x
            sig = Signal(
                truth.id, ENTITY_ISSUE, TYPE_COMPARISON,
                (issue_label(x), issue_label(y)), STANCE_PREFER,
            )
        else:  # option_comparison
            mx = _luce_pick(rng, weights)
            jx = int(rng.integers(len(prefs.option_values[mx])))
            my = _luce_pick(rng, weights)
            jy = int(rng.integers(len(prefs.option_values[my])))
            if (mx, jx) == (my, jy):
                continue
            sx, sy = strength(mx, jx), strength(my, jy)
            if sx < sy or (sx == sy and rng.random() < 0.5):
                (mx, jx), (my, jy) = (my, jy), (mx, jx)
            sig = Signal(
                truth.id, ENTITY_OPTION, TYPE_COMPARISON,
                (option_label_at(mx, jx), option_label_at(my, jy)), STANCE_PREFER,
            )
        signals.append(sig)
    return signals
