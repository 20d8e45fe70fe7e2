"""Negotiation game definition: parties, issues, options, scores, thresholds.

Scores and utilities are plain integers so that feasibility enumeration is
exact; probability math elsewhere converts to float at the module boundary.
Option indices are 0-based everywhere in code and 1-based in all textual I/O
("A1"); `option_label`/`parse_option_label` own that conversion.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Iterator, Mapping

import yaml

from .errors import DealValidationError, ScenarioFormatError, UnknownPartyError

BUNDLED_SCENARIO = "harbour_sport_park"


@dataclass(frozen=True)
class Issue:
    """One negotiable issue with an ordered, finite option set."""

    id: str
    name: str
    options: tuple[str, ...]

    @property
    def n_options(self) -> int:
        return len(self.options)


@dataclass(frozen=True)
class Party:
    """A stakeholder with private per-issue scores and a reservation threshold."""

    id: str
    name: str
    veto: bool
    threshold: int
    scores: Mapping[str, tuple[int, ...]]


@dataclass(frozen=True)
class PublicParty:
    """The share of a party visible to other agents (no scores, no threshold)."""

    id: str
    name: str
    veto: bool


@dataclass(frozen=True)
class Deal:
    """One selected option index per issue, in scenario issue order."""

    choices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(int(c) for c in self.choices))


@dataclass(frozen=True)
class PublicScenario:
    """Scenario structure without any party's private information."""

    name: str
    issues: tuple[Issue, ...]
    parties: tuple[PublicParty, ...]
    rounds: int
    min_agree: int


def option_label(issue_id: str, option_index: int) -> str:
    """Render a 0-based option index as the external 1-based label ("A1")."""
    return f"{issue_id}{option_index + 1}"


def parse_option_label(label: str, issues: tuple[Issue, ...]) -> tuple[str, int]:
    """Parse an external label ("A1") into (issue_id, 0-based option index)."""
    for issue in issues:
        if label.startswith(issue.id) and label[len(issue.id):].isdigit():
            index = int(label[len(issue.id):]) - 1
            if 0 <= index < issue.n_options:
                return issue.id, index
            raise DealValidationError(
                f"option {label!r} out of range for issue {issue.id} "
                f"(1..{issue.n_options})"
            )
    raise DealValidationError(f"unparseable option label {label!r}")


@dataclass(frozen=True)
class Scenario:
    """A complete negotiation game definition."""

    name: str
    issues: tuple[Issue, ...]
    parties: tuple[Party, ...]
    rounds: int
    min_agree: int

    @property
    def n_parties(self) -> int:
        return len(self.parties)

    @property
    def n_issues(self) -> int:
        return len(self.issues)

    @property
    def option_counts(self) -> tuple[int, ...]:
        return tuple(issue.n_options for issue in self.issues)

    @property
    def n_deals(self) -> int:
        total = 1
        for k in self.option_counts:
            total *= k
        return total

    @property
    def veto_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.parties if p.veto)

    def party(self, party_id: str) -> Party:
        for p in self.parties:
            if p.id == party_id:
                return p
        raise UnknownPartyError(f"unknown party id {party_id!r}")

    def issue_index(self, issue_id: str) -> int:
        for m, issue in enumerate(self.issues):
            if issue.id == issue_id:
                return m
        raise DealValidationError(f"unknown issue id {issue_id!r}")

    def validate_deal(self, deal: Deal) -> None:
        if len(deal.choices) != self.n_issues:
            raise DealValidationError(
                f"deal has {len(deal.choices)} choices, scenario has "
                f"{self.n_issues} issues"
            )
        for issue, choice in zip(self.issues, deal.choices):
            if not 0 <= choice < issue.n_options:
                raise DealValidationError(
                    f"choice {choice} out of range for issue {issue.id} "
                    f"(0..{issue.n_options - 1})"
                )

    def utility(self, party_id: str, deal: Deal) -> int:
        """Sum of the party's per-issue scores for the deal's options."""
        self.validate_deal(deal)
        party = self.party(party_id)
        return sum(
            party.scores[issue.id][choice]
            for issue, choice in zip(self.issues, deal.choices)
        )

    def max_utility(self, party_id: str) -> int:
        """The party's best attainable utility (sum of per-issue maxima)."""
        party = self.party(party_id)
        return sum(max(vec) for vec in party.scores.values())

    def agreement_level(self, deal: Deal) -> tuple[int, bool]:
        """Count parties satisfied by the deal and whether all veto holders are.

        A party is satisfied when its utility reaches its reservation threshold
        (U >= tau; the bundled scenario's published feasibility counts require
        the weak inequality).
        """
        self.validate_deal(deal)
        satisfied = {
            p.id for p in self.parties if self.utility(p.id, deal) >= p.threshold
        }
        vetoes_ok = all(v in satisfied for v in self.veto_ids)
        return len(satisfied), vetoes_ok

    def is_partial_agreement(self, deal: Deal) -> bool:
        count, vetoes_ok = self.agreement_level(deal)
        return count >= self.min_agree and vetoes_ok

    def is_full_agreement(self, deal: Deal) -> bool:
        count, _ = self.agreement_level(deal)
        return count == self.n_parties

    def enumerate_deals(self) -> Iterator[Deal]:
        """Yield every deal exactly once, lexicographic in option indices."""
        for choices in itertools.product(*(range(k) for k in self.option_counts)):
            yield Deal(choices)

    def format_deal(self, deal: Deal) -> str:
        self.validate_deal(deal)
        return ",".join(
            option_label(issue.id, choice)
            for issue, choice in zip(self.issues, deal.choices)
        )

    def parse_deal(self, text: str) -> Deal:
        return parse_deal_text(self.issues, text)

    def public_view(self) -> PublicScenario:
        return PublicScenario(
            name=self.name,
            issues=self.issues,
            parties=tuple(PublicParty(p.id, p.name, p.veto) for p in self.parties),
            rounds=self.rounds,
            min_agree=self.min_agree,
        )


def parse_deal_text(issues: tuple[Issue, ...], text: str) -> Deal:
    """Parse "A1,B3,..." into a Deal against an ordered issue tuple."""
    parts = [p.strip() for p in text.strip().split(",") if p.strip()]
    if len(parts) != len(issues):
        raise DealValidationError(
            f"deal string {text!r} has {len(parts)} options, expected {len(issues)}"
        )
    positions = {issue.id: m for m, issue in enumerate(issues)}
    choices = [0] * len(issues)
    seen = set()
    for part in parts:
        issue_id, index = parse_option_label(part, issues)
        if issue_id in seen:
            raise DealValidationError(f"duplicate issue {issue_id!r} in {text!r}")
        seen.add(issue_id)
        choices[positions[issue_id]] = index
    return Deal(tuple(choices))


def feasibility_scan(scenario: Scenario) -> tuple[int, list[Deal], list[Deal]]:
    """Brute-force every deal; return (total, partial-feasible, full-feasible)."""
    partial: list[Deal] = []
    full: list[Deal] = []
    total = 0
    for deal in scenario.enumerate_deals():
        total += 1
        count, vetoes_ok = scenario.agreement_level(deal)
        if count >= scenario.min_agree and vetoes_ok:
            partial.append(deal)
        if count == scenario.n_parties:
            full.append(deal)
    return total, partial, full


def _require(mapping: dict, field: str, kind, path: str):
    if field not in mapping:
        raise ScenarioFormatError(f"{path}.{field}", "missing required field")
    value = mapping[field]
    if kind is int and isinstance(value, bool):
        raise ScenarioFormatError(f"{path}.{field}", "expected an integer")
    if not isinstance(value, kind):
        raise ScenarioFormatError(
            f"{path}.{field}", f"expected {kind.__name__}, got {type(value).__name__}"
        )
    return value


def _parse_issue(raw: dict, path: str) -> Issue:
    if not isinstance(raw, dict):
        raise ScenarioFormatError(path, "issue must be a mapping")
    issue_id = _require(raw, "id", str, path)
    name = _require(raw, "name", str, path)
    options = _require(raw, "options", list, path)
    labels = tuple(str(o) for o in options)
    if len(labels) < 2:
        raise ScenarioFormatError(f"{path}.options", "an issue needs >= 2 options")
    if len(set(labels)) != len(labels):
        raise ScenarioFormatError(f"{path}.options", "option labels must be unique")
    return Issue(id=issue_id, name=name, options=labels)


def _parse_party(raw: dict, issues: tuple[Issue, ...], path: str) -> Party:
    if not isinstance(raw, dict):
        raise ScenarioFormatError(path, "party must be a mapping")
    party_id = _require(raw, "id", str, path)
    name = _require(raw, "name", str, path)
    veto = _require(raw, "veto", bool, path)
    threshold = _require(raw, "threshold", int, path)
    if threshold < 0:
        raise ScenarioFormatError(f"{path}.threshold", "threshold must be >= 0")
    scores_raw = _require(raw, "scores", dict, path)
    scores: dict[str, tuple[int, ...]] = {}
    for issue in issues:
        if issue.id not in scores_raw:
            raise ScenarioFormatError(
                f"{path}.scores.{issue.id}", "missing score vector for issue"
            )
        vec = scores_raw[issue.id]
        if not isinstance(vec, list):
            raise ScenarioFormatError(
                f"{path}.scores.{issue.id}", "score vector must be a list"
            )
        if len(vec) != issue.n_options:
            raise ScenarioFormatError(
                f"{path}.scores.{issue.id}",
                f"score vector length {len(vec)} != {issue.n_options} options",
            )
        values = []
        for i, v in enumerate(vec):
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ScenarioFormatError(
                    f"{path}.scores.{issue.id}[{i}]",
                    "scores must be non-negative integers",
                )
            values.append(v)
        scores[issue.id] = tuple(values)
    extra = set(scores_raw) - {issue.id for issue in issues}
    if extra:
        raise ScenarioFormatError(
            f"{path}.scores", f"scores reference unknown issues {sorted(extra)}"
        )
    return Party(id=party_id, name=name, veto=veto, threshold=threshold, scores=scores)


def load_scenario(source: str | Path | IO[str] | dict) -> Scenario:
    """Load and validate a scenario from a YAML document, path, or mapping."""
    if isinstance(source, dict):
        raw = source
    elif isinstance(source, Path):
        raw = yaml.safe_load(source.read_text())
    elif isinstance(source, str):
        if "\n" not in source and Path(source).exists():
            raw = yaml.safe_load(Path(source).read_text())
        else:
            raw = yaml.safe_load(source)
    else:
        raw = yaml.safe_load(source.read())
    if not isinstance(raw, dict):
        raise ScenarioFormatError("<document>", "scenario must be a mapping")

    name = str(raw.get("name", "unnamed"))
    rounds = _require(raw, "rounds", int, "<document>")
    if rounds < 1:
        raise ScenarioFormatError("rounds", "rounds must be >= 1")
    min_agree = _require(raw, "min_agree", int, "<document>")
    issues_raw = _require(raw, "issues", list, "<document>")
    parties_raw = _require(raw, "parties", list, "<document>")

    issues = tuple(
        _parse_issue(item, f"issues[{i}]") for i, item in enumerate(issues_raw)
    )
    if len(issues) < 1:
        raise ScenarioFormatError("issues", "at least one issue required")
    if len({issue.id for issue in issues}) != len(issues):
        raise ScenarioFormatError("issues", "issue ids must be unique")

    parties = tuple(
        _parse_party(item, issues, f"parties[{i}]")
        for i, item in enumerate(parties_raw)
    )
    if len(parties) < 2:
        raise ScenarioFormatError("parties", "at least two parties required")
    if len({p.id for p in parties}) != len(parties):
        raise ScenarioFormatError("parties", "party ids must be unique")
    if not 1 <= min_agree <= len(parties):
        raise ScenarioFormatError(
            "min_agree", f"must be in 1..{len(parties)}, got {min_agree}"
        )
    return Scenario(
        name=name, issues=issues, parties=parties, rounds=rounds, min_agree=min_agree
    )


def bundled_scenario(name: str = BUNDLED_SCENARIO) -> Scenario:
    """Load a scenario shipped with the package."""
    text = resources.files("parley.data").joinpath(f"{name}.yaml").read_text()
    return load_scenario(text)
