"""Round-based negotiation protocol and the agent policies that play it.

Protocol: up to T rounds, one proposal (deal + utterance) per round, speakers
rotating round-robin from the leader p1, with the closing round-T slot
reassigned to p1. The outcome is judged solely on the final round's deal.

Policies see only public structure, their own private Party, the shared
history, and whatever per-opponent beliefs the engine hands them; they can
never read another party's score table or threshold.
"""

from __future__ import annotations

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .beliefs import (
    BeliefState,
    ConcessionCurve,
    UpdateConfig,
    belief_snapshot,
    point_estimate,
    update_belief,
)
from .errors import (
    DealValidationError,
    ExtractionError,
    ExtractionTransportError,
    PolicyError,
)
from .hypotheses import build_hypothesis_space
from .llm import ChatCompletionClient, llm_extract
from .scenario import (
    Deal,
    Issue,
    Party,
    PublicScenario,
    Scenario,
    option_label,
    parse_deal_text,
)
from .signals import Signal, Utterance, oracle_extract, validate_signal

logger = logging.getLogger(__name__)

PROPOSAL_TOOL_NAME = "propose_deal"

PROPOSAL_TOOL_SCHEMA = {
    "type": "function",
    "function": {
        "name": PROPOSAL_TOOL_NAME,
        "description": "Submit this round's proposal.",
        "parameters": {
            "type": "object",
            "properties": {
                "deal": {
                    "type": "string",
                    "description": 'One option per issue, e.g. "A1,B3,C2,D1,E4".',
                },
                "utterance": {"type": "string"},
            },
            "required": ["deal", "utterance"],
        },
    },
}


@dataclass(frozen=True)
class PreferenceView:
    """What a policy believes about one opponent.

    `table` is a score-table-shaped estimate (issue id -> option values) and
    `accept_level` the utility, on the same scale, the opponent is assumed to
    require right now.
    """

    table: Mapping[str, np.ndarray]
    accept_level: float


@dataclass(frozen=True)
class RoundRecord:
    round: int
    speaker: str
    deal: Deal
    utterance: str
    signals: tuple[Signal, ...] = ()


@dataclass
class NegotiationHistory:
    records: list[RoundRecord] = field(default_factory=list)

    def append(self, record: RoundRecord) -> None:
        if self.records and record.round <= self.records[-1].round:
            raise ValueError(
                f"round {record.round} not after round {self.records[-1].round}"
            )
        self.records.append(record)

    def utterances(self) -> list[Utterance]:
        return [
            Utterance(round=r.round, speaker=r.speaker, text=r.utterance)
            for r in self.records
        ]

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class TrialResult:
    """Outcome and evidence trail of one negotiation trial."""

    scenario_name: str
    seed: int
    history: NegotiationHistory
    final_deal: Deal | None
    satisfied_count: int
    vetoes_satisfied: bool
    full_agreement: bool
    partial_agreement: bool
    latent_hit: bool
    aborted: bool = False
    abort_reason: str = ""
    # estimator id -> opponent id -> final point-estimate table
    final_estimates: dict[str, dict[str, dict[str, list[float]]]] = field(
        default_factory=dict
    )
    # estimator id -> opponent id -> per-round belief snapshots (round 0 = prior)
    belief_traces: dict[str, dict[str, list[dict]]] = field(default_factory=dict)

    def __post_init__(self):
        if self.full_agreement and not self.partial_agreement:
            raise ValueError("full agreement implies partial agreement")
        if self.partial_agreement and not self.latent_hit:
            raise ValueError("partial agreement implies a latent hit")


class AgentPolicy(ABC):
    """Produces one (deal, utterance) proposal per speaking turn."""

    @abstractmethod
    def propose(
        self,
        view: PublicScenario,
        me: Party,
        history: NegotiationHistory,
        beliefs: Mapping[str, PreferenceView],
        t: int,
        rng: np.random.Generator,
    ) -> tuple[Deal, str]:
        """Return this round's proposal. Must be deterministic given `rng`."""


def _deal_matrix(issues: Sequence[Issue]) -> np.ndarray:
    """Option-index matrix over all deals, enumeration order, shape (n, M)."""
    counts = [issue.n_options for issue in issues]
    grids = np.meshgrid(*[np.arange(k) for k in counts], indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def table_utilities(table: Mapping[str, Sequence[float]],
                    issues: Sequence[Issue],
                    deal_matrix: np.ndarray) -> np.ndarray:
    """Per-deal utilities of a score-table-shaped mapping, shape (n_deals,)."""
    total = np.zeros(len(deal_matrix))
    for m, issue in enumerate(issues):
        total += np.asarray(table[issue.id], dtype=float)[deal_matrix[:, m]]
    return total


class ScriptedConcessionPolicy(AgentPolicy):
    """Deterministic concession bidder with optional opponent acceptability.

    Scans every deal; keeps those meeting the own-utility floor
    max(u'(t) * own maximum, own threshold); among them maximizes, in order,
    the number of opponents whose believed utility reaches their assumed
    acceptance level, the believed total utility of opponents, and own
    utility. Without beliefs the rule degenerates to self-interested bidding.
    The utterance truthfully announces the bidder's top issue.
    """

    def __init__(self, concession: ConcessionCurve | None = None):
        self.concession = concession
        self._issues: tuple[Issue, ...] | None = None
        self._deal_matrix: np.ndarray | None = None

    def _tables(self, view: PublicScenario) -> np.ndarray:
        if self._issues != view.issues:
            self._issues = view.issues
            self._deal_matrix = _deal_matrix(view.issues)
        return self._deal_matrix

    def propose(self, view, me, history, beliefs, t, rng):
        deal_matrix = self._tables(view)
        curve = self.concession or ConcessionCurve(horizon=view.rounds)
        own_u = table_utilities(me.scores, view.issues, deal_matrix)
        own_max = float(own_u.max())
        floor = max(curve.target(t) * own_max, float(me.threshold))
        feasible = own_u >= floor - 1e-9
        if not feasible.any():
            feasible = own_u >= own_max - 1e-9

        candidates = np.flatnonzero(feasible)
        if beliefs:
            est = {
                q: table_utilities(pv.table, view.issues, deal_matrix)
                for q, pv in beliefs.items()
            }
            count = np.zeros(len(deal_matrix))
            total = np.zeros(len(deal_matrix))
            for q, pv in beliefs.items():
                count += est[q] >= pv.accept_level - 1e-9
                total += est[q]
            for key in (count, total, own_u):
                best = key[candidates].max()
                candidates = candidates[key[candidates] >= best - 1e-9]
        else:
            best = own_u[candidates].max()
            candidates = candidates[own_u[candidates] >= best - 1e-9]
        pick = int(candidates[0])
        deal = Deal(tuple(int(c) for c in deal_matrix[pick]))

        top_issue = max(view.issues, key=lambda issue: max(me.scores[issue.id]))
        best_option = int(np.argmax(me.scores[top_issue.id]))
        utterance = (
            f"We propose {format_deal_labels(view.issues, deal)}. "
            f"Issue {top_issue.id} ({top_issue.name}) matters most to us; "
            f"our preferred choice there is "
            f"{option_label(top_issue.id, best_option)}."
        )
        return deal, utterance


def format_deal_labels(issues: Sequence[Issue], deal: Deal) -> str:
    return ",".join(
        option_label(issue.id, choice) for issue, choice in zip(issues, deal.choices)
    )


def scripted_concession_policy(
    concession: ConcessionCurve | None = None,
) -> AgentPolicy:
    """Non-LLM baseline bidder (see ScriptedConcessionPolicy)."""
    return ScriptedConcessionPolicy(concession=concession)


def belief_driven_policy(
    mode: str, concession: ConcessionCurve | None = None
) -> tuple[AgentPolicy, str]:
    """Proposal rule of the scripted policy fed by estimated tables.

    Returns (policy, estimation mode) where mode "p1" attaches beliefs only to
    the leader and "all" to every agent; the engine wires estimates into
    whichever agents the mode selects.
    """
    if mode not in ("p1", "all"):
        raise ValueError(f"mode must be 'p1' or 'all', got {mode!r}")
    return ScriptedConcessionPolicy(concession=concession), mode


class LLMAgentPolicy(AgentPolicy):
    """Adapter that delegates proposing to a chat-completion endpoint.

    The model sees the public rules, the agent's own private scores and
    threshold, and the full history (deals and utterances). An invalid deal
    triggers one corrective re-prompt; a second failure raises PolicyError.
    """

    def __init__(self, client: ChatCompletionClient, max_reprompts: int = 1):
        self.client = client
        self.max_reprompts = max_reprompts

    def _prompt(self, view, me, history, t):
        lines = [
            "You are negotiating on behalf of one party in a multi-issue "
            "negotiation.",
            "",
            render_rules_text(view),
            "",
            f"You are {me.id} ({me.name}). Your private scores per issue "
            f"option are {dict(me.scores)} and your reservation threshold is "
            f"{me.threshold}.",
            "",
            "History so far:",
        ]
        if history.records:
            lines += [
                f"[Round {r.round}] {r.speaker}: proposed "
                f"{format_deal_labels(view.issues, r.deal)} -- {r.utterance}"
                for r in history.records
            ]
        else:
            lines.append("(none)")
        lines += [
            "",
            f"It is round {t} of {view.rounds}. Propose a deal using the "
            f"{PROPOSAL_TOOL_NAME} function.",
        ]
        return "\n".join(lines)

    def propose(self, view, me, history, beliefs, t, rng):
        messages = [{"role": "user", "content": self._prompt(view, me, history, t)}]
        last_error = ""
        for _ in range(self.max_reprompts + 1):
            payload = self.client.complete(
                messages=messages,
                tools=[PROPOSAL_TOOL_SCHEMA],
                tool_choice={
                    "type": "function",
                    "function": {"name": PROPOSAL_TOOL_NAME},
                },
            )
            try:
                arguments = payload["choices"][0]["message"]["tool_calls"][0][
                    "function"
                ]["arguments"]
                parsed = json.loads(arguments)
                deal = parse_deal_text(view.issues, str(parsed["deal"]))
                return deal, str(parsed.get("utterance", ""))
            except (KeyError, IndexError, TypeError, ValueError,
                    DealValidationError) as exc:
                last_error = str(exc)
                messages.append(
                    {
                        "role": "user",
                        "content": (
                            f"Your proposal was invalid ({last_error}). Respond "
                            f"again with a valid {PROPOSAL_TOOL_NAME} call."
                        ),
                    }
                )
        raise PolicyError(f"{me.id}: no valid proposal after re-prompt: {last_error}")


def llm_agent_policy(client: ChatCompletionClient, max_reprompts: int = 1) -> AgentPolicy:
    return LLMAgentPolicy(client, max_reprompts=max_reprompts)


def render_rules_text(view: PublicScenario) -> str:
    """Public rules summary used in extraction and agent prompts."""
    lines = [
        f"Scenario: {view.name}. {len(view.parties)} parties negotiate "
        f"{len(view.issues)} issues over up to {view.rounds} rounds.",
        "Issues and options:",
    ]
    for issue in view.issues:
        opts = ", ".join(
            f"{issue.id}{i + 1}={label}" for i, label in enumerate(issue.options)
        )
        lines.append(f"  {issue.id} ({issue.name}): {opts}")
    vetoes = [p.id for p in view.parties if p.veto]
    lines.append(
        f"Agreement requires at least {view.min_agree} satisfied parties "
        f"including the veto holders ({', '.join(vetoes) if vetoes else 'none'}). "
        f"Only the final round's deal decides the outcome."
    )
    lines.append("Parties: " + ", ".join(f"{p.id} ({p.name})" for p in view.parties))
    return "\n".join(lines)


@dataclass
class EstimationConfig:
    """Engine wiring of the opponent model into a trial."""

    mode: str = "none"                # none | p1 | all
    signal_source: str = "oracle"     # oracle | llm | none
    signals_per_round: int = 1
    update: UpdateConfig = field(default_factory=UpdateConfig)
    point_mode: str = "mean"
    score_scale: float = 100.0
    snapshot_top_n: int = 10
    keep_traces: bool = True
    pin_truth: bool = False           # test hook: views carry true tables/thresholds

    def __post_init__(self):
        if self.mode not in ("none", "p1", "all"):
            raise ValueError(f"bad estimation mode {self.mode!r}")
        if self.signal_source not in ("oracle", "llm", "none"):
            raise ValueError(f"bad signal source {self.signal_source!r}")


def _speaker_order(parties: Sequence[Party], rounds: int) -> list[str]:
    """Round-robin from p1; the closing slot is reassigned to p1."""
    order = [parties[(t - 1) % len(parties)].id for t in range(1, rounds + 1)]
    if rounds >= 1:
        order[-1] = parties[0].id
    return order


def run_negotiation(
    scenario: Scenario,
    agents: Mapping[str, AgentPolicy],
    estimation: EstimationConfig | None = None,
    seed: int = 0,
    llm_client: ChatCompletionClient | None = None,
) -> TrialResult:
    """Run one trial and judge it on the final round's deal.

    After every round each estimating agent's belief about the speaker absorbs
    the observed (deal, signals); with identical priors and shared public
    evidence those beliefs coincide across observers, so one belief per target
    party is maintained and exposed per estimator in the traces.
    """
    est = estimation or EstimationConfig(mode="none")
    for party in scenario.parties:
        if party.id not in agents:
            raise PolicyError(f"party {party.id!r} has no policy")
    if est.mode != "none" and est.update.concession.horizon != scenario.rounds:
        est = replace(
            est,
            update=replace(
                est.update,
                concession=replace(est.update.concession, horizon=scenario.rounds),
            ),
        )

    seed_seq = np.random.SeedSequence(seed)
    agent_seqs = seed_seq.spawn(scenario.n_parties)
    signal_seq = seed_seq.spawn(1)[0]
    agent_rngs = {
        p.id: np.random.default_rng(s) for p, s in zip(scenario.parties, agent_seqs)
    }
    signal_rng = np.random.default_rng(signal_seq)

    public = scenario.public_view()
    p1 = scenario.parties[0].id
    estimators: list[str] = []
    if est.mode == "p1":
        estimators = [p1]
    elif est.mode == "all":
        estimators = [p.id for p in scenario.parties]

    space = build_hypothesis_space(scenario) if estimators else None
    bank: dict[str, BeliefState] = {}
    traces: dict[str, dict[str, list[dict]]] = {e: {} for e in estimators}
    if space is not None:
        deal_matrix = _deal_matrix(scenario.issues)
        for party in scenario.parties:
            bank[party.id] = BeliefState.uniform(space, party.id)
        for e in estimators:
            for q in bank:
                if q != e and est.keep_traces:
                    traces[e][q] = [
                        belief_snapshot(
                            space, bank[q], top_n=est.snapshot_top_n,
                            scale=est.score_scale,
                        )
                    ]

    def views_for(agent_id: str, t: int) -> dict[str, PreferenceView]:
        if agent_id not in estimators:
            return {}
        views: dict[str, PreferenceView] = {}
        level_fraction = est.update.concession.target(t)
        for q in bank:
            if q == agent_id:
                continue
            if est.pin_truth:
                truth = scenario.party(q)
                views[q] = PreferenceView(
                    table={i: np.asarray(v, dtype=float) for i, v in truth.scores.items()},
                    accept_level=float(truth.threshold),
                )
                continue
            table = point_estimate(
                space, bank[q], mode=est.point_mode, scale=est.score_scale
            )
            # Acceptance bar: the opponent concedes like us, scaled to the best
            # utility its estimated table can currently reach.
            max_u = float(table_utilities(table, scenario.issues, deal_matrix).max())
            views[q] = PreferenceView(table=table, accept_level=level_fraction * max_u)
        return views

    history = NegotiationHistory()
    order = _speaker_order(scenario.parties, scenario.rounds)
    # LLM extraction re-reads the whole transcript each round and returns each
    # agent's signals chronologically; only the unseen suffix is applied.
    applied_signal_counts: dict[str, int] = {p.id: 0 for p in scenario.parties}

    def aborted_result(reason: str) -> TrialResult:
        return TrialResult(
            scenario_name=scenario.name,
            seed=seed,
            history=history,
            final_deal=None,
            satisfied_count=0,
            vetoes_satisfied=False,
            full_agreement=False,
            partial_agreement=False,
            latent_hit=any(
                scenario.is_partial_agreement(r.deal) for r in history.records
            ),
            aborted=True,
            abort_reason=reason,
        )

    for t, speaker_id in enumerate(order, start=1):
        speaker = scenario.party(speaker_id)
        policy = agents[speaker_id]
        try:
            deal, utterance = policy.propose(
                public, speaker, history, views_for(speaker_id, t), t,
                agent_rngs[speaker_id],
            )
            scenario.validate_deal(deal)
        except (PolicyError, DealValidationError, ExtractionError,
                ExtractionTransportError) as exc:
            logger.warning("trial aborted at round %d: %s", t, exc)
            return aborted_result(f"round {t} ({speaker_id}): {exc}")

        observers = [e for e in estimators if e != speaker_id]
        signals: list[Signal] = []
        if observers and est.signal_source == "oracle":
            signals = oracle_extract(speaker, signal_rng, est.signals_per_round)
        elif observers and est.signal_source == "llm":
            if llm_client is None:
                return aborted_result("signal source 'llm' needs an endpoint client")
            transcript = history.utterances() + [Utterance(t, speaker_id, utterance)]
            try:
                extracted = llm_extract(
                    transcript, render_rules_text(public), llm_client
                )
                speaker_signals = list(extracted.get(speaker_id, []))
                signals = speaker_signals[applied_signal_counts[speaker_id]:]
                applied_signal_counts[speaker_id] = len(speaker_signals)
            except (ExtractionError, ExtractionTransportError) as exc:
                logger.warning("round %d extraction failed: %s", t, exc)
                signals = []
        kept: list[Signal] = []
        for signal in signals:
            reason = validate_signal(signal, scenario)
            if reason is None:
                kept.append(signal)
            else:
                logger.warning("dropping invalid signal %s: %s", signal, reason)

        history.append(
            RoundRecord(
                round=t, speaker=speaker_id, deal=deal, utterance=utterance,
                signals=tuple(kept),
            )
        )

        if observers and space is not None:
            bank[speaker_id] = update_belief(
                space, bank[speaker_id], deal, kept, t, est.update, scenario
            )
            if est.keep_traces:
                snap = belief_snapshot(
                    space, bank[speaker_id], top_n=est.snapshot_top_n,
                    scale=est.score_scale,
                )
                for e in observers:
                    traces[e][speaker_id].append(snap)

    final_deal = history.records[-1].deal
    satisfied_count, vetoes_ok = scenario.agreement_level(final_deal)
    partial = satisfied_count >= scenario.min_agree and vetoes_ok
    full = satisfied_count == scenario.n_parties
    latent = any(scenario.is_partial_agreement(r.deal) for r in history.records)

    final_estimates: dict[str, dict[str, dict[str, list[float]]]] = {}
    for e in estimators:
        final_estimates[e] = {}
        for q in bank:
            if q == e:
                continue
            table = point_estimate(
                space, bank[q], mode=est.point_mode, scale=est.score_scale
            )
            final_estimates[e][q] = {
                issue: [float(v) for v in vec] for issue, vec in table.items()
            }

    return TrialResult(
        scenario_name=scenario.name,
        seed=seed,
        history=history,
        final_deal=final_deal,
        satisfied_count=satisfied_count,
        vetoes_satisfied=vetoes_ok,
        full_agreement=full,
        partial_agreement=partial,
        latent_hit=latent,
        final_estimates=final_estimates,
        belief_traces=traces if est.keep_traces else {},
    )
