"""Finite hypothesis space over opponent utility functions.

A hypothesis pairs an issue-weight vector (from a ranking permutation) with one
triangular evaluation shape per issue. For M issues with option counts K_m the
space holds M! * prod(K_m) hypotheses, indexed k = weight_index * n_combos +
combo_index with both factors enumerated lexicographically, so indices are
stable across builds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError
from .scenario import Deal, Scenario

DEFAULT_MAX_HYPOTHESES = 5_000_000


def rank_weights(ranking: tuple[int, ...]) -> np.ndarray:
    """Map per-issue ranks (M = most important) to normalized weights r/sum."""
    ranks = np.asarray(ranking, dtype=float)
    return ranks / ranks.sum()


def triangular_shape(n_options: int, apex: int) -> np.ndarray:
    """Piecewise-linear preference curve: 1 at the apex, 0 at the far extreme.

    Interior apexes descend linearly to 0 on both sides.
    """
    if not 0 <= apex < n_options:
        raise ValueError(f"apex {apex} out of range for {n_options} options")
    values = np.zeros(n_options)
    for j in range(n_options):
        if j <= apex:
            values[j] = 1.0 if apex == 0 else j / apex
        else:
            values[j] = (n_options - 1 - j) / (n_options - 1 - apex)
    values[apex] = 1.0
    return values


@dataclass(frozen=True)
class Hypothesis:
    """One point of the space: a weight-table row plus one apex per issue."""

    index: int
    weight_index: int
    shape_indices: tuple[int, ...]


class HypothesisSpace:
    """Immutable tables for all weight and shape hypotheses of a scenario."""

    def __init__(self, issue_ids: tuple[str, ...], option_counts: tuple[int, ...],
                 max_size: int = DEFAULT_MAX_HYPOTHESES):
        m = len(issue_ids)
        n_weights = math.factorial(m)
        n_combos = 1
        for k in option_counts:
            n_combos *= k
        size = n_weights * n_combos
        if size > max_size:
            raise CapacityError(
                f"hypothesis space size {size} ({n_weights} weight hypotheses x "
                f"{n_combos} shape combinations) exceeds the budget of {max_size}"
            )
        self.issue_ids = issue_ids
        self.option_counts = option_counts
        self.n_issues = m
        self.n_weights = n_weights
        self.n_combos = n_combos
        self.size = size

        # Rows sorted lexicographically by the rank tuple assigned to issues.
        self.rankings = np.array(
            list(itertools.permutations(range(1, m + 1))), dtype=np.int64
        )
        self.weights = self.rankings / self.rankings.sum(axis=1, keepdims=True)

        self.shapes: tuple[np.ndarray, ...] = tuple(
            np.vstack([triangular_shape(k, apex) for apex in range(k)])
            for k in option_counts
        )
        self.combos = np.array(
            list(itertools.product(*(range(k) for k in option_counts))),
            dtype=np.int64,
        )
        # combo_values[m][c, o]: shape value of option o under combo c's apex.
        self.combo_values: tuple[np.ndarray, ...] = tuple(
            self.shapes[pos][self.combos[:, pos], :] for pos in range(self.n_issues)
        )

    def hypothesis(self, index: int) -> Hypothesis:
        if not 0 <= index < self.size:
            raise IndexError(f"hypothesis index {index} out of range 0..{self.size - 1}")
        weight_index, combo_index = divmod(index, self.n_combos)
        return Hypothesis(
            index=index,
            weight_index=weight_index,
            shape_indices=tuple(int(a) for a in self.combos[combo_index]),
        )

    def index_of(self, weight_index: int, shape_indices: tuple[int, ...]) -> int:
        combo_index = 0
        for k, apex in zip(self.option_counts, shape_indices):
            combo_index = combo_index * k + apex
        return weight_index * self.n_combos + combo_index

    def weight_vector(self, weight_index: int) -> np.ndarray:
        return self.weights[weight_index]

    def shape_values(self, issue_pos: int, apex: int) -> np.ndarray:
        return self.shapes[issue_pos][apex]

    def estimated_utilities(self, deal: Deal) -> np.ndarray:
        """Estimated utility of the deal under every hypothesis, shape (size,)."""
        per_issue = np.stack(
            [self.combo_values[m][:, deal.choices[m]] for m in range(self.n_issues)],
            axis=1,
        )  # (n_combos, M)
        grid = self.weights @ per_issue.T  # (n_weights, n_combos)
        return grid.reshape(self.size)

    def estimated_utility(self, index: int, deal: Deal) -> float:
        """Estimated utility of the deal under one hypothesis, in [0, 1]."""
        h = self.hypothesis(index)
        w = self.weights[h.weight_index]
        total = 0.0
        for m in range(self.n_issues):
            total += w[m] * self.shapes[m][h.shape_indices[m], deal.choices[m]]
        return float(total)

    def hypothesis_table(self, index: int, scale: float = 1.0) -> dict[str, np.ndarray]:
        """Per-issue option value table w_m * v_m(o) for one hypothesis."""
        h = self.hypothesis(index)
        w = self.weights[h.weight_index]
        return {
            issue_id: scale * w[m] * self.shapes[m][h.shape_indices[m]]
            for m, issue_id in enumerate(self.issue_ids)
        }

    def mean_tables(self, probs: np.ndarray, scale: float = 1.0) -> dict[str, np.ndarray]:
        """Posterior-mean table: scale * E[w_m * v_m(o)] per issue and option."""
        grid = probs.reshape(self.n_weights, self.n_combos)
        tables: dict[str, np.ndarray] = {}
        for m, issue_id in enumerate(self.issue_ids):
            inner = grid @ self.combo_values[m]          # (n_weights, K_m)
            tables[issue_id] = scale * (self.weights[:, m] @ inner)
        return tables


def additive_utility(weights, values) -> float:
    """Weighted sum of per-issue evaluation values: sum_m w_m * v_m(o_m)."""
    return float(np.dot(np.asarray(weights, dtype=float), np.asarray(values, dtype=float)))


def build_hypothesis_space(
    scenario: Scenario, max_size: int = DEFAULT_MAX_HYPOTHESES
) -> HypothesisSpace:
    """Build the full weight x shape hypothesis space for a scenario."""
    return HypothesisSpace(
        issue_ids=tuple(issue.id for issue in scenario.issues),
        option_counts=scenario.option_counts,
        max_size=max_size,
    )
