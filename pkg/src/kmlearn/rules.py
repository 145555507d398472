"""Deterministic association rules from learned indicator vectors.

``a[i, j] = 1`` when ``supp(psi_j)`` is contained in ``supp(psi_i)``; each
such pair yields "likes i => likes j" and "dislikes j => dislikes i".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import KolmogorovModel

DEFAULT_MIN_BETA = 0.5


def support_included(psi_j, psi_i) -> bool:
    """True iff every event in ``psi_j`` is also in ``psi_i``."""
    psi_j = np.asarray(psi_j)
    psi_i = np.asarray(psi_i)
    if psi_j.shape != psi_i.shape:
        raise ValueError(f"dimension mismatch: {psi_j.shape} vs {psi_i.shape}")
    return bool(np.all(psi_j <= psi_i))


def build_adjacency(psis) -> np.ndarray:
    """Pairwise inclusion matrix with a zero diagonal."""
    P = np.asarray(psis) != 0
    if P.ndim != 2 or P.shape[0] < 1:
        raise ValueError("need at least one indicator vector")
    # supp(psi_j) subset of supp(psi_i)  <=>  no event in j outside i
    outside = (~P).astype(np.int64) @ P.T.astype(np.int64)
    a = (outside == 0).astype(np.int8)
    np.fill_diagonal(a, 0)
    return a


def influence_scores(a) -> np.ndarray:
    a = np.asarray(a)
    n = a.shape[0]
    return (a.sum(axis=1) - np.diagonal(a)) / n


def maximal_set(psis, item_ids=None) -> list[int]:
    """Items whose indicator is all ones."""
    P = np.asarray(psis)
    idx = np.flatnonzero(np.all(P == 1, axis=1))
    if item_ids is None:
        return [int(k) for k in idx]
    return [int(item_ids[k]) for k in idx]


@dataclass
class Rule:
    antecedent: int
    consequent: int
    direction: str  # "likes" | "dislikes"

    def __str__(self):
        return f"{self.direction} item {self.antecedent} => {self.direction} item {self.consequent}"


@dataclass
class RuleReport:
    item_ids: list[int]
    adjacency: np.ndarray
    beta: np.ndarray
    maximal_set: list[int]
    rules: list[Rule] = field(default_factory=list)
    min_beta: float = DEFAULT_MIN_BETA

    def influential(self) -> list[tuple[int, float]]:
        """``(item, beta)`` with ``beta >= min_beta``, highest score first."""
        keep = [(int(i), float(b)) for i, b in zip(self.item_ids, self.beta) if b >= self.min_beta]
        return sorted(keep, key=lambda t: (-t[1], t[0]))

    def to_dict(self) -> dict:
        rows, cols = np.nonzero(self.adjacency)
        ids = self.item_ids
        return {
            "adjacency_nnz": [[ids[i], ids[j]] for i, j in zip(rows, cols)],
            "beta": {str(i): float(b) for i, b in zip(ids, self.beta)},
            "maximal_set": list(self.maximal_set),
            "rules": [
                {"if": r.antecedent, "then": r.consequent, "direction": r.direction}
                for r in self.rules
            ],
            "min_beta": self.min_beta,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")


RULE_REPORT_SCHEMA = {
    "type": "object",
    "required": ["adjacency_nnz", "beta", "maximal_set", "rules"],
    "properties": {
        "adjacency_nnz": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        },
        "beta": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1}},
        "maximal_set": {"type": "array", "items": {"type": "integer"}},
        "rules": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["if", "then", "direction"],
                "properties": {
                    "if": {"type": "integer"},
                    "then": {"type": "integer"},
                    "direction": {"enum": ["likes", "dislikes"]},
                },
            },
        },
        "min_beta": {"type": "number"},
    },
}


def mine_rules(model: KolmogorovModel, min_beta: float = DEFAULT_MIN_BETA) -> RuleReport:
    """Adjacency, influence scores, maximal items and the implied rule pairs.

    Rules are listed for antecedent items with ``beta >= min_beta`` and for
    every all-ones item regardless of its score.
    """
    ids = [int(x) for x in model.item_ids]
    a = build_adjacency(model.psi)
    beta = influence_scores(a)
    M = maximal_set(model.psi, ids)
    in_M = np.all(np.asarray(model.psi) == 1, axis=1)
    rules = []
    for i, j in zip(*np.nonzero(a)):
        if beta[i] >= min_beta or in_M[i]:
            rules.append(Rule(ids[i], ids[j], "likes"))
            rules.append(Rule(ids[j], ids[i], "dislikes"))
    return RuleReport(ids, a, beta, M, rules, min_beta)
