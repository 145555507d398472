"""Kolmogorov model: PMF vectors per user, binary indicator vectors per item.

The probability that user ``u`` "likes" item ``i`` is ``theta[u] @ psi[i]``.
Only the first outcome is stored; the second is recovered through
:func:`complement_indicator`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SUM_TOL = 1e-9
NEG_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


def _id_index(ids: np.ndarray) -> dict[int, int]:
    index = {int(x): k for k, x in enumerate(ids)}
    if len(index) != len(ids):
        raise ValueError("duplicate ids")
    return index


@dataclass(frozen=True)
class ObservationSet:
    """Sparse empirical probabilities ``p[k]`` for pairs ``(users[k], items[k])``.

    ``users``/``items`` are dense internal indices into ``user_ids``/``item_ids``,
    which hold the external (opaque integer) identifiers.
    """

    users: np.ndarray
    items: np.ndarray
    p: np.ndarray
    user_ids: np.ndarray
    item_ids: np.ndarray

    def __post_init__(self):
        for name in ("users", "items", "p", "user_ids", "item_ids"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n = len(self.p)
        if len(self.users) != n or len(self.items) != n:
            raise ValueError("users, items and p must have equal length")
        if n and (np.any(self.p < 0) or np.any(self.p > 1) or not np.all(np.isfinite(self.p))):
            raise ValueError("probabilities must lie in [0, 1]")
        if n:
            if self.users.min() < 0 or self.users.max() >= len(self.user_ids):
                raise ValueError("user index out of range")
            if self.items.min() < 0 or self.items.max() >= len(self.item_ids):
                raise ValueError("item index out of range")
            keys = self.users.astype(np.int64) * max(len(self.item_ids), 1) + self.items
            if len(np.unique(keys)) != n:
                raise ValueError("duplicate (user, item) pairs")

    @classmethod
    def from_records(cls, records: Iterable[tuple[int, int, float]]) -> "ObservationSet":
        """Build from ``(user_id, item_id, p)`` triples; ids are re-indexed densely
        in order of first appearance."""
        recs = list(records)
        uidx: dict[int, int] = {}
        iidx: dict[int, int] = {}
        users = np.empty(len(recs), dtype=np.int64)
        items = np.empty(len(recs), dtype=np.int64)
        p = np.empty(len(recs), dtype=np.float64)
        for k, (u, i, pk) in enumerate(recs):
            users[k] = uidx.setdefault(int(u), len(uidx))
            items[k] = iidx.setdefault(int(i), len(iidx))
            p[k] = float(pk)
        return cls(
            users,
            items,
            p,
            np.fromiter(uidx, dtype=np.int64, count=len(uidx)),
            np.fromiter(iidx, dtype=np.int64, count=len(iidx)),
        )

    @classmethod
    def from_matrix(cls, P: np.ndarray) -> "ObservationSet":
        """Fully observed matrix; ids are 1-based row/column numbers. NaN marks a
        missing entry."""
        P = np.asarray(P, dtype=np.float64)
        return cls.from_records(
            (u + 1, i + 1, P[u, i])
            for u in range(P.shape[0])
            for i in range(P.shape[1])
            if not np.isnan(P[u, i])
        )

    def __len__(self) -> int:
        return len(self.p)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def records(self) -> list[tuple[int, int, float]]:
        return [
            (int(self.user_ids[u]), int(self.item_ids[i]), float(p))
            for u, i, p in zip(self.users, self.items, self.p)
        ]

    def subset(self, idx: Sequence[int] | np.ndarray) -> "ObservationSet":
        """Records at positions ``idx``, re-indexed so only present ids remain."""
        idx = np.asarray(idx, dtype=np.int64)
        u_used, users = np.unique(self.users[idx], return_inverse=True)
        i_used, items = np.unique(self.items[idx], return_inverse=True)
        return ObservationSet(
            users.astype(np.int64),
            items.astype(np.int64),
            self.p[idx],
            self.user_ids[u_used],
            self.item_ids[i_used],
        )

    @cached_property
    def by_user(self) -> list[np.ndarray]:
        """Record positions grouped per dense user index."""
        return _group(self.users, self.n_users)

    @cached_property
    def by_item(self) -> list[np.ndarray]:
        return _group(self.items, self.n_items)


def _group(keys: np.ndarray, n: int) -> list[np.ndarray]:
    order = np.argsort(keys, kind="stable")
    bounds = np.searchsorted(keys[order], np.arange(n + 1))
    return [order[bounds[k] : bounds[k + 1]] for k in range(n)]


@dataclass(frozen=True)
class KolmogorovModel:
    """Immutable Kolmogorov model.

    Parameters
    ----------
    theta : (n_users, D) array
        One PMF vector per user (rows on the unit simplex).
    psi : (n_items, D) array
        One 0/1 indicator vector per item.
    user_ids, item_ids : int arrays
        External identifiers for the rows of ``theta`` and ``psi``.
    event_labels : optional tuple of D strings
        Names of the elementary events; stored, never interpreted.
    """

    theta: np.ndarray
    psi: np.ndarray
    user_ids: np.ndarray
    item_ids: np.ndarray
    event_labels: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        psi = np.asarray(self.psi, dtype=np.float64)
        if theta.ndim != 2 or psi.ndim != 2:
            raise ValueError("theta and psi must be 2-d arrays")
        if theta.shape[1] != psi.shape[1]:
            raise ValueError(
                f"dimension mismatch: theta has D={theta.shape[1]}, psi has D={psi.shape[1]}"
            )
        if theta.shape[1] < 1:
            raise ValueError("D must be positive")
        if len(self.user_ids) != theta.shape[0] or len(self.item_ids) != psi.shape[0]:
            raise ValueError("id arrays must match theta/psi row counts")
        object.__setattr__(self, "theta", _readonly(theta))
        object.__setattr__(self, "psi", _readonly(psi))
        object.__setattr__(self, "user_ids", _readonly(np.asarray(self.user_ids, dtype=np.int64)))
        object.__setattr__(self, "item_ids", _readonly(np.asarray(self.item_ids, dtype=np.int64)))
        if self.event_labels is not None:
            labels = tuple(str(s) for s in self.event_labels)
            if len(labels) != theta.shape[1]:
                raise ValueError("event_labels must have D entries")
            object.__setattr__(self, "event_labels", labels)

    @property
    def D(self) -> int:
        return self.theta.shape[1]

    @cached_property
    def user_index(self) -> dict[int, int]:
        return _id_index(self.user_ids)

    @cached_property
    def item_index(self) -> dict[int, int]:
        return _id_index(self.item_ids)

    def replace(self, *, theta=None, psi=None) -> "KolmogorovModel":
        return KolmogorovModel(
            self.theta if theta is None else theta,
            self.psi if psi is None else psi,
            self.user_ids,
            self.item_ids,
            self.event_labels,
        )

    def align(self, obs: ObservationSet) -> tuple[np.ndarray, np.ndarray]:
        """Model row indices for every record of ``obs``; -1 where the id is unknown."""
        if np.array_equal(obs.user_ids, self.user_ids):
            u = np.asarray(obs.users)
        else:
            lut = np.array([self.user_index.get(int(x), -1) for x in obs.user_ids], dtype=np.int64)
            u = lut[obs.users] if len(obs) else np.empty(0, dtype=np.int64)
        if np.array_equal(obs.item_ids, self.item_ids):
            i = np.asarray(obs.items)
        else:
            lut = np.array([self.item_index.get(int(x), -1) for x in obs.item_ids], dtype=np.int64)
            i = lut[obs.items] if len(obs) else np.empty(0, dtype=np.int64)
        return u, i


def complement_indicator(psi: np.ndarray) -> np.ndarray:
    """Indicator of the second outcome, ``1 - psi``."""
    return 1.0 - np.asarray(psi, dtype=np.float64)


def predict(model: KolmogorovModel, u: int, i: int) -> float:
    """P[X_ui = 1] for external ids ``u`` and ``i``. Raises KeyError for unknown ids."""
    try:
        ui = model.user_index[int(u)]
    except KeyError:
        raise KeyError(f"unknown user id {u}") from None
    try:
        ii = model.item_index[int(i)]
    except KeyError:
        raise KeyError(f"unknown item id {i}") from None
    return float(model.theta[ui] @ model.psi[ii])


def predict_many(
    model: KolmogorovModel, obs: ObservationSet, *, cold_start: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Predictions for every record of ``obs`` plus a boolean cold-start mask.

    Unknown users get the uniform PMF, unknown items the all-ones indicator.
    With ``cold_start=False`` unknown ids raise KeyError instead.
    """
    u, i = model.align(obs)
    cold = (u < 0) | (i < 0)
    if cold.any() and not cold_start:
        k = int(np.flatnonzero(cold)[0])
        raise KeyError(
            f"unknown id in record ({obs.user_ids[obs.users[k]]}, {obs.item_ids[obs.items[k]]})"
        )
    D = model.D
    th = np.where((u >= 0)[:, None], model.theta[np.maximum(u, 0)], 1.0 / D) if len(u) else np.empty((0, D))
    ps = np.where((i >= 0)[:, None], model.psi[np.maximum(i, 0)], 1.0) if len(i) else np.empty((0, D))
    return np.einsum("kd,kd->k", th, ps), cold


def residuals(model: KolmogorovModel, obs: ObservationSet) -> np.ndarray:
    pred, _ = predict_many(model, obs)
    return pred - obs.p


def objective(model: KolmogorovModel, obs: ObservationSet) -> float:
    """Sum of squared errors over the observed pairs."""
    if len(obs) == 0:
        return 0.0
    r = residuals(model, obs)
    return float(r @ r)


def validate(model: KolmogorovModel) -> list[str]:
    """Invariant violations of ``model``; empty when every vector is valid."""
    problems = []
    th, ps = model.theta, model.psi
    for k in np.flatnonzero(np.abs(th.sum(axis=1) - 1.0) > SUM_TOL):
        problems.append(f"theta[{model.user_ids[k]}]: entries sum to {th[k].sum()!r}, not 1")
    for k in np.flatnonzero((th < -NEG_TOL).any(axis=1)):
        problems.append(f"theta[{model.user_ids[k]}]: negative entry {th[k].min()!r}")
    for k in np.flatnonzero(((ps != 0) & (ps != 1)).any(axis=1)):
        problems.append(f"psi[{model.item_ids[k]}]: non-binary entries")
    return problems


def model_to_dict(model: KolmogorovModel) -> dict:
    return {
        "D": model.D,
        "event_labels": list(model.event_labels) if model.event_labels else [],
        "theta": {str(u): [float(x) for x in row] for u, row in zip(model.user_ids, model.theta)},
        "psi": {str(i): [int(x) for x in row] for i, row in zip(model.item_ids, model.psi)},
    }


def model_from_dict(doc: dict) -> KolmogorovModel:
    D = int(doc["D"])
    theta = doc["theta"]
    psi = doc["psi"]
    th = np.array([theta[k] for k in theta], dtype=np.float64).reshape(len(theta), D)
    ps = np.array([psi[k] for k in psi], dtype=np.float64).reshape(len(psi), D)
    labels = doc.get("event_labels") or None
    return KolmogorovModel(
        th,
        ps,
        np.array([int(k) for k in theta], dtype=np.int64),
        np.array([int(k) for k in psi], dtype=np.int64),
        tuple(labels) if labels else None,
    )


def save_model(model: KolmogorovModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path: str | Path) -> KolmogorovModel:
    return model_from_dict(json.loads(Path(path).read_text()))


def toy_model() -> KolmogorovModel:
    """The 2-user, 2-item, D=3 example factorization of [[0.3, 0.5], [0.1, 0.2]]."""
    return KolmogorovModel(
        theta=np.array([[0.2, 0.3, 0.5], [0.1, 0.1, 0.8]]),
        psi=np.array([[0, 1, 0], [1, 1, 0]], dtype=np.float64),
        user_ids=np.array([1, 2]),
        item_ids=np.array([1, 2]),
        event_labels=("Action", "SciFi", "Drama"),
    )
