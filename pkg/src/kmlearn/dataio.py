"""Ratings ingestion, train/test splitting, error metrics and the (lam, mu) grid search."""

from __future__ import annotations

import csv
import io
import logging
import os
import zipfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import KolmogorovModel, ObservationSet, predict_many

log = logging.getLogger(__name__)


class RatingsFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class EvalConfig:
    r_max: int = 5
    split_fraction: float = 0.8
    split_seed: int = 0
    validation_fraction: float = 0.9
    eta: float = 0.25  # only meaningful for raw-rating predictors

    def __post_init__(self):
        if self.r_max < 1:
            raise ValueError("r_max must be >= 1")
        for name in ("split_fraction", "validation_fraction"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must be in (0, 1)")


def _lines(source) -> Iterable[str]:
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            yield from fh
    else:
        yield from source


def load_ratings(source, r_max: int) -> ObservationSet:
    """Parse ``user item rating [timestamp]`` lines into probabilities ``rating / r_max``.

    ``source`` is a path or an iterable of lines.  Blank lines are skipped.
    """
    records = []
    seen = set()
    for lineno, line in enumerate(_lines(source), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) not in (3, 4):
            raise RatingsFormatError(lineno, f"expected 3 or 4 fields, got {len(parts)}")
        try:
            u, i, R = int(parts[0]), int(parts[1]), int(parts[2])
            if len(parts) == 4:
                int(parts[3])
        except ValueError:
            raise RatingsFormatError(lineno, f"non-integer field in {line.strip()!r}") from None
        if not 1 <= R <= r_max:
            raise RatingsFormatError(lineno, f"rating {R} outside [1, {r_max}]")
        if (u, i) in seen:
            raise RatingsFormatError(lineno, f"duplicate pair ({u}, {i})")
        seen.add((u, i))
        records.append((u, i, R / r_max))
    return ObservationSet.from_records(records)


def dump_ratings(obs: ObservationSet, r_max: int) -> str:
    """Inverse of :func:`load_ratings` (timestamps are written as 0)."""
    out = io.StringIO()
    for u, i, p in obs.records():
        out.write(f"{u}\t{i}\t{int(round(p * r_max))}\t0\n")
    return out.getvalue()


def split(obs: ObservationSet, fraction: float, seed: int) -> tuple[ObservationSet, ObservationSet]:
    """Seeded global record-level shuffle; the first ``round(fraction * n)`` go to train."""
    n = len(obs)
    if n < 2:
        raise ValueError("need at least two records to split")
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return obs.subset(np.sort(perm[:n_train])), obs.subset(np.sort(perm[n_train:]))


def rmse(model: KolmogorovModel, obs: ObservationSet) -> float:
    """Root-mean-square error; unknown users/items fall back to cold-start defaults."""
    return evaluate(model, obs)["rmse"]


def nrmse(model: KolmogorovModel, obs: ObservationSet, r_max: int | None = None) -> float:
    """Normalized RMSE. On probability-scaled data ``p = R / r_max`` this equals :func:`rmse`."""
    return rmse(model, obs)


def evaluate(model: KolmogorovModel, obs: ObservationSet) -> dict:
    if len(obs) == 0:
        raise ValueError("empty observation set")
    pred, cold = predict_many(model, obs, cold_start=True)
    err = pred - obs.p
    warm = ~cold
    return {
        "rmse": float(np.sqrt(np.mean(err**2))),
        "n": int(len(obs)),
        "cold_start": int(cold.sum()),
        "rmse_warm": float(np.sqrt(np.mean(err[warm] ** 2))) if warm.any() else float("nan"),
        "per_user_mean_abs": _group_mean(np.abs(err), obs.users, obs.user_ids),
        "per_item_mean_abs": _group_mean(np.abs(err), obs.items, obs.item_ids),
    }


def _group_mean(x, keys, ids) -> dict:
    sums = np.bincount(keys, weights=x, minlength=len(ids))
    counts = np.bincount(keys, minlength=len(ids))
    return {int(i): float(s / c) for i, s, c in zip(ids, sums, counts) if c}


@dataclass
class GridResult:
    lam: float
    mu: float
    table: list[dict]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["lam", "mu", "val_nrmse", "train_objective"])
            w.writeheader()
            for row in self.table:
                w.writerow(row)


def grid_search(
    obs: ObservationSet,
    lambda_grid: Sequence[float],
    mu_grid: Sequence[float],
    base_cfg,
    *,
    validation_fraction: float = 0.9,
    seed: int = 0,
) -> GridResult:
    """Pick ``(lam, mu)`` by held-out validation NRMSE.

    ``obs`` is split once into fit/validation parts; every grid point is
    trained on the fit part.  Ties go to the lexicographically smallest pair.
    """
    from .trainer import train

    if not lambda_grid or not mu_grid:
        raise ValueError("grids must be non-empty")
    fit, val = split(obs, validation_fraction, seed)
    table = []
    for lam in sorted(lambda_grid):
        for mu in sorted(mu_grid):
            cfg = replace(base_cfg, lam=float(lam), mu=float(mu))
            model, trace = train(fit, cfg)
            score = nrmse(model, val)
            log.info("grid lam=%g mu=%g val_nrmse=%.5f", lam, mu, score)
            table.append(
                {"lam": float(lam), "mu": float(mu), "val_nrmse": score, "train_objective": trace.final_objective}
            )
    best = min(table, key=lambda r: (r["val_nrmse"], r["lam"], r["mu"]))
    return GridResult(best["lam"], best["mu"], table)


ML100K_MEMBER = "pytorch_widedeep/datasets/data/MovieLens100k_data.parquet.brotli"


def ml100k_path() -> Path:
    """Where the MovieLens 100K ``u.data`` file is expected.

    ``KMLEARN_ML100K`` overrides the default ``data/ml-100k/u.data`` under
    the current directory.
    """
    return Path(os.environ.get("KMLEARN_ML100K", Path("data") / "ml-100k" / "u.data"))


def fetch_ml100k(dest: str | Path | None = None, wheel: str | Path | None = None) -> Path:
    """Write MovieLens 100K ratings in ``u.data`` layout to ``dest``.

    The ratings are taken from the copy bundled with the ``pytorch-widedeep``
    wheel (downloaded with pip unless ``wheel`` is given).  Needs pandas and
    a parquet engine.
    """
    import subprocess
    import sys
    import tempfile

    import pandas as pd

    dest = Path(dest) if dest is not None else ml100k_path()
    with tempfile.TemporaryDirectory() as tmp:
        if wheel is None:
            subprocess.run(
                [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, "pytorch-widedeep==1.7.0"],
                check=True,
            )
            wheel = next(Path(tmp).glob("pytorch_widedeep-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            df = pd.read_parquet(io.BytesIO(zf.read(ML100K_MEMBER)))
    df = df[["user_id", "movie_id", "rating", "timestamp"]]
    if len(df) != 100_000:
        raise ValueError(f"unexpected record count {len(df)}")
    dest.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(dest, sep="\t", header=False, index=False)
    return dest
