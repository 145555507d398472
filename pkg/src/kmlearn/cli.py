"""Command-line interface.

Settings come from built-in defaults, then an optional INI file
(``--config``), then ``--key value`` flags.  The merged settings are
validated before any work starts and written into every run report.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .binary_sdr import SdrConfig
from .dataio import (
    EvalConfig,
    RatingsFormatError,
    evaluate,
    fetch_ml100k,
    grid_search,
    load_ratings,
    split,
)
from .model import load_model, predict_many, save_model, ObservationSet
from .rules import mine_rules
from .sdp_mixing import SdpConfig
from .simplex_fw import FwConfig
from .trainer import TrainConfig, train

log = logging.getLogger("kmlearn")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors, not I/O errors (argparse would exit 2)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class Key:
    section: str
    name: str
    type: type
    default: object

    @property
    def flag(self) -> str:
        stem = self.name if self.section in ("train", "eval") else f"{self.section}_{self.name}"
        return "--" + stem.replace("_", "-")

    @property
    def dest(self) -> str:
        return f"{self.section}.{self.name}"


def _opt_int(s):
    return None if str(s).lower() in ("", "none") else int(s)


KEYS = [
    Key("train", "D", int, 8),
    Key("train", "bcd_iters", int, 5),
    Key("train", "lam", float, 0.0),
    Key("train", "mu", float, 0.0),
    Key("train", "seed", int, 0),
    Key("train", "q2_mode", str, "sdr"),
    Key("train", "restarts", int, 5),
    Key("train", "threads", int, 1),
    Key("fw", "epsilon", float, 1e-7),
    Key("fw", "max_iters", int, 500),
    Key("fw", "gap_tol", float, 0.0),
    Key("sdr", "m_rnd", int, 50),
    Key("sdp", "rank", _opt_int, None),
    Key("sdp", "tol", float, 1e-9),
    Key("sdp", "max_sweeps", int, 2000),
    Key("eval", "r_max", int, 5),
    Key("eval", "split_fraction", float, 0.8),
    Key("eval", "split_seed", int, 0),
    Key("eval", "validation_fraction", float, 0.9),
]
KEY_BY_DEST = {k.dest: k for k in KEYS}


def load_settings(config_path: str | None, overrides: dict) -> dict:
    """Merge defaults, the INI file and command-line overrides into ``{section.name: value}``."""
    settings = {k.dest: k.default for k in KEYS}
    if config_path:
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep "D" upper case
        try:
            with open(config_path) as fh:
                parser.read_file(fh)
        except OSError:
            raise
        except configparser.Error as exc:
            raise ConfigError(f"{config_path}: {exc}") from None
        for section in parser.sections():
            for name, raw in parser.items(section):
                dest = f"{section}.{name}"
                if dest not in KEY_BY_DEST:
                    raise ConfigError(f"{config_path}: unknown key [{section}] {name}")
                settings[dest] = _convert(KEY_BY_DEST[dest], raw)
    for dest, raw in overrides.items():
        if raw is not None:
            settings[dest] = _convert(KEY_BY_DEST[dest], raw)
    return settings


def _convert(key: Key, raw):
    try:
        return key.type(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key.flag}: cannot parse {raw!r} as {key.type.__name__}") from None


def build_configs(s: dict) -> tuple[TrainConfig, EvalConfig]:
    try:
        fw = FwConfig(s["fw.epsilon"], s["fw.max_iters"], s["fw.gap_tol"])
        sdr = SdrConfig(m_rnd=s["sdr.m_rnd"], seed=s["train.seed"])
        sdp = SdpConfig(s["sdp.rank"], s["sdp.tol"], s["sdp.max_sweeps"])
        tc = TrainConfig(
            D=s["train.D"],
            bcd_iters=s["train.bcd_iters"],
            fw=fw,
            sdr=sdr,
            sdp=sdp,
            lam=s["train.lam"],
            mu=s["train.mu"],
            seed=s["train.seed"],
            q2_mode=s["train.q2_mode"],
            restarts=s["train.restarts"],
            threads=s["train.threads"],
        )
        ec = EvalConfig(
            r_max=s["eval.r_max"],
            split_fraction=s["eval.split_fraction"],
            split_seed=s["eval.split_seed"],
            validation_fraction=s["eval.validation_fraction"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return tc, ec


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _load_model(path):
    try:
        return load_model(path)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: not a valid model file ({exc})") from None


def _read_obs(path, r_max: int) -> ObservationSet:
    obs = load_ratings(path, r_max)
    if len(obs) == 0:
        raise RatingsFormatError(0, f"{path}: no ratings")
    return obs


# --- commands ---------------------------------------------------------------


def cmd_train(args, settings) -> int:
    tc, ec = build_configs(settings)
    obs = _read_obs(args.ratings, ec.r_max)
    model, trace = train(obs, tc)
    save_model(model, args.model)
    if args.trace:
        trace.to_csv(args.trace)
    if args.report:
        _write_json(
            args.report,
            {
                "command": "train",
                "version": __version__,
                "config": settings,
                "inputs": {str(args.ratings): sha256_of(args.ratings)},
                "run_seeds": trace.run_seeds,
                "selected_restart": trace.restart,
                "restart_objectives": trace.restart_objectives,
                "final_objective": trace.final_objective,
                "final_rmse": trace.final_rmse,
                "objective_per_iter": trace.objective_per_iter,
                "psi_rejected_per_iter": trace.psi_rejected_per_iter,
                "fw_gap_per_iter": trace.fw_gap_per_iter[1:],
            },
        )
    print(f"trained {obs.n_users} users x {obs.n_items} items, D={tc.D}: "
          f"objective {trace.final_objective:.6g}, rmse {trace.final_rmse:.6g}")
    return EXIT_OK


def cmd_evaluate(args, settings) -> int:
    _, ec = build_configs(settings)
    model = _load_model(args.model)
    obs = _read_obs(args.ratings, ec.r_max)
    res = evaluate(model, obs)
    print(f"nrmse {res['rmse']:.6f} over {res['n']} records ({res['cold_start']} cold-start)")
    if args.report:
        res = dict(res)
        res.update(
            command="evaluate",
            nrmse=res["rmse"],
            inputs={str(args.model): sha256_of(args.model), str(args.ratings): sha256_of(args.ratings)},
            config=settings,
        )
        _write_json(args.report, res)
    return EXIT_OK


def cmd_predict(args, settings) -> int:
    model = _load_model(args.model)
    if args.pairs:
        pairs = []
        with open(args.pairs) as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts:
                    continue
                try:
                    pairs.append((int(parts[0]), int(parts[1])))
                except (ValueError, IndexError):
                    raise RatingsFormatError(lineno, f"expected 'user item', got {line.strip()!r}") from None
    else:
        if args.user is None or args.item is None:
            raise ConfigError("give --user and --item, or --pairs FILE")
        pairs = [(args.user, args.item)]
    obs = ObservationSet.from_records((u, i, 0.0) for u, i in pairs)
    try:
        pred, cold = predict_many(model, obs, cold_start=args.cold_start)
    except KeyError as exc:
        print(f"error: {exc.args[0]} (use --cold-start for defaults)", file=sys.stderr)
        return EXIT_CONFIG
    w = csv.writer(sys.stdout, delimiter="\t", lineterminator="\n")
    for (u, i), p, c in zip(pairs, pred, cold):
        w.writerow([u, i, repr(float(p))] + (["cold"] if c else []))
    return EXIT_OK


def cmd_rules(args, settings) -> int:
    model = _load_model(args.model)
    report = mine_rules(model, args.min_beta)
    if args.out:
        report.save(args.out)
    print(f"items with influence >= {args.min_beta}:")
    for item, b in report.influential():
        print(f"  {item}\t{b:.4f}")
    print("maximal items: " + (" ".join(map(str, report.maximal_set)) or "(none)"))
    if args.show_rules:
        for r in report.rules:
            print(f"  {r}")
    return EXIT_OK


def cmd_bench_sdr(args, settings) -> int:
    from .bench import sdr_error_rate

    tc, _ = build_configs(settings)
    rows = []
    for D in args.dims:
        try:
            res = sdr_error_rate(D, tc, n_users=args.users, n_items=args.items, runs=args.runs, seed=tc.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        rows.append({"D": D, "instances": res.audited, "mismatches": res.mismatches, "rate": res.rate})
        print(f"D={D}: {res.mismatches}/{res.audited} mismatches, rate {res.rate:.4g}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["D", "instances", "mismatches", "rate"])
            w.writeheader()
            w.writerows(rows)
    return EXIT_OK


def _floats(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad grid {s!r}; expected comma-separated numbers") from None


def cmd_grid_search(args, settings) -> int:
    tc, ec = build_configs(settings)
    obs = _read_obs(args.ratings, ec.r_max)
    lam_grid, mu_grid = _floats(args.lambda_grid), _floats(args.mu_grid)
    if not lam_grid or not mu_grid:
        raise ConfigError("grids must be non-empty")
    res = grid_search(obs, lam_grid, mu_grid, tc, validation_fraction=ec.validation_fraction, seed=ec.split_seed)
    if args.out:
        res.to_csv(args.out)
    for row in res.table:
        print(f"lam={row['lam']:g}\tmu={row['mu']:g}\tval_nrmse={row['val_nrmse']:.6f}")
    print(f"best lam={res.lam:g} mu={res.mu:g}")
    return EXIT_OK


def cmd_split(args, settings) -> int:
    _, ec = build_configs(settings)
    obs = _read_obs(args.ratings, ec.r_max)
    from .dataio import dump_ratings

    tr, te = split(obs, ec.split_fraction, ec.split_seed)
    Path(args.train_out).write_text(dump_ratings(tr, ec.r_max))
    Path(args.test_out).write_text(dump_ratings(te, ec.r_max))
    if args.report:
        _write_json(
            args.report,
            {
                "command": "split",
                "inputs": {str(args.ratings): sha256_of(args.ratings)},
                "fraction": ec.split_fraction,
                "seed": ec.split_seed,
                "n_train": len(tr),
                "n_test": len(te),
            },
        )
    print(f"{len(tr)} train / {len(te)} test records")
    return EXIT_OK


def cmd_fetch_ml100k(args, settings) -> int:
    path = fetch_ml100k(args.dest, args.wheel)
    print(path)
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _add_setting_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("settings (override the config file)")
    for k in KEYS:
        alt = "--" + k.flag[2:].replace("-", "_")
        names = [k.flag] if alt == k.flag else [k.flag, alt]
        g.add_argument(*names, dest=k.dest, default=None, metavar=k.name.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kmlearn", description="Train, evaluate and mine rules from Kolmogorov models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="INI file with [train], [fw], [sdr], [sdp], [eval] sections")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model to a ratings file")
    p.add_argument("ratings")
    p.add_argument("-o", "--model", required=True, help="output model JSON")
    p.add_argument("--trace", help="per-iteration trace CSV")
    p.add_argument("--report", help="run report JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="NRMSE of a model on a ratings file")
    p.add_argument("model")
    p.add_argument("ratings")
    p.add_argument("--report", help="metrics JSON with per-user/per-item summaries")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="predicted probabilities for user/item pairs")
    p.add_argument("model")
    p.add_argument("--user", type=int)
    p.add_argument("--item", type=int)
    p.add_argument("--pairs", help="file of 'user item' lines")
    p.add_argument("--cold-start", action="store_true", help="use defaults for unknown ids")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("rules", help="mine implication rules from a model")
    p.add_argument("model")
    p.add_argument("--min-beta", type=float, default=0.5)
    p.add_argument("-o", "--out", help="rule report JSON")
    p.add_argument("--show-rules", action="store_true")
    p.set_defaults(func=cmd_rules)

    p = sub.add_parser("bench-sdr", help="SDR-vs-exhaustive mismatch rate on synthetic data")
    p.add_argument("--dims", type=int, nargs="+", default=[4, 8, 10])
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--users", type=int, default=20)
    p.add_argument("--items", type=int, default=40)
    p.add_argument("-o", "--out", help="CSV of rates per D")
    p.set_defaults(func=cmd_bench_sdr)

    p = sub.add_parser("grid-search", help="choose (lam, mu) on a held-out validation split")
    p.add_argument("ratings")
    p.add_argument("--lambda-grid", default="0,1,5,20")
    p.add_argument("--mu-grid", default="0,0.5,2")
    p.add_argument("-o", "--out", help="grid table CSV")
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("split", help="seeded train/test split of a ratings file")
    p.add_argument("ratings")
    p.add_argument("train_out")
    p.add_argument("test_out")
    p.add_argument("--report", help="split manifest JSON")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fetch-ml100k", help="download MovieLens 100K ratings in u.data layout")
    p.add_argument("--dest", help="output path (default data/ml-100k/u.data)")
    p.add_argument("--wheel", help="use a local pytorch-widedeep wheel instead of pip")
    p.set_defaults(func=cmd_fetch_ml100k)

    for name, sp in sub.choices.items():
        if name != "fetch-ml100k":
            _add_setting_flags(sp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides = {k.dest: getattr(args, k.dest, None) for k in KEYS}
    try:
        settings = load_settings(args.config, overrides)
        build_configs(settings)
        return args.func(args, settings)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RatingsFormatError, InputError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FloatingPointError, ArithmeticError, ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
