"""Command-line front end: ``gsslogit {simulate,fit,evaluate,batch,diagnose}``.

Any flag may also come from a JSON file passed with ``--config``; flags given
on the command line win. Every command writes ``config.json`` with the fully
resolved parameters next to its outputs.

Exit codes: 0 success, 1 usage, 2 data or consistency problem, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import __version__
from . import files
from .core import (
    ConsistencyError,
    DegenerateColumnError,
    Hyperparams,
    IllConditionedError,
    InitPolicy,
    StructuralError,
    default_hyperparams,
    validate_design,
)
from .distributions import derive_seed
from .inference import compute_metrics, roc_curve, select_median_probability_model, summarize
from .oracle import MAX_ENUM_GROUPS, EnumerationSizeError, compare_chain_to_oracle, condition_report, enumerate_posterior
from .pipeline import ENGINES, fit
from .sampler_gibbs import GibbsChain, SamplerError, initial_state
from .simulate import COVARIANCES, DESIGNS, SETTINGS, SimConfig, gen_dataset

log = logging.getLogger("gsslogit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

# the chain seed used for a simulated replication, derived from its data seed
CHAIN_SEED_INDEX = 7

_SIM = dict(design=1, setting=4, cov="isotropic", rho=0.5, n=100, n_test=100, seed=0)
_HYPER = dict(tau2=None, q=None, nu=7.3, delta=0.01)
DEFAULTS = {
    "simulate": dict(_SIM, out="sim"),
    "fit": dict(
        _HYPER, data=".", out=None, engine="gibbs", burnin=2000, samples=2000, seed=0, draws_format="csv",
        init_active=3,
    ),
    "evaluate": dict(data=".", fit=None, out=None, mode="selection", mspe_scale="probability"),
    "batch": dict(
        _SIM, **_HYPER, out="batch", engine=["gibbs"], reps=50, burnin=2000, samples=2000, jobs=1,
        mspe_scale="probability", draws_format="csv", init_active=3,
    ),
    "diagnose": dict(
        _HYPER, data=".", out=None, d=0.0, d_prime=1.0, n_probe=2000, seed=0, oracle="auto", oracle_sweeps=20000,
        oracle_burnin=500,
    ),
}


class UsageError(Exception):
    pass


class MissingTruthError(ConsistencyError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- argument handling


def _add_sim(p):
    p.add_argument("--design", type=int)
    p.add_argument("--setting", type=int)
    p.add_argument("--cov", help=f"one of {', '.join(COVARIANCES)}")
    p.add_argument("--rho", type=float)
    p.add_argument("--n", type=int, help="training rows")
    p.add_argument("--n-test", type=int)


def _add_hyper(p):
    p.add_argument("--tau2", type=float, help="slab variance (default: the size rule)")
    p.add_argument("--q", type=float, help="prior inclusion probability (default: 1/r)")
    p.add_argument("--nu", type=float)
    p.add_argument("--delta", type=float, help="exponent offset in the τ² rule")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gsslogit", description="Group spike-and-slab logistic selection.")
    parser.add_argument("--version", action="version", version=f"gsslogit {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file supplying any of the flags")
    common.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("simulate", parents=[common], argument_default=argparse.SUPPRESS, help="generate a dataset")
    _add_sim(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("fit", parents=[common], argument_default=argparse.SUPPRESS, help="run a sampler")
    p.add_argument("--data", help="folder with X.csv, e.csv, groups.json")
    p.add_argument("--out", help="output folder (default: <data>/fit_<engine>)")
    p.add_argument("--engine")
    p.add_argument("--burnin", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--draws-format", help="csv or bin")
    p.add_argument("--init-active", type=int, help="groups switched on at the start")
    _add_hyper(p)

    p = sub.add_parser("evaluate", parents=[common], argument_default=argparse.SUPPRESS, help="score a fit")
    p.add_argument("--data")
    p.add_argument("--fit", help="folder written by fit")
    p.add_argument("--out", help="output folder (default: the fit folder)")
    p.add_argument("--mode", help="selection (needs truth.json) or prediction")
    p.add_argument("--mspe-scale", help="probability or linear")

    p = sub.add_parser("batch", parents=[common], argument_default=argparse.SUPPRESS, help="replicated simulation study")
    _add_sim(p)
    p.add_argument("--seed", type=int, help="base seed; replication seeds are derived from it")
    p.add_argument("--engine", nargs="+")
    p.add_argument("--reps", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--mspe-scale")
    p.add_argument("--draws-format")
    p.add_argument("--init-active", type=int)
    p.add_argument("--out")
    _add_hyper(p)

    p = sub.add_parser("diagnose", parents=[common], argument_default=argparse.SUPPRESS, help="condition report and oracle check")
    p.add_argument("--data")
    p.add_argument("--out", help="output folder (default: the data folder)")
    p.add_argument("--d", type=float)
    p.add_argument("--d-prime", type=float)
    p.add_argument("--n-probe", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--oracle", help="auto (only when r <= 4), yes or no")
    p.add_argument("--oracle-sweeps", type=int)
    p.add_argument("--oracle-burnin", type=int)
    _add_hyper(p)
    return parser


def resolve(command: str, cli: dict) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = dict(DEFAULTS[command])
    cli = dict(cli)
    path = cli.pop("config", None)
    cli.pop("verbose", None)
    if path is not None:
        try:
            from_file = files.read_json(path)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config file {path}: {exc}") from None
        if not isinstance(from_file, dict):
            raise UsageError("config file must hold a JSON object")
        from_file = {k.replace("-", "_"): v for k, v in from_file.items()}
        # keys added by the config echo
        from_file.pop("command", None)
        from_file.pop("version", None)
        unknown = sorted(set(from_file) - set(cfg))
        if unknown:
            raise UsageError(f"unknown keys in config file: {', '.join(unknown)}")
        cfg.update(from_file)
    cfg.update(cli)
    _check(command, cfg)
    return cfg


def _need(cond: bool, message: str):
    if not cond:
        raise UsageError(message)


def _check(command: str, c: dict) -> None:
    if "design" in c:
        _need(c["design"] in DESIGNS, f"--design must be one of {sorted(DESIGNS)}")
        _need(c["setting"] in SETTINGS, f"--setting must be one of {sorted(SETTINGS)}")
        _need(c["cov"] in COVARIANCES, f"--cov must be one of {', '.join(COVARIANCES)}")
        _need(-1 < c["rho"] < 1, "--rho must lie in (-1, 1)")
        _need(c["n"] >= 2 and c["n_test"] >= 0, "--n must be at least 2 and --n-test nonnegative")
    if "engine" in c:
        engines = c["engine"] if isinstance(c["engine"], list) else [c["engine"]]
        for eng in engines:
            _need(eng in ENGINES, f"--engine must be one of {', '.join(sorted(ENGINES))}")
    if "samples" in c:
        _need(c["samples"] >= 1, "--samples must be at least 1: selection needs posterior draws")
        _need(c["burnin"] >= 0, "--burnin must be nonnegative")
    if "draws_format" in c:
        _need(c["draws_format"] in ("csv", "bin"), "--draws-format must be csv or bin")
    if "mspe_scale" in c:
        _need(c["mspe_scale"] in ("probability", "linear"), "--mspe-scale must be probability or linear")
    if "reps" in c:
        _need(c["reps"] >= 1, "--reps must be at least 1")
        _need(c["jobs"] >= 1, "--jobs must be at least 1")
    if "mode" in c:
        _need(c["mode"] in ("selection", "prediction"), "--mode must be selection or prediction")
        _need(c["fit"] is not None, "evaluate needs --fit")
    if "oracle" in c:
        _need(c["oracle"] in ("auto", "yes", "no"), "--oracle must be auto, yes or no")
        _need(c["oracle_sweeps"] >= 1 and c["oracle_burnin"] >= 0, "oracle sweep counts must be positive")
        _need(0 <= c["d"] < (1 + c["d"]) / 2 <= c["d_prime"] <= 1, "need 0 <= d < (1+d)/2 <= d' <= 1")
    if "tau2" in c:
        _need(c["tau2"] is None or c["tau2"] > 0, "--tau2 must be positive")
        _need(c["q"] is None or 0 < c["q"] < 1, "--q must lie in (0, 1)")
        _need(c["nu"] > 2, "--nu must exceed 2")
    if "init_active" in c:
        _need(c["init_active"] >= 0, "--init-active must be nonnegative")


def _hyper(c: dict, n: int, r: int) -> Hyperparams:
    base = default_hyperparams(n, r, delta=c["delta"], nu=c["nu"])
    return Hyperparams(
        tau2=base.tau2 if c["tau2"] is None else c["tau2"],
        q=base.q if c["q"] is None else c["q"],
        nu=c["nu"],
    )


def _hyper_dict(h: Hyperparams) -> dict:
    return {"tau2": h.tau2, "q": h.q, "nu": h.nu, "sigma02": h.sigma02}


def _echo(folder: Path, command: str, cfg: dict) -> None:
    files.write_json(folder / "config.json", dict(cfg, command=command, version=__version__))


# ---------------------------------------------------------------- data loading


def load_data(folder) -> SimpleNamespace:
    """Training design, labels and (when present) test set and truth from a dataset folder."""
    folder = Path(folder)
    x = files.read_matrix(folder / "X.csv")
    e = files.read_labels(folder / "e.csv")
    if e.size != x.shape[0]:
        raise ConsistencyError(f"e.csv has {e.size} rows but X.csv has {x.shape[0]}", index=min(e.size, x.shape[0]) + 1)
    groups = files.read_groups(folder / "groups.json", x.shape[1])
    design = validate_design(x, groups)
    out = SimpleNamespace(folder=folder, design=design, e=e, x_raw=x, test_design=None, e_test=None, truth=None)
    if (folder / "X_test.csv").exists():
        xt = files.read_matrix(folder / "X_test.csv")
        et = files.read_labels(folder / "e_test.csv")
        if xt.shape[1] != x.shape[1]:
            raise ConsistencyError(f"X_test.csv has {xt.shape[1]} columns, X.csv has {x.shape[1]}")
        if xt.shape[0] != et.size:
            raise ConsistencyError("X_test.csv and e_test.csv disagree on row count")
        out.test_design = design.transform(xt)
        out.e_test = et
    if (folder / "truth.json").exists():
        truth = files.read_json(folder / "truth.json")
        model = tuple(int(j) - 1 for j in truth["true_model"])
        bad = [j + 1 for j in model if not 0 <= j < design.r]
        if bad:
            raise ConsistencyError(f"truth.json names group {bad[0]} but there are {design.r}", index=bad[0])
        beta0 = np.asarray(truth["beta0"], dtype=float)
        if beta0.shape != (design.p,):
            raise ConsistencyError(f"truth.json β₀ has length {beta0.size}, expected {design.p}")
        out.truth = SimpleNamespace(true_model=model, beta0=beta0)
    return out


# ---------------------------------------------------------------- commands


def _sim_config(c: dict, seed: int) -> SimConfig:
    return SimConfig.from_design(
        c["design"], setting=c["setting"], covariance=c["cov"], rho=c["rho"], n=c["n"], n_test=c["n_test"], seed=seed
    )


def write_dataset(folder: Path, ds, config: SimConfig) -> None:
    folder.mkdir(parents=True, exist_ok=True)
    files.write_design(folder / "X.csv", ds.x_raw)
    files.write_labels(folder / "e.csv", ds.e)
    files.write_groups(folder / "groups.json", ds.design.groups)
    files.write_json(
        folder / "truth.json",
        {
            "beta0": ds.beta0,
            "true_model": [j + 1 for j in ds.true_model],
            "seed": config.seed,
            "attempts": ds.attempts,
            "design": {"n": config.n, "r": config.r, "n_active": config.n_active, "setting": config.setting,
                       "covariance": config.covariance, "rho": config.rho},
        },
    )
    if config.n_test:
        files.write_design(folder / "X_test.csv", ds.x_test_raw)
        files.write_labels(folder / "e_test.csv", ds.e_test)


def cmd_simulate(c: dict) -> Path:
    out = Path(c["out"])
    config = _sim_config(c, c["seed"])
    ds = gen_dataset(config)
    write_dataset(out, ds, config)
    _echo(out, "simulate", c)
    log.info("wrote %s (n=%d, p=%d, r=%d)", out, ds.design.n, ds.design.p, ds.design.r)
    return out


def cmd_fit(c: dict) -> Path:
    data = load_data(c["data"])
    design = data.design
    out = Path(c["out"] or Path(c["data"]) / f"fit_{c['engine']}")
    out.mkdir(parents=True, exist_ok=True)
    hyper = _hyper(c, design.n, design.r)
    t0 = time.perf_counter()
    draws = fit(
        design, data.e, c["engine"], hyper, c["burnin"], c["samples"], c["seed"],
        init=InitPolicy(n_active=c["init_active"]), store_beta=False,
    )
    seconds = time.perf_counter() - t0
    report = summarize(draws, design, data.e)
    if c["draws_format"] == "bin":
        files.write_draws_bin(out / "draws.bin", draws.z_draws)
    else:
        files.write_draws_csv(out / "draws.csv", draws.z_draws)
    files.write_csv(
        out / "inclusion.csv", ["group_id", "probability"],
        ([j + 1, float(pr)] for j, pr in enumerate(report.inclusion_prob)),
    )
    files.write_json(
        out / "selection.json",
        {
            "model": [j + 1 for j in report.selected],
            "highest_frequency_model": [j + 1 for j in report.highest_frequency],
            "threshold": 0.5,
            "refit_beta": report.refit_beta,
            "refit_scale": "standardized",
        },
    )
    files.write_json(
        out / "run_meta.json",
        {
            "engine": c["engine"],
            "seed": c["seed"],
            "n_burnin": c["burnin"],
            "n_samples": c["samples"],
            "seconds": seconds,
            "hyperparams": _hyper_dict(hyper),
            "n": design.n,
            "p": design.p,
            "r": design.r,
            "config": dict(c),
        },
    )
    _echo(out, "fit", c)
    log.info("%s: selected %s in %.1fs", c["engine"], [j + 1 for j in report.selected], seconds)
    return out


def cmd_evaluate(c: dict) -> Path:
    data = load_data(c["data"])
    fit_dir = Path(c["fit"])
    out = Path(c["out"] or fit_dir)
    out.mkdir(parents=True, exist_ok=True)
    sel = files.read_json(fit_dir / "selection.json")
    selected = tuple(int(j) - 1 for j in sel["model"])
    beta = np.asarray(sel["refit_beta"], dtype=float)
    if beta.shape != (data.design.p,):
        raise ConsistencyError(f"selection.json has {beta.size} coefficients, data has {data.design.p} columns")
    has_test = data.test_design is not None and data.e_test.size > 0
    result = {"model": [j + 1 for j in selected]}
    if c["mode"] == "selection":
        if data.truth is None:
            raise MissingTruthError(f"selection metrics need {Path(c['data']) / 'truth.json'}; use --mode prediction")
        metrics = compute_metrics(
            selected, data.truth.true_model, data.design.r, beta,
            data.test_design if has_test else None, data.e_test if has_test else None, c["mspe_scale"],
        )
        result.update(metrics.as_dict())
    elif has_test:
        lin = data.test_design @ beta
        pred = 1.0 / (1.0 + np.exp(-lin)) if c["mspe_scale"] == "probability" else lin
        result["mspe"] = float(np.mean((pred - data.e_test) ** 2))
    if has_test and 0 < data.e_test.sum() < data.e_test.size:
        roc = roc_curve(beta, data.test_design, data.e_test)
        result["auc"] = roc.auc
        files.write_csv(out / "roc.csv", ["threshold", "fpr", "tpr"], zip(roc.thresholds, roc.fpr, roc.tpr))
    files.write_json(out / "metrics.json", result)
    _echo(out, "evaluate", c)
    return out


def _one_replication(c: dict, k: int) -> list[dict]:
    seed = derive_seed(c["seed"], k)
    rep_dir = Path(c["out"]) / f"rep_{k:03d}"
    rows = []
    try:
        cmd_simulate(dict(_pick(c, _SIM), seed=seed, out=str(rep_dir / "data")))
    except Exception as exc:  # noqa: BLE001 - a batch records failures and carries on
        return [{"engine": eng, "rep": k, "seed": seed, "error": repr(exc)} for eng in c["engine"]]
    for eng in c["engine"]:
        fit_dir = rep_dir / eng
        try:
            fit_cfg = dict(
                _pick(c, _HYPER), data=str(rep_dir / "data"), out=str(fit_dir), engine=eng, burnin=c["burnin"],
                samples=c["samples"], seed=derive_seed(seed, CHAIN_SEED_INDEX), draws_format=c["draws_format"],
                init_active=c["init_active"],
            )
            cmd_fit(fit_cfg)
            cmd_evaluate(dict(data=str(rep_dir / "data"), fit=str(fit_dir), out=None, mode="selection",
                              mspe_scale=c["mspe_scale"]))
            m = files.read_json(fit_dir / "metrics.json")
            rows.append({"engine": eng, "rep": k, "seed": seed, "error": None, **m})
        except Exception as exc:  # noqa: BLE001
            fit_dir.mkdir(parents=True, exist_ok=True)
            (fit_dir / "error.txt").write_text(repr(exc) + "\n")
            rows.append({"engine": eng, "rep": k, "seed": seed, "error": repr(exc)})
    return rows


def _pick(c: dict, keys) -> dict:
    return {k: c[k] for k in keys}


METRIC_KEYS = ("sensitivity", "specificity", "mcc", "mspe", "n_errors")


def cmd_batch(c: dict) -> Path:
    c = dict(c, engine=list(c["engine"]) if isinstance(c["engine"], (list, tuple)) else [c["engine"]])
    out = Path(c["out"])
    out.mkdir(parents=True, exist_ok=True)
    if c["jobs"] == 1:
        per_rep = [_one_replication(c, k) for k in range(c["reps"])]
    else:
        from joblib import Parallel, delayed

        per_rep = Parallel(n_jobs=c["jobs"])(delayed(_one_replication)(c, k) for k in range(c["reps"]))
    rows = [row for rep in per_rep for row in rep]
    files.write_csv(
        out / "replications.csv", ["engine", "rep", "seed", *METRIC_KEYS, "failed"],
        ([r["engine"], r["rep"], r["seed"], *(r.get(k, math.nan) for k in METRIC_KEYS), int(r["error"] is not None)]
         for r in rows),
    )
    summary = []
    for eng in c["engine"]:
        ok = [r for r in rows if r["engine"] == eng and r["error"] is None]
        means = [float(np.mean([r[k] for r in ok])) if ok else math.nan for k in METRIC_KEYS]
        summary.append([c["design"], c["setting"], c["cov"], eng, *means, len(ok), c["reps"] - len(ok)])
    files.write_csv(
        out / "summary.csv", ["design", "setting", "covariance", "engine", *METRIC_KEYS, "n_ok", "n_failed"], summary
    )
    failures = [r for r in rows if r["error"] is not None]
    if failures:
        files.write_json(out / "failures.json", failures)
        log.warning("%d of %d runs failed; see failures.json", len(failures), len(rows))
    _echo(out, "batch", c)
    return out


def frozen_latents(design, e, hyper: Hyperparams, n_sweeps: int, seed: int):
    """Latent responses and scales after a short Gibbs run, used to freeze the oracle problem."""
    rng = np.random.default_rng(seed)
    chain = GibbsChain(design, e, hyper, initial_state(design, e, hyper, InitPolicy(n_active=min(3, design.r)), rng))
    for _ in range(n_sweeps):
        chain.sweep(rng)
    return chain.state.y.copy(), chain.state.s2.copy()


def cmd_diagnose(c: dict) -> Path:
    data = load_data(c["data"])
    if data.truth is None:
        raise MissingTruthError(f"diagnose needs {Path(c['data']) / 'truth.json'}")
    design = data.design
    out = Path(c["out"] or c["data"])
    out.mkdir(parents=True, exist_ok=True)
    hyper = _hyper(c, design.n, design.r)
    dataset = SimpleNamespace(design=design, true_model=data.truth.true_model, beta0=data.truth.beta0, x_raw=data.x_raw)
    report = condition_report(dataset, hyper, d=c["d"], d_prime=c["d_prime"], n_probe=c["n_probe"], seed=c["seed"],
                              delta=c["delta"])
    files.write_json(out / "condition_report.json", report.as_dict())
    want = c["oracle"] == "yes" or (c["oracle"] == "auto" and design.r <= 4)
    if want:
        if design.r > MAX_ENUM_GROUPS:
            raise EnumerationSizeError(f"oracle needs r <= {MAX_ENUM_GROUPS}, data has r = {design.r}")
        y, s2 = frozen_latents(design, data.e, hyper, c["oracle_burnin"], c["seed"])
        exact = enumerate_posterior(design, y, s2, hyper)
        tv = {eng: compare_chain_to_oracle(eng, design, y, s2, hyper, c["oracle_sweeps"], seed=c["seed"])
              for eng in sorted(ENGINES)}
        top = int(np.argmax(exact.probs))
        files.write_json(
            out / "oracle_tv.json",
            {
                "tv": max(tv.values()),
                "tv_by_engine": tv,
                "n_sweeps": c["oracle_sweeps"],
                "exact_top_model": [j + 1 for j in exact.models[top]],
                "exact_top_prob": float(exact.probs[top]),
                "exact_inclusion": exact.inclusion(design.r),
                "median_probability_model": [j + 1 for j in select_median_probability_model(exact.inclusion(design.r))],
            },
        )
    _echo(out, "diagnose", c)
    return out


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "batch": cmd_batch,
    "diagnose": cmd_diagnose,
}

_DATA_ERRORS = (ConsistencyError, StructuralError, DegenerateColumnError, EnumerationSizeError, OSError, KeyError, ValueError)
_NUMERIC_ERRORS = (IllConditionedError, SamplerError, FloatingPointError, np.linalg.LinAlgError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        args = {k: v for k, v in vars(ns).items() if k != "command"}
        logging.basicConfig(level=logging.INFO if args.get("verbose") else logging.WARNING,
                            format="%(levelname)s %(message)s")
        cfg = resolve(ns.command, args)
        COMMANDS[ns.command](cfg)
    except UsageError as exc:
        print(f"gsslogit: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERIC_ERRORS as exc:
        print(f"gsslogit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _DATA_ERRORS as exc:
        print(f"gsslogit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
