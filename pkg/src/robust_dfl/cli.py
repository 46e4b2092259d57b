"""Command-line driver.

Subcommands: ``simulate``, ``calibrate``, ``localize``, ``track``, ``sweep`` and
``eigen-report``. Input data comes from ``--data-dir`` (a directory written by
``simulate``) or is simulated in-process from ``--scenario`` (a reference name
or a scenario JSON path). ``--config`` names a JSON file whose keys provide
defaults for any flag; flags given on the command line win.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import covariance as cov
from .estimators import save_operator
from .metrics import eigen_network_report, write_eigen_network_csv, write_scree_csv
from .pipeline import (
    SWEEP_PARAMETERS,
    Dataset,
    PipelineError,
    PipelineParams,
    build_operator,
    effective,
    operator_fingerprint,
    run_pipeline,
    save_simulation,
    sweep,
)
from .simulator import ScenarioConfig, load_scenario, reference_scenario

PARAM_FLAGS = {
    "estimator": str,
    "k": int,
    "alpha": float,
    "sigma_x2": float,
    "sigma_v2": float,
    "sigma_w2": float,
    "window": int,
}


def _add_common(p: argparse.ArgumentParser, params: bool = True) -> None:
    p.add_argument("--config", help="JSON file with default values for any option")
    p.add_argument("--scenario", help="reference scenario name (calm, windy) or scenario JSON")
    p.add_argument("--data-dir", help="directory written by 'simulate'")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out-dir", help="where output files go")
    if params:
        p.add_argument("--estimator", choices=["vrti", "subvrt", "lsvrt"])
        p.add_argument("--k", type=int, help="SubVRT intrinsic subspace dimension")
        p.add_argument("--alpha", type=float, help="Tikhonov regularization weight")
        p.add_argument("--sigma-x2", type=float, help="LSVRT motion variance")
        p.add_argument("--sigma-v2", type=float, help="Kalman measurement noise")
        p.add_argument("--sigma-w2", type=float, help="Kalman process noise")
        p.add_argument("--window", type=int, help="variance window length")
        p.add_argument("--emit-plot-data", action="store_true", help="also write tidy plot CSVs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-dfl", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic trace and ground truth")
    _add_common(p, params=False)

    p = sub.add_parser("calibrate", help="calibration statistics and operator cache")
    _add_common(p)

    p = sub.add_parser("localize", help="per-frame argmax localization")
    _add_common(p)

    p = sub.add_parser("track", help="localization followed by Kalman tracking")
    _add_common(p)

    p = sub.add_parser("sweep", help="RMSE over a list of parameter values")
    _add_common(p)
    p.add_argument("--param", choices=SWEEP_PARAMETERS)
    p.add_argument("--values", help="comma-separated parameter values")

    p = sub.add_parser("eigen-report", help="first eigen-network links and scree data")
    _add_common(p)
    p.add_argument("--threshold", type=float, help="fraction of the maximum weight (default 0.3)")
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    opts = {}
    if args.config:
        with open(args.config) as fh:
            opts.update({k.replace("-", "_"): v for k, v in json.load(fh).items()})
    for k, v in vars(args).items():
        if v is not None and v is not False and k != "config":
            opts[k] = v
    return opts


def _scenario(opts: dict) -> ScenarioConfig:
    source = opts.get("scenario", "calm")
    if isinstance(source, dict):
        cfg = ScenarioConfig.from_dict(source)
    elif source in ("calm", "windy"):
        cfg = reference_scenario(source)
    else:
        cfg = load_scenario(source)
    if "seed" in opts:
        cfg = replace(cfg, seed=int(opts["seed"]))
    return cfg


def _dataset(opts: dict) -> Dataset:
    if opts.get("data_dir"):
        return Dataset.from_dir(opts["data_dir"])
    return Dataset.from_scenario(_scenario(opts))


def _params(opts: dict, **extra) -> PipelineParams:
    names = {f.name for f in fields(PipelineParams)}
    kw = {k: v for k, v in opts.items() if k in names}
    kw.update(extra)
    return PipelineParams(**kw)


def _out(opts: dict) -> Path:
    out = Path(opts.get("out_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(opts: dict) -> None:
    out = _out(opts)
    data = save_simulation(_scenario(opts), out)
    print(f"wrote {len(data.links)} links x {data.trace.n_samples} samples to {out}")


def cmd_calibrate(opts: dict) -> None:
    data = _dataset(opts)
    params = effective(_params(opts), data)
    out = _out(opts)
    split = data.frames(params.window)
    eig = data.eigen(params.window)
    lw = data.shrinkage(params.window)
    write_scree_csv(eig.eigenvalues, out / "scree.csv")
    op = build_operator(data, params)
    fp = operator_fingerprint(data, params)
    save_operator(op, out / f"operator_{params.estimator}.npz", fp)
    summary = {
        "calibration_frames": split.M,
        "links": len(data.links),
        "voxels": data.grid.n_voxels,
        "shrinkage_nu": lw.nu,
        "shrinkage_mu": lw.mu,
        "top_eigenvalues": eig.eigenvalues[:10].tolist(),
        "operator": params.estimator,
        "operator_fingerprint": fp,
    }
    (out / "calibration.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"M={split.M} calibration frames, nu={lw.nu:.4f}, lambda_1={eig.eigenvalues[0]:.4g}")


def _report(res) -> None:
    m = res.metrics
    print(f"{m['estimator']}: RMSE {m['rmse']:.4f} m, 97th percentile {m['p97']:.4f} m over {m['frames']} frames")


def cmd_localize(opts: dict, tracking: bool = False) -> None:
    data = _dataset(opts)
    res = run_pipeline(
        data, _params(opts, tracking=tracking), _out(opts), bool(opts.get("emit_plot_data"))
    )
    _report(res)


def cmd_sweep(opts: dict) -> None:
    if not opts.get("param") or not opts.get("values"):
        raise ValueError("sweep needs --param and --values")
    values = opts["values"]
    if isinstance(values, str):
        values = [v for v in values.split(",") if v.strip()]
    data = _dataset(opts)
    res = sweep(data, _params(opts), opts["param"], values, _out(opts))
    for v, r in zip(res.values, res.rmse):
        print(f"{res.parameter}={v}: RMSE {r:.4f} m")


def cmd_eigen_report(opts: dict) -> None:
    data = _dataset(opts)
    params = effective(_params(opts), data)
    eig = data.eigen(params.window)
    rep = eigen_network_report(eig, data.links, data.layout, float(opts.get("threshold", 0.30)))
    out = _out(opts)
    write_scree_csv(eig.eigenvalues, out / "scree.csv")
    write_eigen_network_csv(rep, out / "eigen_network.csv")
    print(f"{len(rep)} links above {rep.threshold_frac:.0%} of the first eigen-network maximum")


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "localize": cmd_localize,
    "track": lambda o: cmd_localize(o, tracking=True),
    "sweep": cmd_sweep,
    "eigen-report": cmd_eigen_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    opts = _merge_config(args)
    try:
        COMMANDS[args.command](opts)
    except PipelineError as e:
        print(f"error in stage {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
