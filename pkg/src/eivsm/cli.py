"""Command line entry point: ``eivsm {simulate,identify,compare,verify}``.

Exit codes: 0 success, 2 configuration/input error, 3 empty feasible set,
4 LP solver failure, 5 oracle budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import identifier as ident
from .config import ExperimentConfig, load_config, load_preset, snr_label
from .identifier import ConfigError, EmptyFpsError, RegressorWindow
from .lp import SolverFailure
from .model import (
    Dataset,
    DatasetParseError,
    UnstableSimulationError,
    delta_for_snr,
    read_dataset,
    snr_input,
    snr_output,
    write_dataset,
)
from .oracle import MAX_SUBPROBLEMS, OracleBudgetError, OracleConfig, gap_tolerance, pui_bruteforce, pui_sign_split

EXIT_OK, EXIT_CONFIG, EXIT_EMPTY_FPS, EXIT_SOLVER, EXIT_BUDGET = 0, 2, 3, 4, 5


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def resolve_config(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError("use either --config or --preset, not both")
    cfg = load_config(args.config) if args.config else load_preset(args.preset or "example1")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.method is not None:
        changes["method"] = args.method
    if args.snr is not None:
        changes["snr_x"], changes["snr_w"] = args.snr
    if args.N is not None:
        changes["N"] = args.N
    if args.signs is not None:
        changes["signs"] = args.signs.replace(",", " ")
    return cfg.replace(**changes) if changes else cfg


def simulate_to(cfg: ExperimentConfig, out: Path) -> tuple[Dataset, dict]:
    """Simulate and write ``dataset.csv`` with its JSON sidecar."""
    ds = cfg.simulate()
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(ds, out / "dataset.csv")
    sidecar = dataset_sidecar(cfg, ds)
    _write_json(sidecar, out / "dataset.json")
    return ds, sidecar


def dataset_sidecar(cfg: ExperimentConfig, ds: Dataset) -> dict:
    # noise bounds are recovered exactly from the config, not from sample maxima
    if cfg.snr_x is not None:
        d_eta, d_zeta = delta_for_snr(ds.w, cfg.snr_w), delta_for_snr(ds.x, cfg.snr_x)
    else:
        d_eta, d_zeta = cfg.delta_eta, cfg.delta_zeta
    return {
        "config": cfg.name,
        "seed": cfg.seed,
        "N": ds.N,
        "order": {"na": ds.order.na, "nb": ds.order.nb, "nk": ds.order.nk},
        "parameters": ds.order.labels,
        "theta0": [float(v) for v in ds.theta0],
        "delta_eta": float(d_eta),
        "delta_zeta": float(d_zeta),
        "max_abs_eta": float(np.max(np.abs(ds.eta))),
        "max_abs_zeta": float(np.max(np.abs(ds.zeta))),
        "target_snr_x": cfg.snr_x,
        "target_snr_w": cfg.snr_w,
        "snr_x": snr_label(snr_input(ds)),
        "snr_w": snr_label(snr_output(ds)),
    }


def load_dataset(cfg: ExperimentConfig, args) -> tuple[Dataset, dict]:
    """Dataset named by ``--dataset``, or a fresh simulation written to ``--out``."""
    if args.dataset is None:
        return simulate_to(cfg, Path(args.out))
    path = Path(args.dataset)
    side_path = path.with_suffix(".json")
    sidecar = json.loads(side_path.read_text()) if side_path.exists() else {}
    theta0 = np.array(sidecar["theta0"]) if "theta0" in sidecar else cfg.theta0()
    ds = read_dataset(path, cfg.order, theta0=theta0)
    if "delta_eta" not in sidecar:
        if cfg.delta_eta is None:
            raise ConfigError(f"no sidecar {side_path} and no explicit noise bounds in the config")
        sidecar = {**sidecar, "delta_eta": cfg.delta_eta, "delta_zeta": cfg.delta_zeta}
    return ds, sidecar


def identify(cfg: ExperimentConfig, ds: Dataset, sidecar: dict, method: str):
    icfg = cfg.identifier_config(sidecar["delta_eta"], sidecar["delta_zeta"], ds, method)
    return ident.run(ds, icfg)


def write_plot_data(records, ds: Dataset, method: str, path: Path) -> None:
    labels = ds.order.labels
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "series", "value"])
        for r in records:
            truth = ds.theta_at(r.t)
            center = r.center
            for k, lab in enumerate(labels):
                for name, v in (
                    ("lower", r.pui.lower[k]),
                    ("upper", r.pui.upper[k]),
                    ("center", center[k]),
                    ("true", truth[k]),
                ):
                    wr.writerow([r.t, f"{method}.{lab}.{name}", format(v, ".17g")])


def cmd_simulate(args) -> int:
    cfg = resolve_config(args)
    _, sidecar = simulate_to(cfg, Path(args.out))
    print(f"wrote {Path(args.out) / 'dataset.csv'}  SNR_x={sidecar['snr_x']}  SNR_w={sidecar['snr_w']}")
    return EXIT_OK


def cmd_identify(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out)
    ds, sidecar = load_dataset(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    records = identify(cfg, ds, sidecar, cfg.method)
    ident.write_records(records, cfg.method, out / f"steps_{cfg.method}.csv", ds)
    summary = ident.summarize(records, ds)
    summary.update(method=cfg.method, delta_eta=sidecar["delta_eta"], delta_zeta=sidecar["delta_zeta"])
    ident.write_summary(summary, out / f"summary_{cfg.method}.json")
    if args.emit_plot_data:
        write_plot_data(records, ds, cfg.method, out / f"plot_data_{cfg.method}.csv")
    print(
        f"{cfg.method}: containment={summary['containment_rate']:.4f} "
        f"mean step={summary['timing']['mean_step_time_us']:.0f} us"
    )
    return EXIT_OK


def compare_records(rec_a, rec_b) -> dict:
    lo_a = np.array([r.pui.lower for r in rec_a])
    hi_a = np.array([r.pui.upper for r in rec_a])
    lo_b = np.array([r.pui.lower for r in rec_b])
    hi_b = np.array([r.pui.upper for r in rec_b])
    diff = np.maximum(np.abs(lo_a - lo_b), np.abs(hi_a - hi_b))
    i, k = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return {
        "max_discrepancy": float(diff[i, k]),
        "at_t": int(rec_a[i].t),
        "at_k": int(k + 1),
        "diff": diff,
    }


def cmd_compare(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out)
    methods = args.methods.split(",")
    if len(methods) != 2:
        raise ConfigError("--methods takes two comma-separated methods")
    ds, sidecar = load_dataset(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    runs = [identify(cfg, ds, sidecar, m) for m in methods]
    rep = compare_records(*runs)
    ma, mb = methods
    with open(out / "compare.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "k", f"lower_{ma}", f"upper_{ma}", f"lower_{mb}", f"upper_{mb}", "abs_diff_lower", "abs_diff_upper"])
        for ra, rb in zip(*runs):
            for k in range(ds.order.n_p):
                row = [ra.pui.lower[k], ra.pui.upper[k], rb.pui.lower[k], rb.pui.upper[k]]
                row += [abs(row[0] - row[2]), abs(row[1] - row[3])]
                wr.writerow([ra.t, k + 1] + [format(v, ".17g") for v in row])
    summaries = {m: ident.summarize(r, ds) for m, r in zip(methods, runs)}
    report = {
        "methods": methods,
        "max_discrepancy": rep["max_discrepancy"],
        "at_t": rep["at_t"],
        "at_parameter": ds.order.labels[rep["at_k"] - 1],
        "containment_rate": {m: s["containment_rate"] for m, s in summaries.items()},
        "timing": {m: s["timing"] for m, s in summaries.items()},
    }
    _write_json(report, out / "compare.json")
    if args.emit_plot_data:
        for m, r in zip(methods, runs):
            write_plot_data(r, ds, m, out / f"plot_data_{m}.csv")
    print(f"max endpoint discrepancy {ma} vs {mb}: {rep['max_discrepancy']:.3e} (t={rep['at_t']})")
    return EXIT_OK


def verify_steps(cfg: ExperimentConfig, ds: Dataset, sidecar: dict, grid: int, n_steps: int, seed: int) -> list[dict]:
    """Certify sampled relaxed updates against the grid oracle and the sign-split exact interval."""
    d_eta, d_zeta = sidecar["delta_eta"], sidecar["delta_zeta"]
    probe = OracleConfig(RegressorWindow.at(ds, ds.order.lag + 1), np.zeros(ds.order.n_p), np.zeros(ds.order.n_p), d_eta, d_zeta, 0, grid)
    if probe.n_subproblems > MAX_SUBPROBLEMS:
        raise OracleBudgetError(probe.n_subproblems)
    records = identify(cfg, ds, sidecar, "rsm-m")
    candidates = np.arange(ds.order.lag + 1, ds.N + 1)
    rng = np.random.default_rng(seed)
    steps = np.sort(rng.choice(candidates, size=min(n_steps, len(candidates)), replace=False))
    rows = []
    for t in steps:
        rec = records[t - 1]
        window = RegressorWindow.at(ds, int(t))
        for k in range(ds.order.n_p):
            oc = OracleConfig(window, rec.box_lower, rec.box_upper, d_eta, d_zeta, k, grid)
            orc = pui_bruteforce(oc)
            exact_lo, exact_hi = pui_sign_split(oc)
            lo, hi = float(rec.pui.lower[k]), float(rec.pui.upper[k])
            gap = max(orc.lower - lo, hi - orc.upper)
            tol = gap_tolerance(oc)
            sound = orc.lower >= lo - 1e-7 and orc.upper <= hi + 1e-7
            rows.append(
                {
                    "t": int(t),
                    "parameter": ds.order.labels[k],
                    "rsm_m_lower": lo,
                    "rsm_m_upper": hi,
                    "oracle_lower": orc.lower,
                    "oracle_upper": orc.upper,
                    "exact_lower": exact_lo,
                    "exact_upper": exact_hi,
                    "gap": gap,
                    "relaxation_gap": max(exact_lo - lo, hi - exact_hi),
                    "tolerance": tol,
                    "box_straddles_zero": bool(np.any((rec.box_lower < 0) & (rec.box_upper > 0))),
                    "sound": bool(sound),
                    "pass": bool(sound and gap <= tol),
                }
            )
    return rows


def cmd_verify(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out)
    ds, sidecar = load_dataset(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    rows = verify_steps(cfg, ds, sidecar, args.grid, args.steps, cfg.seed)
    with open(out / "verify.csv", "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow({k: format(v, ".17g") if isinstance(v, float) else v for k, v in r.items()})
    report = {
        "grid_points": args.grid,
        "steps": sorted({r["t"] for r in rows}),
        "all_sound": all(r["sound"] for r in rows),
        "all_pass": all(r["pass"] for r in rows),
        "n_checks": len(rows),
        "n_failed": sum(not r["pass"] for r in rows),
        "max_gap": max(r["gap"] for r in rows),
        "max_relaxation_gap": max(r["relaxation_gap"] for r in rows),
    }
    _write_json(report, out / "verify.json")
    print(f"verify: {len(rows) - report['n_failed']}/{len(rows)} checks pass, sound={report['all_sound']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (INI)")
    common.add_argument("--preset", help="built-in config: example1, example2, noisefree")
    common.add_argument("--seed", type=int, help="experiment seed (overrides the config)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--method", choices=ident.METHODS, help="identification method")
    common.add_argument("--signs", help="rsm-s sign source: 'from-truth' or one +1/-1 per parameter, comma separated")
    common.add_argument("--snr", type=float, nargs=2, metavar=("SNR_X", "SNR_W"), help="target SNRs in dB")
    common.add_argument("--N", type=int, help="data length")
    common.add_argument("--emit-plot-data", action="store_true", help="write long-format plot CSV")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="eivsm", description="Set-membership EIV identification of LTV systems")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="simulate a dataset")
    s.set_defaults(func=cmd_simulate)
    for name, func, hlp in (
        ("identify", cmd_identify, "run the interval recursion"),
        ("compare", cmd_compare, "run two methods on one dataset"),
        ("verify", cmd_verify, "certify sampled steps against the brute-force oracle"),
    ):
        sp = sub.add_parser(name, parents=[common], help=hlp)
        sp.add_argument("--dataset", help="dataset CSV (default: simulate from the config)")
        sp.set_defaults(func=func)
        if name == "compare":
            sp.add_argument("--methods", default="rsm-m,rsm-s")
        if name == "verify":
            sp.add_argument("--grid", type=int, default=101, help="grid points per noise dimension (odd)")
            sp.add_argument("--steps", type=int, default=20, help="number of sampled steps")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DatasetParseError, UnstableSimulationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EmptyFpsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY_FPS
    except SolverFailure as exc:
        print(f"error: LP solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OracleBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
