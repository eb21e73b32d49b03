"""Command-line pipeline: snapshots -> pod -> train -> adapt/baseline -> eval.

Each subcommand reads the effective config (defaults <- --config file <-
--set overrides <- dedicated flags), checks that upstream artifacts match
the relevant config sections, and writes its outputs plus a stage manifest
into the workdir. Exit codes: 0 ok, 2 configuration/staleness errors,
3 numeric or training failures.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import artifacts as art
from . import backend as backend_mod
from .baselines import PodnnConfig, optimal_projection_error, podnn_predict, train_podnn
from .config import config_hash, load_config
from .errors import ConfigError, NumericError
from .evaluate import ExperimentResult, relative_error
from .grid import build_grid, quadrature_weights
from .model import OfflineConfig, make_offline_dataset, predict_offline, train_offline
from .online import OnlineConfig, adapt, reconstruct_adapted
from .pod import assemble_snapshots, compute_pod
from .problems import make_problem, sample_params

METHOD_OFFLINE = "nonlinear-rb-offline"
METHOD_ONLINE = "nonlinear-rb-online"
METHOD_PODNN = "podnn"
METHOD_PROJECTION = "projection"


def _problem(cfg):
    pc = cfg["problem"]
    return make_problem(pc["name"], kappa=pc["kappa"], source_mode=pc["source_mode"])


def _backend(cfg) -> str:
    b = cfg.get("backend", "auto")
    return backend_mod.backend_name(None if b in (None, "auto") else b)


def _online_cfg(cfg) -> OnlineConfig:
    oc = cfg["online"]
    return OnlineConfig(
        m1=oc["m1"],
        m2=oc["m2"],
        lambda_bc=oc["lambda_bc"],
        gamma0=oc["gamma0"],
        rho=oc["rho"],
        max_epochs=oc["max_epochs"],
        stop_tol=oc["stop_tol"],
        lr=oc["lr"],
        seed=oc["seed"],
    )


def cmd_snapshots(cfg) -> None:
    problem = _problem(cfg)
    grid = build_grid(cfg["grid"]["n"], cfg["grid"]["kind"])
    sc = cfg["snapshots"]
    train = assemble_snapshots(problem, grid, sample_params(problem, sc["n_train"], sc["seed_train"]))
    test = assemble_snapshots(problem, grid, sample_params(problem, sc["n_test"], sc["seed_test"]))
    wd = art.open_workdir(cfg)
    art.save_snapshots(wd, cfg, train, test)
    art.write_manifest(wd, "snapshots", cfg, {"source_mode": problem.source_mode})
    print(f"snapshots: {sc['n_train']} train + {sc['n_test']} test on n={grid.n} {grid.kind}")


def cmd_pod(cfg) -> None:
    wd = art.open_workdir(cfg)
    art.require_stage(wd, "snapshots", cfg)
    train, _ = art.load_snapshots(wd, cfg)
    basis = compute_pod(train, ell=cfg["pod"]["ell"])
    art.save_basis(wd, cfg, basis, n_s=train.n_snapshots)
    art.write_manifest(wd, "pod", cfg)
    sig = basis.singular_values
    print(f"pod: ell={basis.ell}, sigma_1={sig[0]:.3e}, sigma_ell/sigma_1={sig[basis.ell-1]/sig[0]:.3e}")


def cmd_train(cfg) -> None:
    wd = art.open_workdir(cfg)
    art.require_stage(wd, "pod", cfg)
    problem = _problem(cfg)
    train_snaps, _ = art.load_snapshots(wd, cfg)
    basis = art.load_basis(wd, cfg)
    dataset = make_offline_dataset(problem, train_snaps)
    oc = cfg["offline"]
    occfg = OfflineConfig(
        lambda0=oc["lambda0"],
        lambda1=oc["lambda1"],
        epochs=oc["epochs"],
        lr=oc["lr"],
        lr_decay=oc["lr_decay"],
        lr_decay_every=oc["lr_decay_every"],
        seed=oc["seed"],
    )
    t0 = time.perf_counter()
    model, history = train_offline(
        basis, dataset, occfg, problem.mu_domain, r=cfg["model"]["r"], backend=_backend(cfg)
    )
    wall = time.perf_counter() - t0
    art.save_model(wd, cfg, model, history)
    art.write_manifest(
        wd,
        "train",
        cfg,
        {
            "backend": _backend(cfg),
            "source_mode": problem.source_mode,
            "wall_time_s": wall if cfg["record_timing"] else 0.0,
        },
    )
    print(f"train: r={model.r}, final loss {history[-1]:.6e} after {occfg.epochs} epochs")


def _thin_curve(losses: np.ndarray, max_points: int) -> list[tuple[int, float]]:
    if len(losses) <= max_points:
        return [(i, float(v)) for i, v in enumerate(losses)]
    stride = int(np.ceil(len(losses) / max_points))
    idx = list(range(0, len(losses), stride))
    if idx[-1] != len(losses) - 1:
        idx.append(len(losses) - 1)
    return [(i, float(losses[i])) for i in idx]


def cmd_adapt(cfg, mu_arg: str | None, test_set: bool, worst_decile: bool, init: str) -> None:
    wd = art.open_workdir(cfg)
    art.require_stage(wd, "train", cfg)
    problem = _problem(cfg)
    _, test_snaps = art.load_snapshots(wd, cfg)
    basis = art.load_basis(wd, cfg)
    model = art.load_model(wd, cfg)
    ocfg = _online_cfg(cfg)
    quad = quadrature_weights(basis.grid)
    mode = cfg["eval"]["rel_error_mode"]
    backend = _backend(cfg)

    if mu_arg is not None:
        targets = [np.array([float(v) for v in mu_arg.split(",")])]
        refs = [problem.exact(basis.grid.points, problem.check_mu(targets[0]))]
        labels = ["mu"]
    elif test_set:
        preds = predict_offline(model, basis, test_snaps.params)
        offline_errors = np.array(
            [relative_error(preds[i], test_snaps.values[:, i], quad, mode) for i in range(preds.shape[0])]
        )
        if worst_decile:
            from .evaluate import worst_decile_indices

            idx = np.sort(worst_decile_indices(offline_errors))
        else:
            idx = np.arange(test_snaps.n_snapshots)
        targets = [test_snaps.params[i] for i in idx]
        refs = [test_snaps.values[:, i] for i in idx]
        labels = [f"test{i}" for i in idx]
    else:
        raise ConfigError("adapt needs --mu or --test-set")

    def run_one(k):
        mu = targets[k]
        res = adapt(
            model, basis, problem, mu, ocfg,
            seed=ocfg.seed + 7919 * k, init=init, backend=backend,
        )
        u_adapted = reconstruct_adapted(model, basis, res.theta_u_final)
        rel = relative_error(u_adapted, refs[k], quad, mode)
        return res, rel

    workers = max(1, int(cfg["online"]["workers"]))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(run_one, range(len(targets))))

    records = []
    curve_rows = []
    for k, (res, rel) in enumerate(outcomes):
        records.append(
            {
                "config_hash": config_hash(cfg),
                "label": labels[k],
                "mu_star": [float(v) for v in res.mu_star],
                "init": init,
                "epochs": res.epochs_used,
                "wall_time": res.wall_time if cfg["record_timing"] else 0.0,
                "final_loss": float(res.loss_history[-1]),
                "rel_error": float(rel),
                "diverged": res.diverged,
            }
        )
        for epoch, loss in _thin_curve(res.loss_history, cfg["online"]["loss_history_points"]):
            curve_rows.append((labels[k] + ("" if init == "warm" else f"-{init}"), epoch, loss))
    art.append_jsonl(
        wd.path("adapt", "adapt.jsonl"), records, key_fields=("config_hash", "label", "init")
    )
    with open(wd.path("adapt", "online_loss.csv"), "w") as fh:
        fh.write(f"# config_hash={config_hash(cfg)}\n")
        fh.write("series,epoch,loss\n")
        for series, epoch, loss in curve_rows:
            fh.write(f"{series},{epoch},{float(loss)!r}\n")
    art.write_manifest(wd, "adapt", cfg, {"backend": backend, "count": len(records)})
    errs = [r["rel_error"] for r in records]
    print(f"adapt: {len(records)} run(s), mean rel_error {np.mean(errs):.3e}")


def cmd_baseline(cfg, which: str) -> None:
    wd = art.open_workdir(cfg)
    art.require_stage(wd, "pod", cfg)
    problem = _problem(cfg)
    train_snaps, test_snaps = art.load_snapshots(wd, cfg)
    basis = art.load_basis(wd, cfg)
    quad = quadrature_weights(basis.grid)
    mode = cfg["eval"]["rel_error_mode"]
    rows = []
    if which == METHOD_PODNN:
        bc = cfg["baseline"]
        pcfg = PodnnConfig(
            epochs=bc["epochs"],
            lr=bc["lr"],
            lr_decay=bc["lr_decay"],
            lr_decay_every=bc["lr_decay_every"],
            seed=bc["seed"],
        )
        dataset = make_offline_dataset(problem, train_snaps)
        t0 = time.perf_counter()
        g_model, history = train_podnn(basis, cfg["model"]["r"], dataset, pcfg, problem.mu_domain)
        wall = time.perf_counter() - t0
        preds = podnn_predict(g_model, basis, test_snaps.params)
        for i in range(test_snaps.n_snapshots):
            rel = relative_error(preds[i], test_snaps.values[:, i], quad, mode)
            mu = test_snaps.params[i]
            rows.append((METHOD_PODNN, g_model.r, mu[0], mu[1], rel, 0.0))
        art.write_results_csv(wd.path("baseline", "baseline_podnn.csv"), rows, cfg)
        art.save_json(
            wd.path("baseline", "baseline_podnn_meta.json"),
            {"final_loss": float(history[-1]), "wall_time_s": wall if cfg["record_timing"] else 0.0},
            cfg,
        )
    elif which == METHOD_PROJECTION:
        for i in range(test_snaps.n_snapshots):
            u = test_snaps.values[:, i]
            mu = test_snaps.params[i]
            for r in range(1, basis.ell + 1):
                rel = optimal_projection_error(basis, r, u, quad)
                if mode == "l2_squared":
                    rel = rel * rel
                rows.append((METHOD_PROJECTION, r, mu[0], mu[1], rel, 0.0))
        art.write_results_csv(wd.path("baseline", "baseline_projection.csv"), rows, cfg)
    else:
        raise ConfigError(f"unknown baseline {which!r}; expected podnn or projection")
    art.write_manifest(wd, "baseline", cfg, {"which": which})
    print(f"baseline {which}: {len(rows)} rows")


def cmd_eval(cfg) -> None:
    wd = art.open_workdir(cfg)
    art.require_stage(wd, "train", cfg)
    problem = _problem(cfg)
    _, test_snaps = art.load_snapshots(wd, cfg)
    basis = art.load_basis(wd, cfg)
    model = art.load_model(wd, cfg)
    quad = quadrature_weights(basis.grid)
    mode = cfg["eval"]["rel_error_mode"]
    bins = cfg["eval"]["hist_bins"]

    rows = []
    preds = predict_offline(model, basis, test_snaps.params)
    for i in range(test_snaps.n_snapshots):
        rel = relative_error(preds[i], test_snaps.values[:, i], quad, mode)
        mu = test_snaps.params[i]
        rows.append((METHOD_OFFLINE, model.r, float(mu[0]), float(mu[1]), float(rel), 0.0))

    for name in ("baseline_podnn.csv", "baseline_projection.csv"):
        path = wd.path("baseline", name)
        if path.exists():
            for rec in art.read_results_csv(path):
                rows.append(
                    (rec["method"], rec["r"], rec["mu1"], rec["mu2"], rec["rel_error"], rec["wall_time_s"])
                )
    for rec in art.read_jsonl(wd.path("adapt", "adapt.jsonl")):
        if rec.get("init", "warm") != "warm":
            continue
        rows.append(
            (METHOD_ONLINE, model.r, rec["mu_star"][0], rec["mu_star"][1], rec["rel_error"], rec["wall_time"])
        )

    if not rows:
        raise ConfigError("eval found zero result rows; run train/baseline/adapt first")
    art.write_results_csv(wd.path("eval", "per_sample.csv"), rows, cfg)

    groups: dict[tuple[str, int], list] = {}
    for method, r, mu1, mu2, rel, wt in rows:
        groups.setdefault((method, int(r)), []).append((mu1, mu2, rel, wt))
    summary = []
    for (method, r), items in sorted(groups.items()):
        result = ExperimentResult(
            method=method,
            r=r,
            mus=np.array([(a, b) for a, b, _, _ in items]),
            rel_errors=np.array([e for _, _, e, _ in items]),
            wall_times=np.array([w for _, _, _, w in items]),
        ).finalize(bins=bins)
        summary.append({"method": method, "r": r, **result.aggregates})
    art.save_json(
        wd.path("eval", "aggregates.json"),
        {"rel_error_mode": mode, "groups": summary},
        cfg,
    )

    fig_dir = wd.stage_dir("figures")
    with open(fig_dir / "error_vs_r.csv", "w") as fh:
        fh.write(f"# config_hash={config_hash(cfg)}\n")
        fh.write("method,r,mean_rel_error,median_rel_error,worst10_mean_rel_error\n")
        for g in summary:
            fh.write(
                f"{g['method']},{g['r']},{float(g['mean'])!r},{float(g['median'])!r},{float(g['worst10_mean'])!r}\n"
            )
    with open(fig_dir / "histograms.csv", "w") as fh:
        fh.write(f"# config_hash={config_hash(cfg)}\n")
        fh.write("method,r,bin_lo,bin_hi,count\n")
        for g in summary:
            edges, counts = g["hist_edges"], g["hist_counts"]
            for b in range(len(counts)):
                fh.write(f"{g['method']},{g['r']},{float(edges[b])!r},{float(edges[b+1])!r},{int(counts[b])}\n")
    on_off = [g for g in summary if g["method"] in (METHOD_OFFLINE, METHOD_ONLINE)]
    if len(on_off) >= 1:
        with open(fig_dir / "on_off.csv", "w") as fh:
            fh.write(f"# config_hash={config_hash(cfg)}\n")
            fh.write("scope,method,r,mean_rel_error\n")
            for g in on_off:
                fh.write(f"all,{g['method']},{g['r']},{float(g['mean'])!r}\n")
                fh.write(f"worst10,{g['method']},{g['r']},{float(g['worst10_mean'])!r}\n")
    print(f"eval: {len(rows)} rows across {len(summary)} method/r groups")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlrb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--workdir", help="artifact directory (or env NLRB_WORKDIR)")
        p.add_argument("--backend", choices=["auto", "numpy", "numba"], help="kernel backend")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="dotted config override, e.g. --set model.r=12",
        )
        p.add_argument("--problem", dest="problem_name", help="problem name")
        p.add_argument("--kappa", type=float, help="problem frequency parameter")

    for name in ("snapshots", "pod", "train", "eval"):
        common(sub.add_parser(name))
    p_adapt = sub.add_parser("adapt")
    common(p_adapt)
    p_adapt.add_argument("--mu", help="single target parameter, e.g. 5.0,5.0")
    p_adapt.add_argument("--test-set", action="store_true", help="adapt every test sample")
    p_adapt.add_argument(
        "--worst-decile", action="store_true", help="with --test-set: only the worst 10%% by offline error"
    )
    p_adapt.add_argument("--init", choices=["warm", "random"], default="warm")
    p_base = sub.add_parser("baseline")
    common(p_base)
    p_base.add_argument("which", choices=[METHOD_PODNN, METHOD_PROJECTION])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.problem_name:
        overrides.append(f"problem.name={args.problem_name}")
    if args.kappa is not None:
        overrides.append(f"problem.kappa={args.kappa}")
    try:
        cfg = load_config(args.config, overrides, args.workdir, args.backend)
        if args.command == "snapshots":
            cmd_snapshots(cfg)
        elif args.command == "pod":
            cmd_pod(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "adapt":
            cmd_adapt(cfg, args.mu, args.test_set, args.worst_decile, args.init)
        elif args.command == "baseline":
            cmd_baseline(cfg, args.which)
        elif args.command == "eval":
            cmd_eval(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
