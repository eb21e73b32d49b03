"""On-disk artifact layout, persistence, and staleness detection.

Workdir layout (one subdirectory per pipeline stage, each with a
manifest.json carrying the full-config hash and the stage-relevant hash):

    workdir/
      snapshots/     train/test parameter and value matrices (CSV)
      basis/         POD basis, derivatives, singular values (CSV)
      models/        flat parameter vectors + model manifest
      results/       per-sample CSV rows, adaptation JSONL, loss curves
      figures-data/  plot-ready tables written by the eval stage

All CSV files start with '# config_hash=...' comment lines; JSON artifacts
embed the hash as a key; JSONL records carry it per line. Matrices are
written with %.17g so values round-trip bit-exactly.
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import config_hash, stage_hash
from .errors import ConfigError, StalenessError
from .grid import build_grid
from .model import CompositeModel
from .net import MlpSpec
from .pod import ReducedBasis, SnapshotSet

STAGE_DIRS = {
    "snapshots": "snapshots",
    "pod": "basis",
    "train": "models",
    "adapt": "results",
    "baseline": "results",
    "eval": "results",
    "figures": "figures-data",
}


@dataclass(frozen=True)
class Workdir:
    root: Path

    def stage_dir(self, stage: str) -> Path:
        d = self.root / STAGE_DIRS[stage]
        d.mkdir(parents=True, exist_ok=True)
        return d

    def path(self, stage: str, name: str) -> Path:
        return self.stage_dir(stage) / name


def open_workdir(cfg: dict) -> Workdir:
    root = Path(os.environ.get("NLRB_WORKDIR") or cfg["paths"]["workdir"])
    root.mkdir(parents=True, exist_ok=True)
    return Workdir(root=root)


# ---------------------------------------------------------------------------
# manifests and staleness
# ---------------------------------------------------------------------------


def write_manifest(wd: Workdir, stage: str, cfg: dict, extra: dict | None = None) -> Path:
    manifest = {
        "stage": stage,
        "config_hash": config_hash(cfg),
        "stage_hash": stage_hash(cfg, stage),
    }
    if extra:
        manifest.update(extra)
    path = wd.stage_dir(stage) / f"manifest_{stage}.json"
    save_json(path, manifest, cfg)
    return path


def require_stage(wd: Workdir, stage: str, cfg: dict) -> dict:
    """Load an upstream stage manifest and check it matches this config."""
    path = wd.stage_dir(stage) / f"manifest_{stage}.json"
    if not path.exists():
        raise ConfigError(
            f"missing upstream artifact {path}; run `nlrb {stage}` first"
        )
    with open(path) as fh:
        manifest = json.load(fh)
    expected = stage_hash(cfg, stage)
    if manifest.get("stage_hash") != expected:
        raise StalenessError(
            f"{path} was produced under a different configuration "
            f"(stage_hash {manifest.get('stage_hash')} != {expected}); rerun `nlrb {stage}`"
        )
    return manifest


# ---------------------------------------------------------------------------
# primitive readers/writers
# ---------------------------------------------------------------------------


def save_matrix(path: Path, array: np.ndarray, cfg: dict) -> None:
    header = f"config_hash={config_hash(cfg)}"
    np.savetxt(path, np.atleast_2d(array), delimiter=",", fmt="%.17g", header=header)


def load_matrix(path: Path) -> np.ndarray:
    if not path.exists():
        raise ConfigError(f"missing upstream artifact {path}")
    return np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#"))


def save_json(path: Path, obj: dict, cfg: dict) -> None:
    payload = {"config_hash": config_hash(cfg), **obj}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_json(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(f"missing upstream artifact {path}")
    return json.loads(path.read_text())


def write_results_csv(path: Path, rows, cfg: dict) -> None:
    """Rows of the shared schema method,r,mu1,mu2,rel_error,wall_time_s."""
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash(cfg)}\n")
    buf.write("method,r,mu1,mu2,rel_error,wall_time_s\n")
    for method, r, mu1, mu2, rel, wt in rows:
        buf.write(
            f"{method},{int(r)},{float(mu1)!r},{float(mu2)!r},{float(rel)!r},{float(wt)!r}\n"
        )
    path.write_text(buf.getvalue())


def read_results_csv(path: Path) -> list[dict]:
    if not path.exists():
        raise ConfigError(f"missing results file {path}")
    rows = []
    with open(path) as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            parts = line.split(",")
            row = dict(zip(header, parts))
            rows.append(
                {
                    "method": row["method"],
                    "r": int(row["r"]),
                    "mu1": float(row["mu1"]),
                    "mu2": float(row["mu2"]),
                    "rel_error": float(row["rel_error"]),
                    "wall_time_s": float(row["wall_time_s"]),
                }
            )
    return rows


def append_jsonl(path: Path, records: list[dict], key_fields: tuple[str, ...] = ()) -> None:
    """Append records; with key_fields, replace matching old records so a
    rerun under an identical config is idempotent rather than duplicating."""
    existing = read_jsonl(path)
    if key_fields:
        new_keys = {tuple(rec.get(k) for k in key_fields) for rec in records}
        existing = [r for r in existing if tuple(r.get(k) for k in key_fields) not in new_keys]
    with open(path, "w") as fh:
        for rec in existing + records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


# ---------------------------------------------------------------------------
# domain artifacts
# ---------------------------------------------------------------------------


def save_snapshots(wd: Workdir, cfg: dict, train: SnapshotSet, test: SnapshotSet) -> None:
    save_matrix(wd.path("snapshots", "train_params.csv"), train.params, cfg)
    save_matrix(wd.path("snapshots", "train_values.csv"), train.values, cfg)
    save_matrix(wd.path("snapshots", "test_params.csv"), test.params, cfg)
    save_matrix(wd.path("snapshots", "test_values.csv"), test.values, cfg)
    meta = {
        "n": train.grid.n,
        "kind": train.grid.kind,
        "n_train": train.n_snapshots,
        "n_test": test.n_snapshots,
        "seed_train": cfg["snapshots"]["seed_train"],
        "seed_test": cfg["snapshots"]["seed_test"],
    }
    save_json(wd.path("snapshots", "meta.json"), meta, cfg)


def load_snapshots(wd: Workdir, cfg: dict) -> tuple[SnapshotSet, SnapshotSet]:
    meta = load_json(wd.path("snapshots", "meta.json"))
    grid = build_grid(meta["n"], meta["kind"])
    train = SnapshotSet(
        grid=grid,
        params=load_matrix(wd.path("snapshots", "train_params.csv")),
        values=load_matrix(wd.path("snapshots", "train_values.csv")),
    )
    test = SnapshotSet(
        grid=grid,
        params=load_matrix(wd.path("snapshots", "test_params.csv")),
        values=load_matrix(wd.path("snapshots", "test_values.csv")),
    )
    return train, test


def save_basis(wd: Workdir, cfg: dict, basis: ReducedBasis, n_s: int) -> None:
    save_matrix(wd.path("pod", "basis.csv"), basis.basis, cfg)
    save_matrix(wd.path("pod", "basis_dx.csv"), basis.basis_dx, cfg)
    save_matrix(wd.path("pod", "basis_dxx.csv"), basis.basis_dxx, cfg)
    save_matrix(wd.path("pod", "singular_values.csv"), basis.singular_values, cfg)
    meta = {
        "n": basis.grid.n,
        "kind": basis.grid.kind,
        "n_s": n_s,
        "ell": basis.ell,
        "singular_values": basis.singular_values.tolist(),
    }
    save_json(wd.path("pod", "meta.json"), meta, cfg)


def load_basis(wd: Workdir, cfg: dict) -> ReducedBasis:
    meta = load_json(wd.path("pod", "meta.json"))
    grid = build_grid(meta["n"], meta["kind"])
    return ReducedBasis(
        grid=grid,
        ell=meta["ell"],
        basis=load_matrix(wd.path("pod", "basis.csv")),
        basis_dx=load_matrix(wd.path("pod", "basis_dx.csv")),
        basis_dxx=load_matrix(wd.path("pod", "basis_dxx.csv")),
        singular_values=load_matrix(wd.path("pod", "singular_values.csv")).ravel(),
    )


def save_model(wd: Workdir, cfg: dict, model: CompositeModel, history: np.ndarray) -> None:
    save_matrix(wd.path("train", "phi_params.csv"), model.phi_params, cfg)
    save_matrix(wd.path("train", "theta_params.csv"), model.theta_params, cfg)
    save_matrix(wd.path("train", "loss_history.csv"), history, cfg)
    meta = {
        "ell": model.ell,
        "r": model.r,
        "mu_dim": model.mu_dim,
        "seed": model.seed,
        "phi_spec": model.phi_spec.asdict(),
        "u_spec": model.u_spec.asdict(),
        "theta_spec": model.theta_spec.asdict(),
        "mu_lo": model.mu_lo.tolist(),
        "mu_hi": model.mu_hi.tolist(),
        "loss_history_path": "loss_history.csv",
        "final_loss": float(history[-1]) if len(history) else None,
    }
    save_json(wd.path("train", "model.json"), meta, cfg)


def load_model(wd: Workdir, cfg: dict) -> CompositeModel:
    meta = load_json(wd.path("train", "model.json"))
    return CompositeModel(
        ell=meta["ell"],
        r=meta["r"],
        mu_dim=meta["mu_dim"],
        phi_spec=MlpSpec.fromdict(meta["phi_spec"]),
        u_spec=MlpSpec.fromdict(meta["u_spec"]),
        theta_spec=MlpSpec.fromdict(meta["theta_spec"]),
        phi_params=load_matrix(wd.path("train", "phi_params.csv")).ravel(),
        theta_params=load_matrix(wd.path("train", "theta_params.csv")).ravel(),
        mu_lo=np.array(meta["mu_lo"], dtype=float),
        mu_hi=np.array(meta["mu_hi"], dtype=float),
        seed=meta["seed"],
    )
