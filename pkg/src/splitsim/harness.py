"""Experiment orchestration: config parsing, the split-training loop
with per-iteration leak-AUC evaluation at the cut and first layers,
hyperparameter sweeps, and CSV reporting.

Determinism contract: a run is a pure function of its config (seed
included).  Five independent RNG streams are derived from the seed
(data, init, batching, mechanism noise, attack oracle choice) so that
toggling the attack evaluation can never shift the defense noise.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as data_mod
from .attacks import (
    CosineScorer,
    NormScorer,
    UndefinedAUCError,
    leak_auc,
    quantile,
    roc_auc,
    select_oracle_positive,
)
from .marvell import SolverSettings
from .model import (
    Adam,
    GradientBundle,
    SGD,
    SplitNet,
    apply_update,
    backprop_nonlabel,
    forward,
    label_party_gradients,
    logistic_loss,
)
from .numeric import make_rng
from .protection import MechanismConfig, apply_mechanism

RUN_CSV_HEADER = "iter,train_loss,norm_cut,cos_cut,norm_first,cos_first,sum_kl,auc_bound,noise_power"
LEAK_SERIES = ("norm_cut", "cos_cut", "norm_first", "cos_first")
SUMMARY_QUANTILE = 0.95


class ConfigError(Exception):
    """Invalid experiment configuration."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class DatasetConfig:
    kind: str = "synthetic"
    n: int = 4000
    d_in: int = 20
    pos_frac: float = 0.1
    separation: float = 2.0
    noise_scale: float = 1.0
    path: str | None = None
    test_frac: float = 0.2


@dataclass(frozen=True)
class NetConfig:
    hidden_dims: tuple[int, ...] = (32, 32, 16)
    activations: tuple[str, ...] = ("relu", "relu", "relu")
    cut_index: int = 2


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    net: NetConfig = field(default_factory=NetConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    batch_size: int = 64
    iterations: int = 200
    mechanism: MechanismConfig = field(default_factory=MechanismConfig)
    seed: int = 0
    out: str | None = None


def _check_keys(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def _dataset_from_dict(d: dict) -> DatasetConfig:
    _check_keys(
        d,
        {"kind", "n", "d_in", "pos_frac", "separation", "noise_scale", "path", "test_frac"},
        "dataset",
    )
    kind = d.get("kind", "synthetic")
    if kind not in ("synthetic", "toy1d", "csv"):
        raise ConfigError(f"unknown dataset kind {kind!r}")
    if kind == "csv" and not d.get("path"):
        raise ConfigError("csv dataset requires a path")
    cfg = DatasetConfig(
        kind=kind,
        n=int(d.get("n", 4000)),
        d_in=int(d.get("d_in", 20)),
        pos_frac=float(d.get("pos_frac", 0.1)),
        separation=float(d.get("separation", 2.0)),
        noise_scale=float(d.get("noise_scale", 1.0)),
        path=d.get("path"),
        test_frac=float(d.get("test_frac", 0.2)),
    )
    if not 0.0 < cfg.test_frac < 1.0:
        raise ConfigError(f"test_frac must be in (0, 1), got {cfg.test_frac}")
    if kind == "synthetic" and not 0.0 < cfg.pos_frac < 1.0:
        raise ConfigError(f"pos_frac must be in (0, 1), got {cfg.pos_frac}")
    return cfg


def _net_from_dict(d: dict) -> NetConfig:
    _check_keys(d, {"hidden_dims", "activations", "cut_index"}, "net")
    hidden = tuple(int(x) for x in d.get("hidden_dims", (32, 32, 16)))
    acts = tuple(str(a) for a in d.get("activations", ("relu",) * len(hidden)))
    cut = int(d.get("cut_index", max(1, len(hidden) - 1)))
    if len(acts) != len(hidden):
        raise ConfigError("activations must match hidden_dims in length")
    if not 1 <= cut <= len(hidden):
        raise ConfigError(f"cut_index must be in [1, {len(hidden)}], got {cut}")
    return NetConfig(hidden_dims=hidden, activations=acts, cut_index=cut)


def _optimizer_from_dict(d: dict) -> OptimizerConfig:
    _check_keys(d, {"kind", "lr", "beta1", "beta2", "eps"}, "optimizer")
    kind = d.get("kind", "adam")
    if kind not in ("adam", "sgd"):
        raise ConfigError(f"unknown optimizer kind {kind!r}")
    return OptimizerConfig(
        kind=kind,
        lr=float(d.get("lr", 1e-3)),
        beta1=float(d.get("beta1", 0.9)),
        beta2=float(d.get("beta2", 0.999)),
        eps=float(d.get("eps", 1e-8)),
    )


def _mechanism_from_dict(d: dict) -> MechanismConfig:
    _check_keys(d, {"kind", "t", "s", "tol", "max_sweeps"}, "mechanism")
    kind = d.get("kind", "none")
    solver = SolverSettings(
        tol=float(d.get("tol", 1e-8)), max_sweeps=int(d.get("max_sweeps", 200))
    )
    try:
        return MechanismConfig(
            kind=kind, t=float(d.get("t", 1.0)), s=float(d.get("s", 1.0)), solver=solver
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def config_from_dict(d: dict) -> ExperimentConfig:
    _check_keys(
        d,
        {"dataset", "net", "optimizer", "batch_size", "iterations", "mechanism", "seed", "out"},
        "config",
    )
    cfg = ExperimentConfig(
        dataset=_dataset_from_dict(d.get("dataset", {})),
        net=_net_from_dict(d.get("net", {})),
        optimizer=_optimizer_from_dict(d.get("optimizer", {})),
        batch_size=int(d.get("batch_size", 64)),
        iterations=int(d.get("iterations", 200)),
        mechanism=_mechanism_from_dict(d.get("mechanism", {})),
        seed=int(d.get("seed", 0)),
        out=d.get("out"),
    )
    if cfg.batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {cfg.batch_size}")
    if cfg.iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {cfg.iterations}")
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a JSON object, got {type(raw).__name__}")
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# run records


@dataclass
class IterationRow:
    iteration: int
    train_loss: float
    norm_cut: float | None
    cos_cut: float | None
    norm_first: float | None
    cos_first: float | None
    sum_kl: float | None
    auc_bound: float | None
    noise_power: float


@dataclass
class RunRecord:
    rows: list[IterationRow]
    test_loss: float
    test_auc: float | None
    summary: dict[str, float | None]


def summarize_rows(rows: list[IterationRow]) -> dict[str, float | None]:
    """95%-quantile of each leak-AUC series over measured iterations only."""
    out: dict[str, float | None] = {}
    for name in LEAK_SERIES:
        values = [getattr(r, name) for r in rows if getattr(r, name) is not None]
        out[f"{name}_q95"] = quantile(values, SUMMARY_QUANTILE) if values else None
    out["train_loss_min"] = min(r.train_loss for r in rows) if rows else None
    return out


# ---------------------------------------------------------------------------
# training loop


def _build_dataset(cfg: DatasetConfig, seed: int) -> data_mod.Dataset:
    if cfg.kind == "synthetic":
        return data_mod.generate_synthetic(
            cfg.n, cfg.d_in, cfg.pos_frac, cfg.separation, cfg.noise_scale, seed=seed
        )
    if cfg.kind == "toy1d":
        return data_mod.generate_toy_1d(cfg.n, seed=seed)
    return data_mod.load_csv(cfg.path)


def _make_optimizer(cfg: OptimizerConfig):
    if cfg.kind == "sgd":
        return SGD(cfg.lr)
    return Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)


def _batch_indices(n: int, batch_size: int, iterations: int, rng: np.random.Generator):
    """Plain uniform shuffling per epoch, full batches only."""
    B = min(batch_size, n)
    per_epoch = n // B
    produced = 0
    while produced < iterations:
        perm = rng.permutation(n)
        for k in range(per_epoch):
            if produced >= iterations:
                return
            yield perm[k * B : (k + 1) * B]
            produced += 1


def _stream_seeds(seed: int) -> list[int]:
    state = np.random.SeedSequence(int(seed)).generate_state(5, dtype=np.uint64)
    return [int(x) for x in state]


def train_run(config: ExperimentConfig) -> RunRecord:
    """One full training run with per-iteration privacy measurement.

    Each iteration: forward, clean per-example cut gradients, mechanism
    perturbation, the four leak AUCs (norm/cosine at cut/first layer,
    scored on what the non-label party actually receives, with clean
    oracles), then parameter updates for both parties.
    """
    data_seed, init_seed, batch_seed, mech_seed, attack_seed = _stream_seeds(config.seed)

    dataset = _build_dataset(config.dataset, data_seed)
    train, test = data_mod.train_test_split(
        dataset, config.dataset.test_frac, make_rng(data_seed, 1)
    )

    net = SplitNet.build(
        train.d,
        list(config.net.hidden_dims),
        list(config.net.activations),
        config.net.cut_index,
        make_rng(init_seed),
    )
    optimizer = _make_optimizer(config.optimizer)
    mech_rng = make_rng(mech_seed)
    attack_rng = make_rng(attack_seed)

    rows: list[IterationRow] = []
    for it, idx in enumerate(
        _batch_indices(train.n, config.batch_size, config.iterations, make_rng(batch_seed)),
        start=1,
    ):
        X_b, y_b = train.X[idx], train.y[idx]
        state = forward(net, X_b)
        train_loss = float(np.mean(logistic_loss(state.logits, y_b)))

        clean_cut, h_grads = label_party_gradients(state, y_b)
        _, clean_first = backprop_nonlabel(net, state, clean_cut)

        outcome = apply_mechanism(config.mechanism, clean_cut, y_b, mech_rng)
        f_grads, pert_first = backprop_nonlabel(net, state, outcome.perturbed)

        n_pos = int((y_b == 1).sum())
        mixed = 0 < n_pos < y_b.shape[0]
        norm_cut = cos_cut = norm_first = cos_first = None
        if mixed:
            norm_cut = leak_auc(outcome.perturbed, y_b, NormScorer())
            norm_first = leak_auc(pert_first, y_b, NormScorer())
            g_plus_cut = select_oracle_positive(clean_cut, y_b, attack_rng)
            g_plus_first = select_oracle_positive(clean_first, y_b, attack_rng)
            if np.linalg.norm(g_plus_cut) > 0:
                cos_cut = leak_auc(outcome.perturbed, y_b, CosineScorer(g_plus_cut))
            if np.linalg.norm(g_plus_first) > 0:
                cos_first = leak_auc(pert_first, y_b, CosineScorer(g_plus_first))

        apply_update(
            net, GradientBundle(clean_cut, pert_first, f_grads, h_grads), optimizer
        )

        cert = outcome.certificate
        rows.append(
            IterationRow(
                iteration=it,
                train_loss=train_loss,
                norm_cut=norm_cut,
                cos_cut=cos_cut,
                norm_first=norm_first,
                cos_first=cos_first,
                sum_kl=cert.sum_kl if cert is not None else None,
                auc_bound=cert.auc_bound if cert is not None else None,
                noise_power=outcome.noise_power,
            )
        )

    test_state = forward(net, test.X)
    test_loss = float(np.mean(logistic_loss(test_state.logits, test.y)))
    try:
        test_auc = roc_auc(test_state.logits, test.y)
    except UndefinedAUCError:
        test_auc = None

    return RunRecord(
        rows=rows, test_loss=test_loss, test_auc=test_auc, summary=summarize_rows(rows)
    )


# ---------------------------------------------------------------------------
# CSV output


def _fmt(value) -> str:
    if value is None:
        return "NA"
    return repr(float(value))


def write_run_csv(record: RunRecord, path) -> None:
    lines = [RUN_CSV_HEADER]
    for r in record.rows:
        lines.append(
            ",".join(
                [
                    str(r.iteration),
                    _fmt(r.train_loss),
                    _fmt(r.norm_cut),
                    _fmt(r.cos_cut),
                    _fmt(r.norm_first),
                    _fmt(r.cos_first),
                    _fmt(r.sum_kl),
                    _fmt(r.auc_bound),
                    _fmt(r.noise_power),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary_csv(record: RunRecord, mechanism: MechanismConfig, path) -> None:
    lines = ["field,value"]
    lines.append(f"mechanism,{mechanism.kind}")
    lines.append(f"param,{_fmt(mechanism.param) if mechanism.param is not None else ''}")
    for name in LEAK_SERIES:
        lines.append(f"{name}_q95,{_fmt(record.summary[f'{name}_q95'])}")
    lines.append(f"train_loss_min,{_fmt(record.summary['train_loss_min'])}")
    lines.append(f"test_loss,{_fmt(record.test_loss)}")
    lines.append(f"test_auc,{_fmt(record.test_auc)}")
    Path(path).write_text("\n".join(lines) + "\n")


def run_to_dir(config: ExperimentConfig, out_dir) -> RunRecord:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    record = train_run(config)
    write_run_csv(record, out_dir / "run.csv")
    write_summary_csv(record, config.mechanism, out_dir / "summary.csv")
    return record


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class TradeoffPoint:
    mechanism: str
    param: float | None
    status: str  # ok | failed
    test_loss: float | None = None
    test_auc: float | None = None
    train_loss_min: float | None = None
    norm_cut_q95: float | None = None
    cos_cut_q95: float | None = None
    norm_first_q95: float | None = None
    cos_first_q95: float | None = None


TRADEOFF_CSV_HEADER = (
    "mechanism,param,status,test_loss,test_auc,train_loss_min,"
    "norm_cut_q95,cos_cut_q95,norm_first_q95,cos_first_q95"
)


def _mechanism_with_param(kind: str, value: float | None) -> MechanismConfig:
    if kind == "iso":
        return MechanismConfig(kind="iso", t=float(value))
    if kind == "marvell":
        return MechanismConfig(kind="marvell", s=float(value))
    return MechanismConfig(kind=kind)


def sweep(
    base: ExperimentConfig, kind: str, grid: list[float], out_dir
) -> list[TradeoffPoint]:
    """One train_run per grid value; points sorted by hyperparameter.

    Failures are recorded (status=failed) and the sweep continues.
    Writes each run's run.csv/summary.csv in a subdirectory plus one
    tradeoff.csv at the top.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if kind in ("none", "max_norm"):
        values: list[float | None] = [None]
    else:
        if not grid:
            raise ConfigError(f"mechanism {kind!r} requires a nonempty grid")
        values = sorted(float(v) for v in grid)

    points: list[TradeoffPoint] = []
    for value in values:
        mech = _mechanism_with_param(kind, value)
        cfg = dataclasses.replace(base, mechanism=mech)
        sub = kind if value is None else f"{kind}_{value:g}"
        try:
            record = run_to_dir(cfg, out_dir / sub)
        except Exception as exc:  # keep sweeping, mark the failure
            print(f"sweep point {sub} failed: {exc}", file=sys.stderr)
            points.append(TradeoffPoint(mechanism=kind, param=value, status="failed"))
            continue
        s = record.summary
        points.append(
            TradeoffPoint(
                mechanism=kind,
                param=value,
                status="ok",
                test_loss=record.test_loss,
                test_auc=record.test_auc,
                train_loss_min=s["train_loss_min"],
                norm_cut_q95=s["norm_cut_q95"],
                cos_cut_q95=s["cos_cut_q95"],
                norm_first_q95=s["norm_first_q95"],
                cos_first_q95=s["cos_first_q95"],
            )
        )

    write_tradeoff_csv(points, out_dir / "tradeoff.csv")
    return points


def write_tradeoff_csv(points: list[TradeoffPoint], path) -> None:
    lines = [TRADEOFF_CSV_HEADER]
    for p in points:
        lines.append(
            ",".join(
                [
                    p.mechanism,
                    "" if p.param is None else repr(float(p.param)),
                    p.status,
                    _fmt(p.test_loss) if p.status == "ok" else "",
                    _fmt(p.test_auc) if p.status == "ok" else "",
                    _fmt(p.train_loss_min) if p.status == "ok" else "",
                    _fmt(p.norm_cut_q95) if p.status == "ok" else "",
                    _fmt(p.cos_cut_q95) if p.status == "ok" else "",
                    _fmt(p.norm_first_q95) if p.status == "ok" else "",
                    _fmt(p.cos_first_q95) if p.status == "ok" else "",
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")
