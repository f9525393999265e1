"""Training/evaluation orchestration, metrics persistence, checkpoints."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..diffcore import Optimizer, read_checkpoint, write_checkpoint
from ..trainer import NetworkBundle, PolicyOpponent, Trainer
from .config import RunConfig, build_env, config_from_dict

CSV_HEADER = "iteration,wall_seconds,mean_return,win_rate,loss_q,loss_v,epsilon,grad_norm"


def _fmt(value) -> str:
    if value is None:
        return ""
    return f"{value:.12g}"


def _metrics_row(iteration, wall_seconds, mean_return, win_rate, loss_q_val,
                 loss_v_val, epsilon, grad_norm) -> str:
    cells = [str(iteration)] + [_fmt(v) for v in (
        wall_seconds, mean_return, win_rate, loss_q_val, loss_v_val, epsilon, grad_norm)]
    return ",".join(cells)


def _write_sidecar(path: Path, config: RunConfig, extra: dict | None = None) -> None:
    meta = {"config": config.to_dict(), "seed": config.seed}
    if extra:
        meta.update(extra)
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1))


# -- checkpointing ----------------------------------------------------------------


def _optimizer_arrays(tag: str, opt: Optimizer) -> list[tuple[str, np.ndarray]]:
    arrays = []
    for pname, slot in sorted(opt.moments.items()):
        arrays.append((f"{tag}::{pname}::m", slot["m"]))
        arrays.append((f"{tag}::{pname}::v", slot["v"]))
    return arrays


def save_checkpoint(trainer: Trainer, path, config: RunConfig) -> None:
    """Everything needed to resume bit-exactly: parameters, snapshots,
    optimizer moments, iteration counter, and the training RNG state."""
    arrays: list[tuple[str, np.ndarray]] = []
    for group, params in trainer.bundle.param_groups().items():
        for p in params:
            arrays.append((f"{group}::{p.name}", p.data))
    arrays += _optimizer_arrays("opt_q", trainer.opt_q)
    arrays += _optimizer_arrays("opt_v", trainer.opt_v)

    rng_state = trainer.rng.bit_generator.state
    meta = {
        "config": config.to_dict(),
        "iteration": trainer.iteration,
        "episode_count": trainer.episode_count,
        "total_iterations": trainer.total_iterations,
        "optimizer_steps": {"opt_q": trainer.opt_q.step_count,
                            "opt_v": trainer.opt_v.step_count},
        "rng_state": {
            "bit_generator": rng_state["bit_generator"],
            "state": {k: str(v) for k, v in rng_state["state"].items()},
            "has_uint32": rng_state["has_uint32"],
            "uinteger": rng_state["uinteger"],
        },
    }
    write_checkpoint(path, arrays, meta)


@dataclass
class LoadedCheckpoint:
    bundle: NetworkBundle
    config: RunConfig
    iteration: int
    meta: dict
    arrays: dict


def load_checkpoint(path) -> LoadedCheckpoint:
    """Rebuild the bundle from a checkpoint; shapes are validated against the
    configuration stored in the header."""
    arrays, meta = read_checkpoint(path)
    config = config_from_dict(meta["config"])
    env = build_env(config)
    bundle = NetworkBundle.create(config.method, env.spec, config.train,
                                  config.filter, np.random.default_rng(config.seed))
    for group, params in bundle.param_groups().items():
        for p in params:
            key = f"{group}::{p.name}"
            if key not in arrays:
                raise ValueError(f"{path}: checkpoint missing array {key}")
            stored = arrays[key]
            if stored.shape != p.data.shape:
                raise ValueError(
                    f"{path}: shape mismatch for {key}: expected {p.data.shape}, "
                    f"found {stored.shape}"
                )
            p.data = stored.copy()
    return LoadedCheckpoint(bundle=bundle, config=config,
                            iteration=int(meta["iteration"]), meta=meta, arrays=arrays)


def restore_trainer(path) -> tuple[Trainer, RunConfig]:
    """Full training state for resumption (bundle + optimizers + RNG)."""
    loaded = load_checkpoint(path)
    config = loaded.config
    env = build_env(config)
    trainer = Trainer(env, config.method, config.train, config.filter,
                      seed=config.seed, total_iterations=loaded.meta["total_iterations"])
    trainer.bundle = loaded.bundle
    if trainer.self_play_hook is not None:
        trainer.self_play_hook.bundle = loaded.bundle
    trainer.iteration = loaded.iteration
    trainer.episode_count = int(loaded.meta["episode_count"])
    for tag, opt in (("opt_q", trainer.opt_q), ("opt_v", trainer.opt_v)):
        opt.step_count = int(loaded.meta["optimizer_steps"][tag])
        for key, arr in loaded.arrays.items():
            if key.startswith(f"{tag}::"):
                _, pname, slot = key.split("::")
                opt.moments.setdefault(pname, {})[slot] = arr.copy()
    saved = loaded.meta["rng_state"]
    trainer.rng.bit_generator.state = {
        "bit_generator": saved["bit_generator"],
        "state": {k: int(v) for k, v in saved["state"].items()},
        "has_uint32": int(saved["has_uint32"]),
        "uinteger": int(saved["uinteger"]),
    }
    return trainer, config


# -- train / eval entry points ------------------------------------------------------


def _cadence_eval(trainer: Trainer, config: RunConfig, iteration: int) -> dict:
    # cadence metrics oppose the scripted bot so the win-rate column tracks
    # progress against a fixed yardstick; training itself stays self-play
    rng = np.random.default_rng([config.seed, 0xE7A1, iteration])
    opponent = "scripted" if config.env == "battle" else None
    return trainer.evaluate(config.eval_episodes, rng, opponent=opponent)


def run_train(config: RunConfig, out_dir, single_thread: bool = False,
              resume=None) -> dict:
    """Train per the config; write metrics CSV, checkpoints, final report.

    In strict reproducible mode (single_thread=True) the wall_seconds column
    is left empty so reruns are byte-identical.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("ok")
        probe.unlink()
    except OSError as e:
        raise RuntimeError(f"output directory {out} is not writable: {e}") from e

    if resume is not None:
        trainer, saved_config = restore_trainer(resume)
        ours, theirs = config.to_dict(), saved_config.to_dict()
        ours.pop("iterations"), theirs.pop("iterations")  # budgets may differ
        if ours != theirs:
            raise ValueError("resume checkpoint was produced by a different config")
        trainer.total_iterations = config.iterations
        start_iteration = trainer.iteration
    else:
        env = build_env(config)
        trainer = Trainer(env, config.method, config.train, config.filter,
                          seed=config.seed, total_iterations=config.iterations)
        start_iteration = 0

    metrics_path = out / "metrics.csv"
    mode = "a" if resume is not None and metrics_path.exists() else "w"
    t_start = time.monotonic()
    final_eval = None
    with open(metrics_path, mode) as fh:
        if mode == "w":
            fh.write(CSV_HEADER + "\n")
        for _ in range(start_iteration, config.iterations):
            m = trainer.run_iteration()
            iteration = trainer.iteration
            at_cadence = iteration % config.eval_cadence == 0 or iteration == config.iterations
            mean_return = win_rate = None
            if at_cadence:
                report = _cadence_eval(trainer, config, iteration)
                mean_return = report["mean_return"]
                win_rate = report["win_rate"]
                final_eval = report
                save_checkpoint(trainer, out / f"ckpt_{iteration:06d}.bin", config)
            wall = None if single_thread else time.monotonic() - t_start
            fh.write(_metrics_row(iteration, wall, mean_return, win_rate,
                                  m.loss_q, m.loss_v, m.epsilon, m.grad_norm) + "\n")
            fh.flush()

    checkpoint_path = out / "final.bin"
    save_checkpoint(trainer, checkpoint_path, config)
    if final_eval is None:
        final_eval = _cadence_eval(trainer, config, trainer.iteration)
    _write_sidecar(metrics_path, config, {"schema": CSV_HEADER})

    report = {
        "config": config.to_dict(),
        "seed": config.seed,
        "iterations": trainer.iteration,
        "final_eval": final_eval,
        "wall_seconds": None if single_thread else time.monotonic() - t_start,
        "checkpoint": str(checkpoint_path),
    }
    (out / "final_report.json").write_text(json.dumps(report, sort_keys=True, indent=1))
    return report


@dataclass
class EvalReport:
    episodes: int
    mean_return: float
    win_rate: float | None
    returns: list[float]

    def __post_init__(self):
        if self.episodes <= 0:
            raise ValueError("episodes must be positive")
        if self.win_rate is not None and not 0.0 <= self.win_rate <= 1.0:
            raise ValueError(f"win_rate outside [0, 1]: {self.win_rate}")


def run_eval(checkpoint, episodes: int, opponent: str = "self",
             seed: int = 0) -> EvalReport:
    """Evaluate a checkpoint with deterministic policies.

    `opponent` is self, scripted, or a path to another checkpoint (battle
    only; ignored for the matrix game)."""
    loaded = load_checkpoint(checkpoint)
    config = loaded.config
    env = build_env(config)
    trainer = Trainer(env, config.method, config.train, config.filter,
                      seed=config.seed, total_iterations=max(1, config.iterations))
    trainer.bundle = loaded.bundle

    opp = None
    if config.env == "battle":
        if opponent in ("self", "scripted"):
            opp = opponent
        else:
            other = load_checkpoint(opponent)
            if other.config.env != config.env:
                raise ValueError(
                    f"opponent checkpoint env {other.config.env!r} does not match "
                    f"{config.env!r}"
                )
            opp = PolicyOpponent(other.bundle, other.config.train, mode="eval")
    report = trainer.evaluate(episodes, np.random.default_rng([seed, 0xEA11]),
                              opponent=opp)
    return EvalReport(
        episodes=episodes,
        mean_return=report["mean_return"],
        win_rate=report["win_rate"],
        returns=[float(r) for r in report["returns"]],
    )
