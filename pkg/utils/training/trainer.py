import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm import tqdm

from utils.errors import CheckpointError
from utils.policy.agent import PolicySnapshot
from utils.policy.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from utils.policy.network import init_params, policy_spec, value_spec
from utils.training.optimizers import make_optimizer
from utils.training.ppo import TrainerState, compute_returns_advantages, kl_servo, ppo_update
from utils.training.rollouts import collect_rollouts
from utils.training.scaler import ObservationScaler

logger = logging.getLogger(__name__)

METRIC_COLUMNS = [
    "Update", "Mean R", "SD R", "Min R", "Max R", "Mean Steps", "Max Steps",
    "Mean Miss", "SD Miss", "Min Miss", "Max Miss", "Mean Terminal R", "Terminal Rate",
    "KL", "Clip", "Policy LR", "Value LR", "Value Loss", "Policy Passes", "Failures", "Skipped",
]
WARMUP_UPDATE = 0


@dataclass
class TrainingResult:
    metrics: pd.DataFrame
    checkpoints: list = field(default_factory=list)
    state: TrainerState = None


def new_trainer_state(config):
    p_spec, v_spec = policy_spec(), value_spec()
    seeds = np.random.SeedSequence([config.seed, 2**32 - 1]).spawn(2)
    return TrainerState(
        policy_params=init_params(p_spec, seeds[0], init_log_std=config.init_log_std),
        value_params=init_params(v_spec, seeds[1]),
        policy_spec=p_spec,
        value_spec=v_spec,
        scaler=ObservationScaler(p_spec.obs_dim, floor=config.scaler_floor),
        policy_optimizer=make_optimizer(config.optimizer, config.policy_lr),
        value_optimizer=make_optimizer(config.optimizer, config.value_lr),
        policy_lr=config.policy_lr,
        value_lr=config.value_lr,
        clip_epsilon=config.clip_epsilon,
        initial_policy_lr=config.policy_lr,
    )


def snapshot(state):
    return PolicySnapshot(
        policy_params=state.policy_params,
        policy_spec=state.policy_spec,
        value_params=state.value_params,
        value_spec=state.value_spec,
        scaler=state.scaler.copy(),
    )


def state_to_checkpoint(state, seed):
    return Checkpoint(
        policy_spec=state.policy_spec,
        value_spec=state.value_spec,
        policy_params=state.policy_params,
        value_params=state.value_params,
        extra={
            "scaler": state.scaler.to_array(),
            "trainer": np.array([state.update, state.policy_lr, state.value_lr, state.clip_epsilon, state.initial_policy_lr, seed], dtype=np.float64),
            "policy_optimizer": state.policy_optimizer.state_array(state.policy_params),
            "value_optimizer": state.value_optimizer.state_array(state.value_params),
        },
    )


def state_from_checkpoint(checkpoint, config):
    missing = [name for name in ("scaler", "trainer", "policy_optimizer", "value_optimizer") if name not in checkpoint.extra]
    if missing:
        raise CheckpointError(f"checkpoint cannot resume training, missing sections: {', '.join(missing)}")
    trainer = checkpoint.extra["trainer"]
    state = TrainerState(
        policy_params=checkpoint.policy_params,
        value_params=checkpoint.value_params,
        policy_spec=checkpoint.policy_spec,
        value_spec=checkpoint.value_spec,
        scaler=ObservationScaler.from_array(checkpoint.extra["scaler"]),
        policy_optimizer=make_optimizer(config.optimizer, float(trainer[1])),
        value_optimizer=make_optimizer(config.optimizer, float(trainer[2])),
        policy_lr=float(trainer[1]),
        value_lr=float(trainer[2]),
        clip_epsilon=float(trainer[3]),
        initial_policy_lr=float(trainer[4]),
        update=int(trainer[0]),
    )
    state.policy_optimizer.load_state_array(checkpoint.extra["policy_optimizer"], state.policy_params)
    state.value_optimizer.load_state_array(checkpoint.extra["value_optimizer"], state.value_params)
    return state


# Scaler statistics from a few episodes of the untrained policy
def warm_up_scaler(state, scenario, config):
    if config.scaler_warmup_episodes <= 0:
        return state
    batch = collect_rollouts(scenario, snapshot(state), config.scaler_warmup_episodes, config.seed, WARMUP_UPDATE, workers=config.workers)
    for episode in batch.usable:
        state.scaler.update(episode.raw_obs)
    logger.info("observation scaler warmed up on %d samples", state.scaler.count)
    return state


def batch_metrics(batch, state, diagnostics):
    episodes = batch.episodes
    totals = np.array([e.total_reward for e in episodes])
    steps = np.array([e.length for e in episodes])
    misses = np.array([e.info["miss"] for e in episodes if "miss" in e.info])
    bonuses = np.array([e.bonus for e in episodes])
    miss_stats = (misses.mean(), misses.std(), misses.min(), misses.max()) if misses.size else (np.nan,) * 4
    return {
        "Update": state.update,
        "Mean R": totals.mean(),
        "SD R": totals.mean() - totals.std(),
        "Min R": totals.min(),
        "Max R": totals.max(),
        "Mean Steps": steps.mean(),
        "Max Steps": int(steps.max()),
        "Mean Miss": miss_stats[0],
        "SD Miss": miss_stats[1],
        "Min Miss": miss_stats[2],
        "Max Miss": miss_stats[3],
        "Mean Terminal R": bonuses.mean(),
        "Terminal Rate": float((bonuses > 0.0).mean()),
        "KL": diagnostics.kl,
        "Clip": state.clip_epsilon,
        "Policy LR": state.policy_lr,
        "Value LR": state.value_lr,
        "Value Loss": diagnostics.value_loss,
        "Policy Passes": diagnostics.policy_passes,
        "Failures": batch.failures,
        "Skipped": int(diagnostics.skipped),
    }


def checkpoint_path(out_dir, update):
    return Path(out_dir) / "checkpoints" / f"update_{update:05d}.ckpt"


# One batch: collect with a frozen scaler, update, servo, then fold the batch into the scaler
def train_step(state, scenario, config, progress=None):
    state.update += 1
    batch = collect_rollouts(scenario, snapshot(state), config.episodes_per_batch, config.seed, state.update, workers=config.workers, progress=progress)
    if not batch.usable:
        raise RuntimeError(f"update {state.update}: every episode in the batch failed")
    compute_returns_advantages(batch, config)
    diagnostics = ppo_update(state, batch, config)
    kl_servo(state, diagnostics.kl, config)
    for episode in batch.usable:
        state.scaler.update(episode.raw_obs)
    return batch_metrics(batch, state, diagnostics)


def train(run_config, out_dir, updates=None, resume_from=None, show_progress=True, on_update=None):
    config = run_config.training
    scenario = run_config.scenario
    updates = config.updates if updates is None else updates
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.csv"
    logger.debug("train() called: %d updates into %s", updates, out_dir)

    rows = []
    if resume_from is not None:
        state = state_from_checkpoint(load_checkpoint(resume_from), config)
        logger.info("resuming from %s at update %d", resume_from, state.update)
        if metrics_path.is_file():
            previous = pd.read_csv(metrics_path)
            rows = previous[previous["Update"] <= state.update].to_dict("records")
    else:
        state = warm_up_scaler(new_trainer_state(config), scenario, config)

    saved = []
    last_saved = None
    bar = tqdm(total=updates, desc="train", unit="update", disable=not show_progress)
    try:
        for _ in range(updates):
            row = train_step(state, scenario, config)
            rows.append(row)
            pd.DataFrame(rows, columns=METRIC_COLUMNS).to_csv(metrics_path, index=False)
            logger.info(
                "update %d: mean R %.3f, min R %.3f, mean miss %.1f m, KL %.2e, clip %.3f, lr %.2e",
                state.update, row["Mean R"], row["Min R"], row["Mean Miss"], row["KL"], row["Clip"], row["Policy LR"],
            )
            if state.update % config.checkpoint_every == 0:
                saved.append(save_checkpoint(checkpoint_path(out_dir, state.update), state_to_checkpoint(state, config.seed)))
                last_saved = state.update
            if on_update is not None:
                on_update(row)
            bar.update(1)
            bar.set_postfix(mean_r=f"{row['Mean R']:.2f}", miss=f"{row['Mean Miss']:.1f}")
    finally:
        bar.close()
        # the last update always gets a checkpoint
        if last_saved != state.update:
            saved.append(save_checkpoint(checkpoint_path(out_dir, state.update), state_to_checkpoint(state, config.seed)))
        logger.info("final checkpoint written to %s", saved[-1])

    return TrainingResult(metrics=pd.DataFrame(rows, columns=METRIC_COLUMNS), checkpoints=saved, state=state)
