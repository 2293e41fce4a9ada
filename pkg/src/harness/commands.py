# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Bodies of the command-line subcommands.

Each command takes a resolved RunConfig, reads inputs from ``source`` (the run
directory by default) and writes outputs, reports and its manifest into
``config.campaign.out``.
"""

import io
import logging
import time
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..common.config import config_digest, echo_config
from ..common.storage import read_bytes, write_bytes
from ..common.validation import ConfigurationError, RunConfig, config_from_dict
from ..diffusion.denoiser import DenoiserModel
from ..diffusion.training import scenario_evaluator, train_teacher
from ..distill.dataset import build_teacher_dataset, write_dataset
from ..distill.gan import build_discriminator, gan_distill
from ..distill.student import pretrain_student, supervised_pretrain
from ..metrics.features import epsilon_feature_set, manifold_scores, trajectory_feature_set
from ..metrics.manifold import FeatureLabel, FeatureSet
from ..metrics.rates import delay_rate, failure_rate
from ..metrics.ztest import two_proportion_z
from ..planner.robust import write_rollout_log
from ..sim.geometry import Branch
from ..sim.noise import NoisePrior, rng_for
from ..sim.outcomes import SimOutcome, read_outcomes, write_outcomes, write_outcomes_csv
from . import reports
from .campaigns import run_mc_campaign, run_plan_campaign, scenario_seed
from .manifest import ArtifactLayout, CommandRecord, read_manifest, write_manifest

logger = logging.getLogger(__name__)

MODELS = ("teacher", "student")


def save_array(path: Path, values: np.ndarray) -> Path:
    buffer = io.BytesIO()
    np.save(buffer, np.asarray(values), allow_pickle=False)
    return write_bytes(path, buffer.getvalue())


def load_array(path: Path) -> np.ndarray:
    return np.load(io.BytesIO(read_bytes(path)), allow_pickle=False)


def _spawns(config: RunConfig) -> list[Branch]:
    return [Branch.parse(name) for name in config.campaign.scenarios]


def _begin(
    command: str, config: RunConfig, source: Path | None
) -> tuple[CommandRecord, ArtifactLayout, ArtifactLayout]:
    target = Path(config.campaign.out)
    origin = Path(source) if source is not None else target
    echo_config(config, target)
    logger.info(f"Running '{command}' for scenarios {config.campaign.scenarios} into {target}")
    return CommandRecord(command, origin, target), ArtifactLayout(origin), ArtifactLayout(target)


def cmd_mc(config: RunConfig, source: Path | None = None) -> CommandRecord:
    """Prior-noise IDM campaigns; persists every outcome plus the failure subset."""
    record, _, out = _begin("mc", config, source)
    prior = NoisePrior.from_config(config.noise)
    rows = []
    for spawn in _spawns(config):
        episodes = run_mc_campaign(config, spawn, config.campaign.mc_count, config.campaign.workers)
        outcomes = [e.outcome for e in episodes]
        failures = [e.outcome for e in episodes if e.outcome.collided]
        noise_dim = config.world.horizon * 4
        kept = [np.reshape(e.noise, -1) for e in episodes if e.noise is not None]
        noise = np.stack(kept) if kept else np.empty((0, noise_dim))
        record.wrote(write_outcomes(out.mc_outcomes(spawn), outcomes))
        record.wrote(write_outcomes(out.mc_failures(spawn), failures))
        record.wrote(write_outcomes_csv(out.mc_failures_csv(spawn), failures))
        record.wrote(save_array(out.mc_failure_noise(spawn), noise.astype(np.float32)))
        rows.append(
            {
                "scenario": spawn.label,
                "simulations": len(outcomes),
                "failures": len(failures),
                "failure_rate": failure_rate(outcomes) if outcomes else 0.0,
                "noise_variance": prior.variance,
                "noise_inflation": config.noise.inflation,
            }
        )
    record.wrote(reports.write_report(out.report("mc"), reports.MC_COLUMNS, rows))
    write_manifest(record, config)
    return record


def cmd_train(config: RunConfig, source: Path | None = None) -> CommandRecord:
    """Train one diffusion failure sampler per scenario."""
    record, _, out = _begin("train", config, source)
    rows = []
    for spawn in _spawns(config):
        evaluator = scenario_evaluator(config, spawn)
        teacher = train_teacher(
            evaluator, config.diffusion, seed=scenario_seed(config.campaign.seed, spawn), scenario=spawn.label
        )
        record.wrote(teacher.save(out.teacher(spawn)))
        for entry in teacher.history:
            rows.append({"scenario": spawn.label} | {c: entry.get(c) for c in reports.TRAINING_COLUMNS[1:]})
    record.wrote(reports.write_report(out.report("training"), reports.TRAINING_COLUMNS, rows))
    write_manifest(record, config)
    return record


def cmd_distill(config: RunConfig, source: Path | None = None) -> CommandRecord:
    """Teacher dataset, student pretraining, supervised warm-up and adversarial distillation."""
    record, src, out = _begin("distill", config, source)
    distill = config.distill
    rows = []
    for spawn in _spawns(config):
        seed = scenario_seed(config.campaign.seed, spawn)
        teacher = DenoiserModel.load(record.read(src.teacher(spawn), "train"))
        evaluator = scenario_evaluator(config, spawn)
        dataset = build_teacher_dataset(teacher, evaluator, distill.dataset_size, rng_for(seed, 0))
        record.wrote(write_dataset(out.dataset(spawn), dataset))
        train, held = dataset.split(distill.validation_fraction, seed)
        student = pretrain_student(evaluator, config.diffusion, distill, teacher, seed)
        supervised_pretrain(student, train, distill, seed, held)
        discriminator = build_discriminator(student.noise_dim, distill, student.encoder, seed)
        result = gan_distill(student, discriminator, teacher, train, distill, held, seed)
        record.wrote(result.student.save(out.student(spawn)))
        for entry in result.history:
            rows.append({"scenario": spawn.label} | {c: entry.get(c) for c in reports.DISTILL_COLUMNS[1:]})
        logger.info(
            f"Distilled {spawn.label}: best score {result.best_score:.4f} at iteration {result.best_iteration}"
        )
    record.wrote(reports.write_report(out.report("distill"), reports.DISTILL_COLUMNS, rows))
    write_manifest(record, config)
    return record


def cmd_sample(config: RunConfig, source: Path | None = None) -> CommandRecord:
    """Sample both models at robustness 0 on shared initial states, simulate and time them."""
    record, src, out = _begin("sample", config, source)
    count = config.metrics.sample_count
    rows = []
    for spawn in _spawns(config):
        seed = scenario_seed(config.campaign.seed, spawn)
        evaluator = scenario_evaluator(config, spawn)
        case_rng = rng_for(seed, 0)
        cases = [evaluator.sample_s0(case_rng) for _ in range(count)]
        s0 = np.stack([case.s0 for case in cases])
        seconds: dict[str, float] = {}
        for stream, model_name in enumerate(MODELS, start=1):
            producer = "train" if model_name == "teacher" else "distill"
            path = src.teacher(spawn) if model_name == "teacher" else src.student(spawn)
            model = DenoiserModel.load(record.read(path, producer))
            started = time.perf_counter()
            noise = model.sample_batch(np.zeros(count), s0, rng_for(seed, stream)).astype(np.float32)
            seconds[model_name] = time.perf_counter() - started
            outcomes = [
                evaluator.simulator.run_simulation(
                    case.scenario, case.initial, noise[i].astype(np.float64).reshape(evaluator.simulator.horizon, 4)
                )
                for i, case in enumerate(cases)
            ]
            record.wrote(write_outcomes(out.samples(spawn, model_name), outcomes))
            record.wrote(save_array(out.sample_noise(spawn, model_name), noise))
            logger.info(
                f"{spawn.label} {model_name}: {sum(o.collided for o in outcomes)}/{count} failures, "
                f"{seconds[model_name]:.2f}s sampling"
            )
        for model_name in MODELS:
            rows.append(
                {
                    "scenario": spawn.label,
                    "model": model_name,
                    "samples": count,
                    "seconds": seconds[model_name],
                    "seconds_per_1000": 1000.0 * seconds[model_name] / count,
                    "speedup": seconds["teacher"] / max(seconds[model_name], 1e-12),
                }
            )
    record.wrote(reports.write_report(out.report("timing"), reports.TIMING_COLUMNS, rows), volatile=True)
    write_manifest(record, config)
    return record


def _real_failures(
    config: RunConfig, record: CommandRecord, src: ArtifactLayout, spawn: Branch
) -> FeatureSet | None:
    if config.metrics.feature_space == "epsilon":
        noise = load_array(record.read(src.mc_failure_noise(spawn), "mc"))
        return epsilon_feature_set(noise) if len(noise) else None
    failures = read_outcomes(record.read(src.mc_failures(spawn), "mc"))
    return trajectory_feature_set(failures) if failures else None


def _generated_failures(
    config: RunConfig, outcomes: list[SimOutcome], noise: np.ndarray
) -> FeatureSet | None:
    failed = [i for i, o in enumerate(outcomes) if o.collided]
    if not failed:
        return None
    if config.metrics.feature_space == "epsilon":
        return epsilon_feature_set(noise[failed], FeatureLabel.GENERATED)
    return trajectory_feature_set([outcomes[i] for i in failed], FeatureLabel.GENERATED)


def cmd_metrics(config: RunConfig, source: Path | None = None) -> CommandRecord:
    """Failure rate, density and coverage of each model's failures against the Monte Carlo failures."""
    record, src, out = _begin("metrics", config, source)
    k = config.metrics.k
    rows = []
    for spawn in _spawns(config):
        real = _real_failures(config, record, src, spawn)
        for model_name in MODELS:
            outcomes = read_outcomes(record.read(src.samples(spawn, model_name), "sample"))
            noise = load_array(record.read(src.sample_noise(spawn, model_name), "sample"))
            generated = _generated_failures(config, outcomes, noise)
            scores: dict[str, float | None] = {"density": None, "coverage": None}
            real_count = 0 if real is None else len(real)
            if real is None or generated is None or real_count <= k:
                logger.warning(
                    f"{spawn.label} {model_name}: density/coverage undefined "
                    f"({real_count} real failures, {0 if generated is None else len(generated)} generated)"
                )
            else:
                scores = manifold_scores(real, generated, k)  # type: ignore[assignment]
            rows.append(
                {"scenario": spawn.label, "model": model_name, "failure_rate": failure_rate(outcomes)} | scores
            )
    record.wrote(reports.write_report(out.report("metrics"), reports.METRICS_COLUMNS, rows))
    write_manifest(record, config)
    return record


def cmd_plan_eval(config: RunConfig, source: Path | None = None) -> CommandRecord:
    """Paired IDM versus robust-planner campaigns with a one-tailed z-test on failure rates."""
    count = config.campaign.plan_eval_count
    if count < 1:
        logger.error("plan-eval was asked to run an empty campaign")
        raise ConfigurationError("plan-eval needs at least one simulation (campaign.plan_eval_count >= 1)")
    record, src, out = _begin("plan-eval", config, source)
    rows, tests = [], []
    for spawn in _spawns(config):
        student_path = record.read(src.student(spawn), "distill")
        episodes = run_plan_campaign(config, spawn, str(student_path), count, config.campaign.workers)
        idm_failures = sum(e.idm_failed for e in episodes)
        robust_failures = sum(e.robust_failed for e in episodes)
        for controller, failures, delays in (
            ("idm", idm_failures, [e.idm_delayed for e in episodes]),
            ("robust_planner", robust_failures, [e.robust_delayed for e in episodes]),
        ):
            rows.append(
                {
                    "scenario": spawn.label,
                    "controller": controller,
                    "simulations": count,
                    "failures": failures,
                    "failure_rate": failures / count,
                    "delays": sum(delays),
                    "delay_rate": delay_rate(delays),
                }
            )
        result = two_proportion_z(idm_failures, count, robust_failures, count)
        tests.append(
            {
                "scenario": spawn.label,
                "z": result.z,
                "p_value": result.p_value,
                "significant": result.significant(),
                "degenerate": result.degenerate,
            }
        )
        if episodes and episodes[0].rollout:
            record.wrote(write_rollout_log(out.rollout(spawn, 0), episodes[0].rollout))
    record.wrote(reports.write_report(out.report("plan_eval"), reports.PLANNER_COLUMNS, rows))
    record.wrote(reports.write_report(out.report("plan_eval_ztest"), reports.ZTEST_COLUMNS, tests))
    write_manifest(record, config)
    return record


COMMANDS: dict[str, Callable[[RunConfig, Path | None], CommandRecord]] = {
    "mc": cmd_mc,
    "train": cmd_train,
    "distill": cmd_distill,
    "sample": cmd_sample,
    "metrics": cmd_metrics,
    "plan-eval": cmd_plan_eval,
}


@dataclass
class ReplayResult:
    command: str
    matched: list[str] = field(default_factory=list)
    mismatched: list[str] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)

    @property
    def identical(self) -> bool:
        return not self.mismatched and not self.missing


def _recorded_config(manifest: dict, command: str) -> RunConfig:
    if "config" not in manifest:
        raise ConfigurationError(f"Manifest for '{command}' does not record its configuration")
    resolved = config_from_dict(manifest["config"])
    if config_digest(resolved) != manifest["config_sha256"]:
        raise ConfigurationError(f"Manifest for '{command}' does not match its recorded config_sha256")
    return resolved


def cmd_replay(config: RunConfig, command: str) -> ReplayResult:
    """
    Re-run a recorded command into ``<out>/replay`` with the configuration its manifest recorded.

    Inputs are read from the original run directory; output hashes are compared
    with the recorded manifest (volatile outputs such as timings are skipped).
    """
    if command not in COMMANDS:
        raise ConfigurationError(f"Cannot replay unknown command: {command}. Must be one of: {sorted(COMMANDS)}")
    root = Path(config.campaign.out)
    recorded = read_manifest(root, command)
    resolved = _recorded_config(recorded, command)
    replay_config = replace(resolved, campaign=replace(resolved.campaign, out=str(root / "replay")))
    COMMANDS[command](replay_config, root)
    fresh = read_manifest(root / "replay", command)

    result = ReplayResult(command)
    for name, digest in sorted(recorded["outputs"].items()):
        if name not in fresh["outputs"]:
            result.missing.append(name)
        elif fresh["outputs"][name] == digest:
            result.matched.append(name)
        else:
            result.mismatched.append(name)
    if result.identical:
        logger.info(f"Replay of '{command}' reproduced all {len(result.matched)} outputs")
    else:
        logger.error(
            f"Replay of '{command}' differs: {len(result.mismatched)} mismatched, {len(result.missing)} missing"
        )
    return result
