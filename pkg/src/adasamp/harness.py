"""Experiment harness: configs, metrics files, trials, and stability probes.

run_experiment trains `trials` independent runs of one sampler configuration on
a shared dataset, streaming per-iteration metrics to JSONL (with a CSV mirror)
and writing a final JSON report that echoes the config, the regularity
constants, per-trial summaries, and evaluated stability/generalization bounds
with the recorded utility-sum KL statistic substituted for KL(Q || P). All
output is deterministic for a fixed config and master seed: trials run in a
fixed order, and every float is serialized with 17 significant digits.

probe_stability estimates the replace-one-example stability beta and the
perturb-one-index stability gamma of the uniform-sampling strongly convex
regime empirically, for comparison against the closed-form coefficients.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os

import numpy as np

from . import bounds
from .adaptive import SamplerConfig, train
from .data import load_csv, synth_data
from .model import (
    PROB_FLOOR,
    Dataset,
    RegularityConstants,
    accuracy,
    default_domain_radius,
    mean_bounded_loss,
    objective_grad,
    predict_proba_batch,
    regularity_constants,
    zeros_hypothesis,
)
from .optim import StepSchedule, UpdateRuleState, apply_update

UTILITY_FLAGS = {"01": "zero_one", "l1": "l1"}


@dataclasses.dataclass
class ExperimentConfig:
    """Flat experiment configuration; field names match the CLI flags
    (``lambda`` is spelled ``decay``, ``M`` is ``loss_bound``)."""

    # data source: a CSV path, or the synthetic task below
    csv: str | None = None
    n: int = 2000
    test_n: int = 500
    dim: int = 8
    classes: int = 2
    imbalance: float = 0.7
    noise: float = 0.05
    separation: float = 3.4
    # model
    mu: float = 0.01
    loss_bound: float = 5.0
    domain_radius: float | None = None
    # sampler
    alpha: float = 2.0
    decay: float = 0.5
    utility: str = "l1"
    batch: int = 100
    iters: int = 4000
    track_kl: bool = False
    # optimizer
    rule: str = "sgd"
    schedule: str = "inverse_decay"
    eta: float = 0.05
    kappa: float = 0.001
    # experiment
    trials: int = 10
    seed: int = 0
    cadence: int = 20
    delta: float = 0.05
    target: float | None = None
    out: str | None = None

    def __post_init__(self):
        if self.utility in UTILITY_FLAGS:
            self.utility = UTILITY_FLAGS[self.utility]
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    def sampler_config(self, alpha: float | None = None) -> SamplerConfig:
        return SamplerConfig(
            amplitude=self.alpha if alpha is None else alpha,
            decay=self.decay,
            utility=self.utility,
            batch_size=self.batch,
            iterations=self.iters,
            track_full_conditional_kl=self.track_kl,
        )

    def step_schedule(self, consts: RegularityConstants) -> StepSchedule:
        if self.schedule == "constant":
            return StepSchedule.constant(self.eta)
        if self.schedule == "inverse_decay":
            return StepSchedule.inverse_decay(self.eta, self.kappa)
        if self.schedule == "strongly_convex":
            return StepSchedule.strongly_convex(self.mu, consts.smoothness)
        raise ValueError(f"unknown schedule {self.schedule!r}")


@dataclasses.dataclass(frozen=True)
class MetricsRecord:
    """One metrics row: risks are M-clamped means, kl_stat is the running
    utility-sum KL statistic through the previous iteration, conditional_kl is
    the tracked KL(Q_t || uniform) (None when tracking is off)."""

    iteration: int
    empirical_risk: float
    heldout_risk: float
    train_accuracy: float
    test_accuracy: float
    kl_stat: float
    conditional_kl: float | None

    def row(self) -> dict:
        return {
            "iteration": self.iteration,
            "empirical_risk": self.empirical_risk,
            "heldout_risk": self.heldout_risk,
            "train_accuracy": self.train_accuracy,
            "test_accuracy": self.test_accuracy,
            "kl_stat": self.kl_stat,
            "conditional_kl": self.conditional_kl,
        }


@dataclasses.dataclass
class TrialResult:
    trial: int
    metrics: list
    final_h: np.ndarray
    kl_stat: float
    summary: dict


@dataclasses.dataclass
class ExperimentResult:
    config: ExperimentConfig
    train_ds: Dataset
    test_ds: Dataset
    constants: RegularityConstants
    trials: list
    report: dict
    out_dir: str | None


# ---- deterministic serialization: every float at 17 significant digits ----

def format_float(x: float) -> str:
    return f"{x:.17g}"


def _render(obj) -> str:
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, np.integer)):
        return json.dumps(None if obj is None else bool(obj) if isinstance(obj, bool) else int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_render(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps_json(obj) -> str:
    """json.dumps lookalike with floats rendered at 17 significant digits."""
    return _render(obj)


def write_metrics(records, jsonl_path, csv_path) -> None:
    with open(jsonl_path, "w") as fh:
        for rec in records:
            fh.write(dumps_json(rec.row()) + "\n")
    keys = ["iteration", "empirical_risk", "heldout_risk", "train_accuracy",
            "test_accuracy", "kl_stat", "conditional_kl"]
    with open(csv_path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for rec in records:
            row = rec.row()
            cells = []
            for k in keys:
                v = row[k]
                if v is None:
                    cells.append("")
                elif isinstance(v, (int, np.integer)):
                    cells.append(str(int(v)))
                else:
                    cells.append(format_float(float(v)))
            fh.write(",".join(cells) + "\n")


# ---- dataset assembly ----

def build_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """(train, test) from the configured source; the synthetic path draws
    n + test_n examples in one call so both splits share the task."""
    if cfg.csv is not None:
        full = load_csv(cfg.csv)
        if not 0 < cfg.test_n < full.n:
            raise ValueError("test_n must leave both splits nonempty")
        return full.split(full.n - cfg.test_n)
    full = synth_data(cfg.n + cfg.test_n, cfg.dim, cfg.classes, cfg.imbalance,
                      cfg.noise, seed=_data_seed(cfg.seed), separation=cfg.separation)
    return full.split(cfg.n)


def _data_seed(master_seed: int) -> np.random.SeedSequence:
    data_ss, _ = np.random.SeedSequence(master_seed).spawn(2)
    return data_ss


def _trial_streams(master_seed: int, trials: int):
    _, trial_root = np.random.SeedSequence(master_seed).spawn(2)
    for child in trial_root.spawn(trials):
        init_ss, sample_ss = child.spawn(2)
        yield np.random.default_rng(init_ss), np.random.default_rng(sample_ss)


# ---- experiment driver ----

def run_experiment(cfg: ExperimentConfig, alpha: float | None = None) -> ExperimentResult:
    """Train `cfg.trials` runs of one sampler setting (alpha overrides cfg.alpha)
    and assemble metrics plus the final bound report. Writes
    trial_<k>.metrics.jsonl / .csv and report.json under cfg.out when set."""
    train_ds, test_ds = build_datasets(cfg)
    consts = regularity_constants(train_ds, cfg.mu, cfg.loss_bound, cfg.domain_radius)
    radius = cfg.domain_radius
    if radius is None and cfg.mu > 0:
        radius = default_domain_radius(train_ds, cfg.mu)
    sched = cfg.step_schedule(consts)
    sampler = cfg.sampler_config(alpha)
    out_dir = None
    if cfg.out is not None:
        out_dir = str(cfg.out)
        os.makedirs(out_dir, exist_ok=True)

    trials = []
    for trial, (init_rng, sample_rng) in enumerate(_trial_streams(cfg.seed, cfg.trials)):
        h0 = 0.01 * init_rng.standard_normal((train_ds.num_classes, train_ds.feature_dim))
        rule = _make_rule(cfg, h0.shape)
        records = []

        def metric_fn(t, h, kl_stat, cond_kl):
            rec = MetricsRecord(
                iteration=t,
                empirical_risk=mean_bounded_loss(h, train_ds, cfg.loss_bound),
                heldout_risk=mean_bounded_loss(h, test_ds, cfg.loss_bound),
                train_accuracy=accuracy(h, train_ds),
                test_accuracy=accuracy(h, test_ds),
                kl_stat=kl_stat,
                conditional_kl=cond_kl,
            )
            records.append(rec)
            return rec

        h, trace = train(train_ds, sampler, sched, rule, cfg.mu, cfg.loss_bound,
                         h0, sample_rng, domain_radius=radius,
                         metric_every=cfg.cadence, metric_fn=metric_fn)
        kl_stat = bounds.kl_from_utility_sum(trace)
        summary = _trial_summary(cfg, records, kl_stat)
        trials.append(TrialResult(trial, records, h, kl_stat, summary))
        if out_dir is not None:
            write_metrics(records,
                          os.path.join(out_dir, f"trial_{trial}.metrics.jsonl"),
                          os.path.join(out_dir, f"trial_{trial}.metrics.csv"))

    report = build_report(cfg, sampler, consts, train_ds, test_ds, trials)
    if out_dir is not None:
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            fh.write(dumps_json(report) + "\n")
    return ExperimentResult(cfg, train_ds, test_ds, consts, trials, report, out_dir)


def _make_rule(cfg: ExperimentConfig, shape) -> UpdateRuleState:
    if cfg.rule == "sgd":
        return UpdateRuleState.sgd()
    if cfg.rule == "adagrad":
        return UpdateRuleState.adagrad(shape)
    raise ValueError(f"unknown update rule {cfg.rule!r}")


def _trial_summary(cfg: ExperimentConfig, records, kl_stat: float) -> dict:
    final = records[-1]
    summary = {
        "final_empirical_risk": final.empirical_risk,
        "final_heldout_risk": final.heldout_risk,
        "final_train_accuracy": final.train_accuracy,
        "final_test_accuracy": final.test_accuracy,
        "kl_stat": kl_stat,
    }
    if cfg.target is not None:
        summary["iterations_to_target"] = iterations_to_target(records, cfg.target)
    return summary


def iterations_to_target(records, target: float) -> int | None:
    """First recorded iteration whose empirical risk is <= target (None if never)."""
    for rec in records:
        if rec.empirical_risk <= target:
            return rec.iteration
    return None


def risk_at(records, iteration: int) -> float:
    """Empirical risk at the last record with iteration <= the given one."""
    best = records[0]
    for rec in records:
        if rec.iteration <= iteration:
            best = rec
    return best.empirical_risk


SCHEDULE_NOTE = (
    "stability coefficients for the convex/nonconvex/initial-risk formulas assume "
    "step sizes eta_t <= eta/t; constant schedules do not satisfy this, and "
    "eta/(1+kappa*t) satisfies it with eta' = eta/kappa only when kappa > 0. "
    "Values below echo the configured eta at face value."
)


def build_report(cfg: ExperimentConfig, sampler: SamplerConfig, consts: RegularityConstants,
                 train_ds: Dataset, test_ds: Dataset, trials) -> dict:
    """The final JSON report: config echo, constants, per-trial summaries and
    bound evaluations (KL statistic plugged in), and cross-trial aggregates."""
    n, T = train_ds.n, cfg.iters
    h0_risk = mean_bounded_loss(zeros_hypothesis(train_ds.num_classes, train_ds.feature_dim),
                                test_ds, consts.loss_bound)
    trial_rows = []
    for tr in trials:
        row = dict(tr.summary)
        row["trial"] = tr.trial
        row["bounds"] = _trial_bounds(cfg, consts, n, T, tr.kl_stat, h0_risk)
        trial_rows.append(row)
    agg = {}
    for key in ("final_empirical_risk", "final_heldout_risk", "final_train_accuracy",
                "final_test_accuracy", "kl_stat"):
        vals = [tr.summary[key] for tr in trials]
        agg[f"median_{key}"] = float(np.median(vals))
        agg[f"mean_{key}"] = float(np.mean(vals))
    return {
        "config": _config_echo(cfg, sampler),
        "constants": {
            "lipschitz": consts.lipschitz,
            "smoothness": consts.smoothness,
            "strong_convexity": consts.strong_convexity,
            "loss_bound": consts.loss_bound,
            "feature_radius": train_ds.feature_radius,
            "train_n": train_ds.n,
            "test_n": test_ds.n,
        },
        "schedule_note": SCHEDULE_NOTE,
        "trials": trial_rows,
        "aggregate": agg,
    }


def _trial_bounds(cfg: ExperimentConfig, consts: RegularityConstants, n: int, T: int,
                  kl_stat: float, h0_risk: float) -> dict:
    L, M, mu, delta = consts.lipschitz, consts.loss_bound, cfg.mu, cfg.delta
    eta = cfg.eta
    out = {
        "stability_convex": bounds.sgd_stability_convex(L, eta, T, n),
        "stability_initial_risk": bounds.sgd_stability_initial_risk(
            L, eta, T, n, consts.smoothness, h0_risk),
        "h0_risk": h0_risk,
    }
    if mu > 0:
        beta, gamma = bounds.sgd_stability_strongly_convex(L, mu, n, T)
        out["stability_strongly_convex_beta"] = beta
        out["stability_strongly_convex_gamma"] = gamma
        out["gen_kl"] = bounds.gen_bound_kl(kl_stat, M, n, T, beta, gamma, delta).to_json()
        out["gen_sgd_strongly_convex"] = bounds.gen_bound_sgd_strongly_convex(
            kl_stat, M, L, mu, n, T, delta).to_json()
        out["gen_derandomized"] = bounds.gen_bound_derandomized(
            kl_stat, M, n, T, beta, gamma, delta).to_json()
    else:
        out["note"] = "mu = 0: no strongly-convex (beta, gamma) pair; KL bounds omitted"
    return out


def _config_echo(cfg: ExperimentConfig, sampler: SamplerConfig) -> dict:
    echo = dataclasses.asdict(cfg)
    echo["alpha"] = sampler.amplitude
    return echo


# ---- arm comparison (uniform vs adaptive) ----

def run_comparison(cfg: ExperimentConfig, alphas=None) -> dict:
    """Run a uniform arm (alpha 0) plus one arm per value in `alphas` (default:
    just cfg.alpha) on the same data and seeds; compare iterations-to-target.

    The per-trial loss target defaults to 1.2x the uniform arm's empirical risk
    at T/2 for that trial. Writes each arm under out/<arm>/ plus comparison.json.
    """
    if alphas is None:
        alphas = [cfg.alpha]
    base_out = cfg.out
    arms = {}
    arm_results = {}
    for name, alpha in [("uniform", 0.0)] + [(f"alpha_{a:g}", a) for a in alphas]:
        arm_cfg = dataclasses.replace(cfg, out=None if base_out is None
                                      else os.path.join(base_out, name))
        arm_results[name] = run_experiment(arm_cfg, alpha=alpha)
        arms[name] = alpha

    uniform = arm_results["uniform"]
    targets = []
    for tr in uniform.trials:
        targets.append(1.2 * risk_at(tr.metrics, cfg.iters // 2)
                       if cfg.target is None else cfg.target)
    comparison = {"targets": targets, "arms": {}}
    for name, result in arm_results.items():
        iters = [iterations_to_target(tr.metrics, targets[k])
                 for k, tr in enumerate(result.trials)]
        finite = [i if i is not None else cfg.iters + 1 for i in iters]
        comparison["arms"][name] = {
            "alpha": arms[name],
            "iterations_to_target": iters,
            "median_iterations_to_target": float(np.median(finite)),
            "kl_stat_mean": float(np.mean([tr.kl_stat for tr in result.trials])),
            "kl_stat_median": float(np.median([tr.kl_stat for tr in result.trials])),
        }
    if base_out is not None:
        with open(os.path.join(base_out, "comparison.json"), "w") as fh:
            fh.write(dumps_json(comparison) + "\n")
    return {"comparison": comparison, "results": arm_results}


# ---- empirical stability probes ----

@dataclasses.dataclass(frozen=True)
class StabilityProbeResult:
    """Empirical stability estimates next to the closed-form coefficients.
    data_diffs / hyper_diffs hold one value per probe; the emp fields are the
    maxima (the empirical analogues of the sup in the definitions)."""

    beta_emp: float
    gamma_emp: float
    beta_bound: float
    gamma_bound: float
    data_diffs: np.ndarray
    hyper_diffs: np.ndarray


def _run_indexed(ds: Dataset, indices, sched, mu, h0, radius) -> np.ndarray:
    """Plain SGD driven by a forced index sequence (the coupled runs of the
    stability definitions). Always batch 1, sgd rule, no reweighting."""
    h = h0.copy()
    state = UpdateRuleState.sgd()
    for t, i in enumerate(indices, start=1):
        g = objective_grad(h, ds.example(int(i)), mu)
        h = apply_update(h, [g], t, sched, state, radius)
    return h


def probe_stability(cfg: ExperimentConfig, perturbations: int,
                    probe_seeds: int = 8, eval_n: int = 200) -> StabilityProbeResult:
    """Empirical replace-one-example and perturb-one-index stability probes.

    Requires mu > 0; runs the strongly-convex regime exactly: uniform sampling
    (sequences drawn from the uniform prior), eta_t = 1/(mu t + smoothness),
    batch 1, shared zero init. The data probe couples runs on S and on S-with-
    one-replacement through shared index sequences and averages over
    `probe_seeds` sequences before taking absolute differences; the sequence
    probe compares two runs on sequences differing in exactly one position.
    Returns max (and per-probe) loss differences over `eval_n` fresh points.
    """
    if cfg.mu <= 0:
        raise ValueError("stability probes need mu > 0")
    if perturbations < 1:
        raise ValueError("perturbations must be >= 1")
    n, T, M, mu = cfg.n, cfg.iters, cfg.loss_bound, cfg.mu
    pool = synth_data(n + perturbations + eval_n, cfg.dim, cfg.classes, cfg.imbalance,
                      cfg.noise, seed=_data_seed(cfg.seed), separation=cfg.separation)
    consts = regularity_constants(pool, mu, M)
    radius = default_domain_radius(pool, mu)
    sched = StepSchedule.strongly_convex(mu, consts.smoothness)
    S = Dataset.from_arrays(pool.features[:n], pool.labels[:n], pool.num_classes)
    repl = slice(n, n + perturbations)
    eval_X = pool.features[n + perturbations:]
    eval_y = pool.labels[n + perturbations:]
    h0 = zeros_hypothesis(pool.num_classes, pool.feature_dim)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(3)[2])

    def losses(h):
        P = predict_proba_batch(h, eval_X)
        py = np.maximum(P[np.arange(eval_X.shape[0]), eval_y], PROB_FLOOR)
        return np.minimum(-np.log(py), M)

    # replace-one-example probe: |E_r[L(A(S,r),z) - L(A(S',r),z)]|, max over z
    seqs = [rng.integers(0, n, size=T) for _ in range(probe_seeds)]
    base_losses = [losses(_run_indexed(S, seq, sched, mu, h0, radius)) for seq in seqs]
    data_diffs = np.zeros(perturbations)
    for p in range(perturbations):
        site = int(rng.integers(n))
        X2 = S.features.copy()
        y2 = S.labels.copy()
        X2[site] = pool.features[repl][p]
        y2[site] = pool.labels[repl][p]
        S2 = Dataset.from_arrays(X2, y2, pool.num_classes)
        gap = np.zeros(eval_X.shape[0])
        for j, seq in enumerate(seqs):
            gap += base_losses[j] - losses(_run_indexed(S2, seq, sched, mu, h0, radius))
        data_diffs[p] = np.abs(gap / probe_seeds).max()

    # perturb-one-index probe: sequences at Hamming distance one
    hyper_diffs = np.zeros(perturbations)
    for p in range(perturbations):
        seq = rng.integers(0, n, size=T)
        k = int(rng.integers(T))
        v = int(rng.integers(n - 1))
        seq2 = seq.copy()
        seq2[k] = v + (v >= seq[k])
        la = losses(_run_indexed(S, seq, sched, mu, h0, radius))
        lb = losses(_run_indexed(S, seq2, sched, mu, h0, radius))
        hyper_diffs[p] = np.abs(la - lb).max()

    beta_bound, gamma_bound = bounds.sgd_stability_strongly_convex(consts.lipschitz, mu, n, T)
    return StabilityProbeResult(float(data_diffs.max()), float(hyper_diffs.max()),
                                beta_bound, gamma_bound, data_diffs, hyper_diffs)
