"""Experiment orchestration: configs, campaign runs, logs, comparisons.

A single YAML file describes one experiment: the loop (plant, controller,
sample time, horizon), the reference moves, the basis, the criterion
weights, and the learner settings.  Key names carry their unit where one
exists (sample_time_s, displacement_m, ...).  Unknown keys are rejected,
every validation problem is reported in one aggregated error, and every
defaulted field is echoed into the run's metadata file so a run can be
reproduced from its metadata alone.

Directory layout of a run:

    <out>/metadata.yaml              config echo + derived values
    <out>/noilc/trial_log.csv        model-based log (method noilc|both)
    <out>/noilc/e_final.csv, f_final.csv
    <out>/acilc_seed<k>/...          one model-free run per seed
"""

from __future__ import annotations

import concurrent.futures
import os
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__
from .numerics import SeededSampler, Weight, Weighting
from .lti import TransferFunction, closed_loop_maps
from .trajectory import MoveSpec, third_order_reference, build_basis, identity_basis
from .noilc import run_noilc
from .acilc import (DecaySchedule, DivergenceError, LearnerSchedules, MdpConfig,
                    run_acilc)
from .records import read_trial_log, write_signal, write_trial_log


class ConfigError(ValueError):
    """All validation problems of one config, aggregated."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" +
                         "\n".join("  - " + p for p in self.problems))


@dataclass(frozen=True)
class ExperimentConfig:
    plant: TransferFunction
    controller: TransferFunction
    horizon: int
    segments: tuple
    basis_kind: str
    weighting: Weighting
    method: str
    num_trials: int
    gamma: float
    schedules: LearnerSchedules
    seeds: tuple
    feature_scaling: tuple | None
    output_dir: str
    raw: dict = field(repr=False)
    defaulted: tuple = ()


@dataclass(frozen=True)
class RunSummary:
    method: str
    seed: int | None
    final_cost: float
    min_cost: float
    convergence_trial: int
    final_upsilon: np.ndarray
    convergence_margin: float | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    out_dir: str
    gains: object | None
    noilc_records: list | None
    acilc_records: dict
    acilc_failures: dict


_SEGMENT_KEYS = {"displacement_m", "max_velocity_mps", "max_acceleration_mps2",
                 "max_jerk_mps3", "rest_duration_s"}
_SCHEDULE_KEYS = {"initial", "rate", "floor"}
_TOP_KEYS = {"plant", "controller", "sample_time_s", "horizon_samples",
             "reference", "basis", "weights", "method", "num_trials", "gamma",
             "schedules", "seeds", "feature_scaling", "output_dir"}

_DEFAULTS = {
    "basis": "derivative",
    "weights.error": 1.0,
    "weights.parameter": 0.0,
    "weights.parameter_change": 0.0,
    "method": "both",
    "num_trials": 40,
    "gamma": 0.9,
    "schedules.alpha_w": {"initial": 0.05, "rate": 0.95, "floor": 1e-4},
    "schedules.alpha_theta": {"initial": 0.01, "rate": 0.95, "floor": 1e-5},
    "schedules.sigma": {"initial": 0.1, "rate": 0.9, "floor": 1e-3},
    "seeds": [0],
    "feature_scaling": None,
}


def _reject_unknown(mapping, allowed, prefix, problems):
    for key in mapping:
        if key not in allowed:
            problems.append("%s%s: unknown key" % (prefix, key))


def _get_number(mapping, key, problems, prefix="", positive=False, nonneg=False):
    val = mapping.get(key)
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        problems.append("%s%s: expected a number, got %r" % (prefix, key, val))
        return None
    val = float(val)
    if positive and val <= 0.0:
        problems.append("%s%s: must be positive, got %g" % (prefix, key, val))
        return None
    if nonneg and val < 0.0:
        problems.append("%s%s: must be nonnegative, got %g" % (prefix, key, val))
        return None
    return val


def _coeff_list(section, name, key, problems):
    block = section.get(key) if isinstance(section, dict) else None
    if not isinstance(block, (list, tuple)) or not block \
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in block):
        problems.append("%s.%s: expected a nonempty list of numbers" % (name, key))
        return None
    return [float(v) for v in block]


def _parse_schedule(block, name, problems):
    if not isinstance(block, dict):
        problems.append("schedules.%s: expected a mapping with initial/rate/floor" % name)
        return None
    _reject_unknown(block, _SCHEDULE_KEYS, "schedules.%s." % name, problems)
    initial = _get_number(block, "initial", problems, "schedules.%s." % name, nonneg=True)
    rate = _get_number(block, "rate", problems, "schedules.%s." % name, positive=True)
    floor = _get_number(block, "floor", problems, "schedules.%s." % name, nonneg=True)
    if None in (initial, rate, floor):
        return None
    if rate > 1.0:
        problems.append("schedules.%s.rate: must be at most 1 (nonincreasing), got %g"
                        % (name, rate))
        return None
    return DecaySchedule(initial, rate, floor)


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config (or a run metadata file,
    whose `config` section is then used).  Raises ConfigError listing
    every problem found."""
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(["top level: expected a mapping"])
    if "config" in data and "plant" not in data:
        data = data["config"]  # metadata file: run again from its echo
        if not isinstance(data, dict):
            raise ConfigError(["config: expected a mapping"])

    problems: list[str] = []
    defaulted: list[str] = []
    _reject_unknown(data, _TOP_KEYS, "", problems)

    def fill(key):
        if _dotted_get(data, key) is None:
            _dotted_set(data, key, _DEFAULTS[key])
            defaulted.append(key)

    def _dotted_get(d, dotted):
        cur = d
        for part in dotted.split("."):
            if not isinstance(cur, dict) or part not in cur:
                return None
            cur = cur[part]
        return cur

    def _dotted_set(d, dotted, value):
        parts = dotted.split(".")
        cur = d
        for part in parts[:-1]:
            cur = cur.setdefault(part, {})
        cur[parts[-1]] = value if not isinstance(value, dict) else dict(value)

    for key in ("plant", "controller"):
        if not isinstance(data.get(key), dict):
            problems.append("%s: required mapping with numerator/denominator" % key)
        else:
            _reject_unknown(data[key], {"numerator", "denominator"}, key + ".", problems)
    sample_time = _get_number(data, "sample_time_s", problems, positive=True)

    horizon = data.get("horizon_samples")
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1:
        problems.append("horizon_samples: expected a positive integer, got %r" % (horizon,))
        horizon = None

    ref = data.get("reference")
    segments = []
    if not isinstance(ref, dict) or not isinstance(ref.get("segments"), list) \
            or not ref["segments"]:
        problems.append("reference.segments: required nonempty list of moves")
    else:
        _reject_unknown(ref, {"segments"}, "reference.", problems)
        for i, seg in enumerate(ref["segments"]):
            if not isinstance(seg, dict):
                problems.append("reference.segments[%d]: expected a mapping" % i)
                continue
            prefix = "reference.segments[%d]." % i
            _reject_unknown(seg, _SEGMENT_KEYS, prefix, problems)
            if "rest_duration_s" not in seg:
                seg["rest_duration_s"] = 0.0
                defaulted.append(prefix + "rest_duration_s")
            disp = _get_number(seg, "displacement_m", problems, prefix, nonneg=True)
            vel = _get_number(seg, "max_velocity_mps", problems, prefix, positive=True)
            acc = _get_number(seg, "max_acceleration_mps2", problems, prefix, positive=True)
            jrk = _get_number(seg, "max_jerk_mps3", problems, prefix, positive=True)
            rest = _get_number(seg, "rest_duration_s", problems, prefix, nonneg=True)
            if None not in (disp, vel, acc, jrk, rest):
                segments.append(MoveSpec(disp, vel, acc, jrk, rest))

    for key in ("basis", "weights.error", "weights.parameter",
                "weights.parameter_change", "method", "num_trials", "gamma",
                "schedules.alpha_w", "schedules.alpha_theta", "schedules.sigma",
                "seeds", "feature_scaling"):
        fill(key)

    basis_kind = data["basis"]
    if basis_kind not in ("derivative", "identity"):
        problems.append("basis: expected 'derivative' or 'identity', got %r" % (basis_kind,))

    _reject_unknown(data["weights"], {"error", "parameter", "parameter_change"},
                    "weights.", problems)
    w_e = _get_number(data["weights"], "error", problems, "weights.", nonneg=True)
    w_u = _get_number(data["weights"], "parameter", problems, "weights.", nonneg=True)
    w_du = _get_number(data["weights"], "parameter_change", problems, "weights.", nonneg=True)
    if w_e is not None and w_e <= 0.0:
        problems.append("weights.error: must be positive definite (got %g)" % w_e)

    method = data["method"]
    if method not in ("noilc", "acilc", "both"):
        problems.append("method: expected noilc, acilc or both, got %r" % (method,))

    num_trials = data["num_trials"]
    if not isinstance(num_trials, int) or isinstance(num_trials, bool) or num_trials < 0:
        problems.append("num_trials: expected a nonnegative integer, got %r" % (num_trials,))

    gamma = _get_number(data, "gamma", problems, positive=True)
    if gamma is not None and gamma > 1.0:
        problems.append("gamma: must be at most 1, got %g" % gamma)

    _reject_unknown(data["schedules"], {"alpha_w", "alpha_theta", "sigma"},
                    "schedules.", problems)
    sched_aw = _parse_schedule(data["schedules"].get("alpha_w"), "alpha_w", problems)
    sched_at = _parse_schedule(data["schedules"].get("alpha_theta"), "alpha_theta", problems)
    sched_sg = _parse_schedule(data["schedules"].get("sigma"), "sigma", problems)

    seeds = data["seeds"]
    if not isinstance(seeds, list) or not seeds \
            or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        problems.append("seeds: expected a nonempty list of integers, got %r" % (seeds,))
        seeds = [0]

    feat = data["feature_scaling"]
    if feat is not None:
        if not isinstance(feat, list) \
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0
                           for v in feat):
            problems.append("feature_scaling: expected null or a list of positive numbers")
            feat = None
        else:
            feat = tuple(float(v) for v in feat)

    if "output_dir" not in data:
        stem = os.path.splitext(os.path.basename(str(path)))[0]
        data["output_dir"] = os.path.join("runs", stem)
        defaulted.append("output_dir")
    output_dir = data["output_dir"]
    if not isinstance(output_dir, str) or not output_dir:
        problems.append("output_dir: expected a nonempty string")

    plant = controller = None
    if not problems:
        p_num = _coeff_list(data.get("plant"), "plant", "numerator", problems)
        p_den = _coeff_list(data.get("plant"), "plant", "denominator", problems)
        c_num = _coeff_list(data.get("controller"), "controller", "numerator", problems)
        c_den = _coeff_list(data.get("controller"), "controller", "denominator", problems)
        if not problems:
            try:
                plant = TransferFunction(np.array(p_num), np.array(p_den), sample_time)
            except ValueError as exc:
                problems.append("plant: %s" % exc)
            try:
                controller = TransferFunction(np.array(c_num), np.array(c_den), sample_time)
            except ValueError as exc:
                problems.append("controller: %s" % exc)
    else:
        # still surface coefficient problems alongside the others
        if isinstance(data.get("plant"), dict):
            _coeff_list(data["plant"], "plant", "numerator", problems)
            _coeff_list(data["plant"], "plant", "denominator", problems)
        if isinstance(data.get("controller"), dict):
            _coeff_list(data["controller"], "controller", "numerator", problems)
            _coeff_list(data["controller"], "controller", "denominator", problems)

    if problems:
        raise ConfigError(sorted(set(problems)))

    weighting = Weighting(Weight(w_e), Weight(w_u), Weight(w_du))
    return ExperimentConfig(
        plant=plant, controller=controller, horizon=horizon,
        segments=tuple(segments), basis_kind=basis_kind, weighting=weighting,
        method=method, num_trials=num_trials, gamma=gamma,
        schedules=LearnerSchedules(sched_aw, sched_at, sched_sg),
        seeds=tuple(seeds), feature_scaling=feat, output_dir=output_dir,
        raw=data, defaulted=tuple(defaulted))


def summarize(records, method: str, seed: int | None = None,
              margin: float | None = None) -> RunSummary:
    """Reduce a trial log to its headline numbers.

    convergence_trial is the first trial whose cost is within 5% of the
    final cost.
    """
    if not records:
        raise ValueError("cannot summarize an empty log")
    costs = np.array([r.cost for r in records])
    final = costs[-1]
    tol = 0.05 * abs(final)
    conv = int(np.argmax(np.abs(costs - final) <= tol))
    return RunSummary(method=method, seed=seed, final_cost=float(final),
                      min_cost=float(costs.min()), convergence_trial=conv,
                      final_upsilon=records[-1].upsilon.copy(),
                      convergence_margin=margin)


def compare_runs(log_a, log_b, psi: np.ndarray | None = None):
    """Compare two trial logs of the same task.

    Returns (summary_a, summary_b, deltas) where deltas reports the
    final-cost ratio b/a, the componentwise final parameter difference,
    and, when the basis is supplied, the maximum absolute difference of
    the final feedforward signals Psi upsilon.
    """
    if not log_a or not log_b:
        raise ValueError("cannot compare empty logs")
    if len(log_a[-1].upsilon) != len(log_b[-1].upsilon):
        raise ValueError("parameter dimension mismatch (%d vs %d); the runs use "
                         "different bases or horizons"
                         % (len(log_a[-1].upsilon), len(log_b[-1].upsilon)))
    sum_a = summarize(log_a, "a")
    sum_b = summarize(log_b, "b")
    deltas = {
        "final_cost_ratio": sum_b.final_cost / sum_a.final_cost
        if sum_a.final_cost != 0.0 else np.inf,
        "final_upsilon_diff": sum_b.final_upsilon - sum_a.final_upsilon,
    }
    if psi is not None:
        f_a = psi @ sum_a.final_upsilon
        f_b = psi @ sum_b.final_upsilon
        deltas["max_abs_f_diff"] = float(np.max(np.abs(f_b - f_a)))
    return sum_a, sum_b, deltas


def _echo_config(config: ExperimentConfig) -> dict:
    return {key: config.raw[key] for key in sorted(config.raw)}


def run_experiment(config: ExperimentConfig, out_dir: str | None = None,
                   seeds=None, num_trials: int | None = None) -> ExperimentResult:
    """Execute the configured campaign and persist all logs.

    Builds the lifted loop, the reference and the basis once.  The
    model-based pass synthesizes its gains before any trial and aborts
    the whole experiment on synthesis failure or an unstable loop; a
    diverging model-free seed only ends that seed, whose partial log is
    still written.  Seed runs execute concurrently (one sampler each).
    """
    out = out_dir or config.output_dir
    seeds = tuple(config.seeds if seeds is None else seeds)
    trials = config.num_trials if num_trials is None else num_trials
    os.makedirs(out, exist_ok=True)

    system = closed_loop_maps(config.plant, config.controller, config.horizon)
    profile = third_order_reference(config.segments, config.plant.sample_time,
                                    config.horizon)
    basis = build_basis(profile) if config.basis_kind == "derivative" \
        else identity_basis(config.horizon)

    gains = None
    noilc_records = None
    if config.method in ("noilc", "both"):
        gains, noilc_records = run_noilc(system, profile.samples, basis,
                                         config.weighting, trials)
        ndir = os.path.join(out, "noilc")
        os.makedirs(ndir, exist_ok=True)
        write_trial_log(noilc_records, os.path.join(ndir, "trial_log.csv"), m=basis.m)
        _write_final_signals(ndir, system, profile, basis, noilc_records)

    acilc_records: dict = {}
    acilc_failures: dict = {}
    if config.method in ("acilc", "both"):
        mdp = MdpConfig(config.gamma, config.weighting, basis)

        def one_seed(seed):
            sampler = SeededSampler(seed)
            try:
                return seed, run_acilc(system, profile.samples, mdp,
                                       config.schedules, sampler, trials,
                                       feature_scaling=config.feature_scaling), None
            except DivergenceError as exc:
                return seed, exc.records, exc.trial_index

        workers = min(len(seeds), os.cpu_count() or 1)
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            for seed, recs, failed_at in pool.map(one_seed, seeds):
                acilc_records[seed] = recs
                if failed_at is not None:
                    acilc_failures[seed] = failed_at
                sdir = os.path.join(out, "acilc_seed%d" % seed)
                os.makedirs(sdir, exist_ok=True)
                write_trial_log(recs, os.path.join(sdir, "trial_log.csv"), m=basis.m)
                if recs:
                    _write_final_signals(sdir, system, profile, basis, recs)

    _write_metadata(out, config, seeds, trials, gains, acilc_failures)
    return ExperimentResult(config=config, out_dir=out, gains=gains,
                            noilc_records=noilc_records,
                            acilc_records=acilc_records,
                            acilc_failures=acilc_failures)


def _write_final_signals(run_dir, system, profile, basis, records):
    from .lti import simulate_trial
    upsilon = records[-1].upsilon
    f_final = basis.psi @ upsilon
    e_final = simulate_trial(system, profile.samples, f_final)
    write_signal(os.path.join(run_dir, "e_final.csv"), e_final, "e")
    write_signal(os.path.join(run_dir, "f_final.csv"), f_final, "f")


def _write_metadata(out, config, seeds, trials, gains, failures):
    derived = {
        "package_version": __version__,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "effective_seeds": list(seeds),
        "effective_num_trials": trials,
    }
    if gains is not None:
        derived["convergence_margin"] = float(gains.convergence_margin)
    if failures:
        derived["diverged_seeds"] = {int(s): int(t) for s, t in failures.items()}
    meta = {
        "config": _echo_config(config),
        "defaulted_fields": sorted(config.defaulted),
        "derived": derived,
    }
    with open(os.path.join(out, "metadata.yaml"), "w") as fh:
        yaml.safe_dump(meta, fh, sort_keys=False)


def load_run_log(run_dir, which="noilc", seed: int | None = None):
    """Read back a trial log written by run_experiment."""
    sub = "noilc" if which == "noilc" else "acilc_seed%d" % (seed or 0)
    return read_trial_log(os.path.join(run_dir, sub, "trial_log.csv"))


def preset_path(name: str = "paper_sec5") -> str:
    """Filesystem path of a preset config shipped with the package."""
    path = os.path.join(os.path.dirname(__file__), "presets", name + ".yaml")
    if not os.path.exists(path):
        raise FileNotFoundError("no preset named %r" % name)
    return path
