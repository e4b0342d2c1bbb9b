"""Figure rendering for completed runs.

Reads the delimited logs a run produced and renders PNG files next to
them; the CSV files remain the data contract, the figures are a reading
aid.  Uses the Agg backend so rendering works headless.
"""

from __future__ import annotations

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .records import read_signal, read_trial_log


def render_cost_per_trial(labeled_logs, path) -> str:
    """Cost versus trial number, log scale, one line per labeled log.

    :param labeled_logs: iterable of (label, records).
    """
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for label, records in labeled_logs:
        costs = [r.cost for r in records]
        ax.semilogy(range(len(costs)), costs, label=label, linewidth=1.2)
    ax.set_xlabel("trial")
    ax.set_ylabel("trial cost")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_final_signals(e_final, f_final, sample_time, path) -> str:
    """Final-trial error and feedforward over the horizon, two panels."""
    t = np.arange(len(e_final)) * sample_time
    fig, (ax_e, ax_f) = plt.subplots(2, 1, figsize=(7.0, 5.4), sharex=True)
    ax_e.plot(t, e_final, linewidth=1.0)
    ax_e.set_ylabel("final error")
    ax_e.grid(True, alpha=0.3)
    ax_f.plot(t, f_final, linewidth=1.0, color="tab:orange")
    ax_f.set_ylabel("final feedforward")
    ax_f.set_xlabel("time [s]")
    ax_f.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_run_report(run_dir, sample_time: float | None = None) -> list[str]:
    """Render the standard figures for a run directory written by the
    harness: cost_per_trial.png over every log found, and one
    final_signals.png per run that has final signals.

    Returns the list of files written.
    """
    logs = []
    signal_dirs = []
    for name in sorted(os.listdir(run_dir)):
        sub = os.path.join(run_dir, name)
        log_path = os.path.join(sub, "trial_log.csv")
        if os.path.isdir(sub) and os.path.exists(log_path):
            records = read_trial_log(log_path)
            if records:
                logs.append((name, records))
            if os.path.exists(os.path.join(sub, "e_final.csv")):
                signal_dirs.append(sub)
    if not logs:
        raise FileNotFoundError("no trial_log.csv found under %s" % run_dir)

    if sample_time is None:
        sample_time = _sample_time_from_metadata(run_dir)

    written = [render_cost_per_trial(logs, os.path.join(run_dir, "cost_per_trial.png"))]
    for sub in signal_dirs:
        e_final = read_signal(os.path.join(sub, "e_final.csv"))
        f_final = read_signal(os.path.join(sub, "f_final.csv"))
        written.append(render_final_signals(
            e_final, f_final, sample_time, os.path.join(sub, "final_signals.png")))
    return written


def _sample_time_from_metadata(run_dir) -> float:
    import yaml
    meta_path = os.path.join(run_dir, "metadata.yaml")
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            meta = yaml.safe_load(fh)
        try:
            return float(meta["config"]["sample_time_s"])
        except (KeyError, TypeError):
            pass
    return 1.0
