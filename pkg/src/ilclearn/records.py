"""Delimited on-disk form of trial logs.

One row per trial with the columns

    j, cost, e_norm2, upsilon_0..upsilon_{m-1}, delta, sigma2, alpha_w, alpha_theta

where e_norm2 is the plain 2-norm of the trial error.  Model-based logs
use the same schema with the learner columns zero-filled, so a single
downstream path plots either method.  Floats are written with repr
(shortest round-trip form), which makes re-parsing exact and the files
byte-reproducible for a fixed config and seed.
"""

from __future__ import annotations

import csv

import numpy as np

from .acilc import TrialRecord

FIXED_PREFIX = ("j", "cost", "e_norm2")
FIXED_SUFFIX = ("delta", "sigma2", "alpha_w", "alpha_theta")


def log_header(m: int) -> list[str]:
    return list(FIXED_PREFIX) + ["upsilon_%d" % k for k in range(m)] + list(FIXED_SUFFIX)


def write_trial_log(records, path, m: int | None = None) -> None:
    """Write records to a CSV file; an empty log still gets a header row
    (m then must be given explicitly)."""
    if m is None:
        if not records:
            raise ValueError("empty log needs an explicit parameter count m")
        m = len(records[0].upsilon)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(log_header(m))
        for rec in records:
            row = [rec.j, repr(float(rec.cost)), repr(float(rec.e_norm2))]
            row += [repr(float(v)) for v in rec.upsilon]
            row += [repr(float(rec.delta)), repr(float(rec.sigma2)),
                    repr(float(rec.alpha_w)), repr(float(rec.alpha_theta))]
            writer.writerow(row)


def read_trial_log(path) -> list[TrialRecord]:
    """Parse a trial-log CSV back into records.

    The in-memory-only fields (features and learner snapshots) are not
    part of the schema and come back as None.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_fixed = len(FIXED_PREFIX) + len(FIXED_SUFFIX)
        if len(header) < n_fixed or list(header[:3]) != list(FIXED_PREFIX):
            raise ValueError("%s: not a trial-log CSV (header %r)" % (path, header))
        m = len(header) - n_fixed
        records = []
        for row in reader:
            if not row:
                continue
            vals = [float(v) for v in row[1:]]
            records.append(TrialRecord(
                j=int(row[0]), cost=vals[0], e_norm2=vals[1],
                upsilon=np.array(vals[2:2 + m]),
                delta=vals[2 + m], sigma2=vals[3 + m],
                alpha_w=vals[4 + m], alpha_theta=vals[5 + m]))
    return records


def write_signal(path, samples: np.ndarray, label: str) -> None:
    """Per-sample column vector (final-trial error or feedforward)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", label])
        for k, v in enumerate(np.asarray(samples, dtype=float)):
            writer.writerow([k, repr(float(v))])


def read_signal(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return np.array([float(row[1]) for row in reader if row])
