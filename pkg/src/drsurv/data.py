"""Observed right-censored data and the step-function carrier type.

A dataset is ``n`` triples ``(Y, R, L)``: follow-up time, event indicator
(1 = failure observed, 0 = censored) and a length-``p`` covariate vector.
Arrays are stored read-only so a ``Dataset`` can be shared freely.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    EmptyDataset,
    NegativeTime,
    NonBinaryEvent,
    NonFiniteValue,
    RaggedCovariates,
    ValidationError,
)


class ObservedRecord(NamedTuple):
    time: float
    event: int
    covariates: tuple


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Validated sample of right-censored observations.

    Build instances with :func:`validate_dataset`, :meth:`from_arrays` or
    :func:`read_csv`; the constructor itself does not re-check invariants.
    """

    time: np.ndarray
    event: np.ndarray
    covariates: np.ndarray
    tau: float

    @classmethod
    def from_arrays(cls, time, event, covariates=None, tau=None) -> "Dataset":
        time = np.asarray(time, dtype=float).reshape(-1)
        n = time.shape[0]
        if covariates is None:
            covariates = np.zeros((n, 0))
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(n, -1) if n else covariates.reshape(0, 0)
        if covariates.shape[0] != n:
            raise RaggedCovariates(
                f"covariate matrix has {covariates.shape[0]} rows for {n} times"
            )
        records = [
            (time[i], np.asarray(event)[i], covariates[i]) for i in range(n)
        ]
        return validate_dataset(records, tau=tau)

    @property
    def n(self) -> int:
        return int(self.time.shape[0])

    @property
    def covariate_dim(self) -> int:
        return int(self.covariates.shape[1])

    @property
    def records(self) -> list[ObservedRecord]:
        return [
            ObservedRecord(float(t), int(r), tuple(float(x) for x in l))
            for t, r, l in zip(self.time, self.event, self.covariates)
        ]

    def select(self, columns: Sequence[int] | None) -> "Dataset":
        """Dataset restricted to the given covariate columns (all when None)."""
        if columns is None:
            return self
        cols = np.asarray(columns, dtype=int)
        return Dataset(self.time, self.event, _frozen(self.covariates[:, cols]), self.tau)

    def take(self, index) -> "Dataset":
        index = np.asarray(index, dtype=int)
        return Dataset(
            _frozen(self.time[index]),
            _frozen(self.event[index], int),
            _frozen(self.covariates[index]),
            self.tau,
        )

    def with_events(self, event) -> "Dataset":
        event = np.asarray(event, dtype=int)
        if event.shape != self.event.shape or not np.isin(event, (0, 1)).all():
            raise ValidationError("replacement event vector must be binary of length n")
        return Dataset(self.time, _frozen(event, int), self.covariates, self.tau)

    def canonical_order(self) -> np.ndarray:
        """Permutation sorting records by time, then by covariates.

        Estimators process records in this order so their output does not
        depend on the order records were supplied in.
        """
        keys = [self.covariates[:, k] for k in range(self.covariate_dim - 1, -1, -1)]
        keys.append(self.time)
        return np.lexsort(keys)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.tau == other.tau
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.event, other.event)
            and self.covariates.shape == other.covariates.shape
            and np.array_equal(self.covariates, other.covariates)
        )

    __hash__ = None


def validate_dataset(raw: Iterable, tau: float | None = None) -> Dataset:
    """Check ``(time, event, covariates)`` triples and build a :class:`Dataset`.

    Ties in time are kept. ``tau`` defaults to the largest observed time and
    must not be smaller than it.
    """
    if isinstance(raw, Dataset):
        tau = raw.tau if tau is None else tau
        raw = raw.records
    raw = list(raw)
    if not raw:
        raise EmptyDataset("dataset has no records")

    times, events, rows = [], [], []
    p = None
    for i, rec in enumerate(raw):
        try:
            t, r, l = rec
        except (TypeError, ValueError):
            raise ValidationError("expected a (time, event, covariates) triple", i)
        try:
            t = float(t)
        except (TypeError, ValueError):
            raise ValidationError(f"time {t!r} is not a real number", i)
        if not math.isfinite(t):
            raise NonFiniteValue(f"time {t} is not finite", i)
        if t < 0:
            raise NegativeTime(f"time {t} is negative", i)
        try:
            rf = float(r)
        except (TypeError, ValueError):
            raise NonBinaryEvent(f"event {r!r} is not 0 or 1", i)
        if rf not in (0.0, 1.0):
            raise NonBinaryEvent(f"event {r!r} is not 0 or 1", i)
        try:
            row = np.asarray(l, dtype=float).reshape(-1)
        except (TypeError, ValueError):
            raise ValidationError("covariates are not a real vector", i)
        if p is None:
            p = row.shape[0]
        elif row.shape[0] != p:
            raise RaggedCovariates(
                f"expected {p} covariates, found {row.shape[0]}", i
            )
        if not np.isfinite(row).all():
            raise NonFiniteValue("covariates contain a non-finite value", i)
        times.append(t)
        events.append(int(rf))
        rows.append(row)

    time = _frozen(times)
    max_time = float(time.max())
    if tau is None:
        tau = max_time
    tau = float(tau)
    if not math.isfinite(tau) or tau <= 0:
        raise ValidationError(f"tau must be positive and finite, got {tau}")
    if tau < max_time:
        raise ValidationError(f"tau={tau} is smaller than the largest time {max_time}")
    covariates = _frozen(np.vstack(rows) if p else np.zeros((len(rows), 0)))
    return Dataset(time, _frozen(events, int), covariates, tau)


def read_csv(path, tau: float | None = None) -> Dataset:
    """Load ``time,status,x1,...,xp`` CSV data.

    Raises :class:`ValidationError` naming the record index (0-based, header
    excluded) of the first malformed row.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path}: file is empty")
        if len(header) < 2 or header[0] != "time" or header[1] != "status":
            raise ValidationError(
                f"{path}: header must start with 'time,status', got {','.join(header)!r}"
            )
        width = len(header)
        records = []
        for i, row in enumerate(reader):
            if not row:
                continue
            if len(row) != width:
                raise RaggedCovariates(f"expected {width} fields, found {len(row)}", i)
            if any(not cell.strip() for cell in row):
                raise ValidationError("empty field", i)
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise ValidationError(f"not a number ({exc})", i)
            records.append((values[0], values[1], values[2:]))
    return validate_dataset(records, tau=tau)


def write_csv(ds: Dataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "status"] + [f"x{k + 1}" for k in range(ds.covariate_dim)])
        for t, r, l in zip(ds.time, ds.event, ds.covariates):
            w.writerow([repr(float(t)), int(r)] + [repr(float(x)) for x in l])


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous piecewise-constant function.

    ``jump_values[k]`` is the value on ``[jump_times[k], jump_times[k+1])``
    and ``initial_value`` the value before the first jump.
    """

    jump_times: np.ndarray
    jump_values: np.ndarray
    initial_value: float = 0.0

    def __post_init__(self):
        times = _frozen(self.jump_times)
        values = _frozen(self.jump_values)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError("jump_times and jump_values must be 1-d of equal length")
        if times.size > 1 and not (np.diff(times) > 0).all():
            raise ValueError("jump_times must be strictly increasing")
        object.__setattr__(self, "jump_times", times)
        object.__setattr__(self, "jump_values", values)
        object.__setattr__(self, "initial_value", float(self.initial_value))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.jump_times, t, side="right")
        padded = np.concatenate(([self.initial_value], self.jump_values))
        out = padded[idx]
        return float(out) if out.ndim == 0 else out

    def jumps(self) -> np.ndarray:
        """Size of each jump (value after minus value before)."""
        return np.diff(np.concatenate(([self.initial_value], self.jump_values)))


def step_eval(f: StepFunction, t: float) -> float:
    return float(f(t))


def risk_set_start(sorted_time: np.ndarray, query) -> np.ndarray:
    """Index of the first sorted record with ``time >= query``.

    Everything from that index on is the risk set ``{m : Y_m >= query}``.
    """
    return np.searchsorted(sorted_time, query, side="left")


def uniform_grid(tau: float, count: int = 50) -> np.ndarray:
    """Reporting grid ``(i - 1) * tau / count`` for ``i = 1..count``."""
    return np.arange(count) * (tau / count)
