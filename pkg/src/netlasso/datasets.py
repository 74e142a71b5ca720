"""Synthetic data generators and CSV ingestion.

Generators mirror the three experiment families the solvers are aimed
at: clustered regression lines, interleaved half-moon point clouds, and
piecewise-constant signals.  All randomness flows through numpy's
seeded Generator, so a fixed seed reproduces the data byte for byte.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "LabeledPoints",
    "SignalInstance",
    "gen_two_line_regression",
    "gen_half_moons",
    "gen_piecewise_signal",
    "save_csv",
    "load_csv",
    "resample",
    "save_signal_csv",
    "load_signal_csv",
]


@dataclass
class LabeledPoints:
    """Point cloud with optional ground-truth labels and responses."""

    points: np.ndarray
    labels: np.ndarray = None
    responses: np.ndarray = None
    seed: int = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if self.points.ndim != 2:
            raise ValueError("points must be a 2-D array")
        n = len(self.points)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ValueError("need one label per point")
        if self.responses is not None:
            self.responses = np.asarray(self.responses, dtype=np.float64)
            if self.responses.shape != (n,):
                raise ValueError("need one response per point")

    @property
    def num_points(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass
class SignalInstance:
    """A piecewise-constant signal and its noisy observation."""

    original: np.ndarray
    noisy: np.ndarray
    noise_sd: float
    jumps: np.ndarray
    seed: int = None

    def __post_init__(self):
        self.original = np.asarray(self.original, dtype=np.float64)
        self.noisy = np.asarray(self.noisy, dtype=np.float64)
        if self.original.shape != self.noisy.shape:
            raise ValueError("original and noisy lengths differ")
        self.jumps = np.asarray(self.jumps, dtype=np.int64)
        # the jump list must be exactly the set of level changes
        changes = np.flatnonzero(np.diff(self.original) != 0.0) + 1
        if not np.array_equal(np.sort(self.jumps), changes):
            raise ValueError("jump positions do not match the signal")

    @property
    def num_jumps(self):
        return len(self.jumps)


def gen_two_line_regression(n, slopes=(1.0, -1.0), intercepts=(0.0, 0.0),
                            x_range=(-1.0, 1.0), noise_sd=0.1, seed=0):
    """Samples around two latent regression lines.

    Each point carries a scalar input drawn uniformly from ``x_range``
    and a response on its line plus Gaussian noise.  For odd ``n`` the
    first line receives the extra point (ceil/floor split).  ``points``
    holds the inputs as a single column; ``responses`` the outputs.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    if len(slopes) != 2 or len(intercepts) != 2:
        raise ValueError("exactly two lines are generated")
    lo, hi = float(x_range[0]), float(x_range[1])
    if not hi > lo:
        raise ValueError("empty input range")
    rng = np.random.default_rng(seed)
    sizes = (n - n // 2, n // 2)
    a = rng.uniform(lo, hi, size=n)
    labels = np.concatenate([np.full(sizes[0], 0, dtype=np.int64),
                             np.full(sizes[1], 1, dtype=np.int64)])
    b = np.empty(n)
    for c in (0, 1):
        mask = labels == c
        b[mask] = intercepts[c] + slopes[c] * a[mask]
    if noise_sd > 0:
        b = b + rng.normal(0.0, noise_sd, size=n)
    return LabeledPoints(points=a[:, None], labels=labels, responses=b,
                         seed=seed)


def gen_half_moons(n, noise_sd=0.0, seed=0):
    """Two interleaved unit semicircles with Gaussian jitter.

    The first arc is the top half of the unit circle at the origin, the
    second the bottom half of a unit circle centered at (1, 0.5); this
    interleaves them.  Odd ``n`` puts the extra point on the first arc.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    n_top = n - n // 2
    n_bot = n // 2
    t_top = np.linspace(0.0, math.pi, n_top)
    t_bot = np.linspace(0.0, math.pi, n_bot)
    top = np.column_stack([np.cos(t_top), np.sin(t_top)])
    bot = np.column_stack([1.0 - np.cos(t_bot), 0.5 - np.sin(t_bot)])
    pts = np.vstack([top, bot])
    labels = np.concatenate([np.zeros(n_top, dtype=np.int64),
                             np.ones(n_bot, dtype=np.int64)])
    if noise_sd > 0:
        pts = pts + rng.normal(0.0, noise_sd, size=pts.shape)
    return LabeledPoints(points=pts, labels=labels, seed=seed)


def gen_piecewise_signal(n, levels, noise_sd=0.2, seed=0):
    """Constant segments plus i.i.d. Gaussian noise.

    ``levels`` is a list of (length, value) pairs whose lengths must sum
    to ``n``.  Jump positions are the indices where the clean signal
    changes value; consecutive segments sharing a value create no jump.
    """
    lengths = [int(l) for l, _ in levels]
    if any(l <= 0 for l in lengths):
        raise ValueError("segment lengths must be positive")
    if sum(lengths) != n:
        raise ValueError(
            f"segment lengths sum to {sum(lengths)}, expected {n}")
    original = np.concatenate([np.full(l, float(v)) for l, v in levels])
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_sd, size=n) if noise_sd > 0 \
        else np.zeros(n)
    jumps = np.flatnonzero(np.diff(original) != 0.0) + 1
    return SignalInstance(original=original, noisy=original + noise,
                          noise_sd=float(noise_sd), jumps=jumps, seed=seed)


def _open_for(target, mode):
    if hasattr(target, "write") or hasattr(target, "read"):
        return target, False
    return open(Path(target), mode, newline=""), True


def save_csv(data, target):
    """Write a LabeledPoints as CSV with full float precision.

    Column order: point coordinates, then the response column if
    present, then the integer label column if present.  No header.
    """
    stream, owned = _open_for(target, "w")
    try:
        for i in range(data.num_points):
            cells = [repr(float(v)) for v in data.points[i]]
            if data.responses is not None:
                cells.append(repr(float(data.responses[i])))
            if data.labels is not None:
                cells.append(str(int(data.labels[i])))
            stream.write(",".join(cells) + "\n")
    finally:
        if owned:
            stream.close()


def load_csv(source, has_labels=False, has_responses=False):
    """Read a rectangular numeric CSV into LabeledPoints.

    The trailing columns are interpreted right to left: the last column
    is integer labels when ``has_labels``, the one before (or last,
    without labels) is the response when ``has_responses``.
    """
    stream, owned = _open_for(source, "r")
    try:
        rows = [row for row in csv.reader(stream) if row]
    finally:
        if owned:
            stream.close()
    if not rows:
        raise ValueError("empty CSV")
    width = len(rows[0])
    for idx, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"ragged row {idx}: {len(row)} cells, "
                             f"expected {width}")
    trailing = int(has_labels) + int(has_responses)
    if width <= trailing:
        raise ValueError("no point columns left after label/response "
                         "columns")
    try:
        values = np.array([[float(c) for c in row] for row in rows])
    except ValueError as exc:
        raise ValueError(f"non-numeric cell: {exc}") from None
    labels = None
    responses = None
    end = width
    if has_labels:
        col = values[:, end - 1]
        if np.any(col != np.round(col)):
            raise ValueError("label column must be integral")
        labels = col.astype(np.int64)
        end -= 1
    if has_responses:
        responses = values[:, end - 1]
        end -= 1
    return LabeledPoints(points=values[:, :end], labels=labels,
                         responses=responses)


def resample(data, n, seed=0):
    """Draw ``n`` rows without replacement, preserving draw order."""
    if n > data.num_points:
        raise ValueError("cannot draw more rows than available")
    rng = np.random.default_rng(seed)
    idx = rng.choice(data.num_points, size=n, replace=False)
    return LabeledPoints(
        points=data.points[idx],
        labels=None if data.labels is None else data.labels[idx],
        responses=None if data.responses is None else data.responses[idx],
        seed=seed)


def save_signal_csv(signal, target):
    """Two-column CSV (original, noisy), full precision, no header."""
    stream, owned = _open_for(target, "w")
    try:
        for o, v in zip(signal.original, signal.noisy):
            stream.write(f"{float(o)!r},{float(v)!r}\n")
    finally:
        if owned:
            stream.close()


def load_signal_csv(source, noise_sd=0.0):
    """Read a two-column signal CSV written by save_signal_csv."""
    stream, owned = _open_for(source, "r")
    try:
        rows = [row for row in csv.reader(stream) if row]
    finally:
        if owned:
            stream.close()
    if any(len(row) != 2 for row in rows):
        raise ValueError("signal CSV must have exactly two columns")
    original = np.array([float(r[0]) for r in rows])
    noisy = np.array([float(r[1]) for r in rows])
    jumps = np.flatnonzero(np.diff(original) != 0.0) + 1
    return SignalInstance(original=original, noisy=noisy,
                          noise_sd=float(noise_sd), jumps=jumps)
