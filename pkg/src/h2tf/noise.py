"""Mixed-noise simulation for spectral cubes, cases 1 through 5.

Case 1 is dense Gaussian noise; case 2 adds salt-and-pepper impulses;
case 3 adds dead detector columns (deadlines) on half the bands; case 4
adds column striping on 40% of the bands; case 5 combines all of them.
Generators are applied in the fixed order Gaussian -> impulse ->
deadlines -> stripes and share a single seeded stream.

Unstated magnitudes are implementation choices, documented here: deadlines
write exact zeros, stripes add a per-column constant drawn uniformly from
[-0.5, 0.5], and both artifacts run along full-height columns (pushbroom
orientation).
"""

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class NoiseSpec:
    """Declarative description of one corruption case, with seeds."""

    case_id: int = 1
    gaussian_std: float = 0.2
    impulse_rate: float = 0.1
    deadline_band_fraction: float = 0.5
    deadline_count_range: tuple = (6, 10)
    deadline_width_range: tuple = (1, 3)
    stripe_band_fraction: float = 0.4
    stripe_count_range: tuple = (6, 15)
    seed: int = 0

    def __post_init__(self):
        if self.case_id not in (1, 2, 3, 4, 5):
            raise ValueError(f"case_id must be in 1..5, got {self.case_id}")
        if self.gaussian_std < 0:
            raise ValueError("gaussian_std must be nonnegative")
        if not 0.0 <= self.impulse_rate <= 1.0:
            raise ValueError("impulse_rate must lie in [0, 1]")
        for name in ("deadline_band_fraction", "stripe_band_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("deadline_count_range", "deadline_width_range",
                     "stripe_count_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 1:
                raise ValueError(f"{name} must be a nonempty positive range, got {lo}..{hi}")
            setattr(self, name, (int(lo), int(hi)))

    def to_kv(self):
        """Plain-text key=value serialization (embedded in run manifests)."""
        parts = []
        for name in ("case_id", "gaussian_std", "impulse_rate",
                     "deadline_band_fraction", "stripe_band_fraction", "seed"):
            parts.append(f"{name}={getattr(self, name)!r}")
        for name in ("deadline_count_range", "deadline_width_range",
                     "stripe_count_range"):
            lo, hi = getattr(self, name)
            parts.append(f"{name}={lo},{hi}")
        return "\n".join(parts) + "\n"

    @classmethod
    def from_kv(cls, text):
        kwargs = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip().strip("'\"")
            if key.endswith("_range"):
                lo, hi = value.split(",")
                kwargs[key] = (int(lo), int(hi))
            elif key in ("case_id", "seed"):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)


def add_gaussian(x, std, rng):
    """Additive i.i.d. Gaussian noise of the given standard deviation."""
    if std < 0:
        raise ValueError(f"std must be nonnegative, got {std}")
    x = np.asarray(x, dtype=np.float64)
    if std == 0:
        return x.copy()
    return x + rng.normal(0.0, std, size=x.shape)


def add_impulse(x, rate, rng):
    """Salt-and-pepper impulses: each element is independently replaced
    with probability ``rate``, by 0 or 1 with equal probability.

    Values are always 0/1, so data outside [0, 1] only triggers a warning.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate}")
    x = np.asarray(x, dtype=np.float64)
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        warnings.warn("impulse noise assumes [0, 1]-scaled data; "
                      "replacement values stay 0/1", stacklevel=2)
    y = x.copy()
    hit = rng.random(x.shape) < rate
    salt = rng.random(x.shape) < 0.5
    y[hit & salt] = 1.0
    y[hit & ~salt] = 0.0
    return y


def add_deadlines(x, band_fraction, count_range, width_range, rng):
    """Zero out full-height column strips on a random subset of bands.

    ``floor(band_fraction * b)`` bands are drawn without replacement; each
    gets a deadline count from ``count_range`` (inclusive).  Every deadline
    has a distinct start column and a width from ``width_range``, placed so
    the strip fits inside the image (a width beyond the image width is
    clipped at the boundary).
    """
    x = np.asarray(x, dtype=np.float64)
    y = x.copy()
    h, w, b = x.shape
    n_bands = int(band_fraction * b)
    bands = rng.choice(b, size=n_bands, replace=False)
    for band in bands:
        count = int(rng.integers(count_range[0], count_range[1] + 1))
        used = set()
        for _ in range(count):
            width = int(rng.integers(width_range[0], width_range[1] + 1))
            limit = max(w - width, 0)
            candidates = np.array([c for c in range(limit + 1) if c not in used])
            if candidates.size == 0:
                break
            start = int(rng.choice(candidates))
            used.add(start)
            y[:, start:start + width, band] = 0.0
    return y


def add_stripes(x, band_fraction, count_range, rng):
    """Add a constant offset, uniform in [-0.5, 0.5], along whole columns.

    ``floor(band_fraction * b)`` bands are drawn without replacement; each
    gets a stripe count from ``count_range`` (inclusive) on distinct columns.
    """
    x = np.asarray(x, dtype=np.float64)
    y = x.copy()
    _, w, b = x.shape
    n_bands = int(band_fraction * b)
    bands = rng.choice(b, size=n_bands, replace=False)
    for band in bands:
        count = int(rng.integers(count_range[0], count_range[1] + 1))
        cols = rng.choice(w, size=min(count, w), replace=False)
        offsets = rng.uniform(-0.5, 0.5, size=cols.size)
        y[:, cols, band] += offsets
    return y


def make_case(x_clean, spec):
    """Corrupt a clean cube per ``spec``; deterministic given ``spec.seed``."""
    if spec.case_id not in (1, 2, 3, 4, 5):
        raise ValueError(f"unknown case_id {spec.case_id}")
    rng = np.random.default_rng(spec.seed)
    y = add_gaussian(x_clean, spec.gaussian_std, rng)
    if spec.case_id >= 2:
        y = add_impulse(y, spec.impulse_rate, rng)
    if spec.case_id in (3, 5):
        y = add_deadlines(y, spec.deadline_band_fraction,
                          spec.deadline_count_range, spec.deadline_width_range, rng)
    if spec.case_id in (4, 5):
        y = add_stripes(y, spec.stripe_band_fraction, spec.stripe_count_range, rng)
    return y
