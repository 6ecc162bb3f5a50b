"""Deterministic splittable random streams and finite-activity jump sampling.

Streams are value-like: an :class:`RngStream` is a key, not a stateful
generator. Deriving children (`child`, `substream`) never consumes
randomness, so any part of a simulation can be replayed in isolation.
The underlying bit generator is counter-based (Philox) keyed through
``numpy``'s ``SeedSequence``, which is stable across platforms.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ConfigurationError

__all__ = [
    "RngStream",
    "PointMass",
    "Uniform",
    "TruncatedGaussian",
    "JumpMeasureSpec",
    "sample_jump_times",
    "sample_jump_times_batch",
    "sample_jump_size",
    "compensator_rate",
    "jump_expectation",
]

_MASK64 = (1 << 64) - 1


def _tag(purpose: str) -> int:
    # crc32 is stable across runs and platforms, unlike hash().
    return zlib.crc32(purpose.encode("utf-8"))


@dataclass(frozen=True)
class RngStream:
    """Key for a reproducible random stream.

    Same (master_seed, stream_id, tags) always yields the same draw
    sequence. Distinct keys give statistically independent streams.
    A single stream must not be shared by concurrent consumers; derive
    children instead.
    """

    master_seed: int
    stream_id: int = 0
    tags: tuple[int, ...] = ()

    def __post_init__(self):
        if not (0 <= int(self.master_seed) <= _MASK64):
            raise ConfigurationError("master_seed must fit in 64 bits")

    def child(self, purpose: str) -> "RngStream":
        """Derive an independent stream for a named purpose."""
        return replace(self, tags=self.tags + (_tag(purpose),))

    def substream(self, index: int) -> "RngStream":
        """Derive an independent stream for a numbered work unit."""
        if index < 0:
            raise ConfigurationError("substream index must be nonnegative")
        return replace(self, tags=self.tags + (int(index),))

    def generator(self) -> np.random.Generator:
        """Fresh counter-based generator positioned at the stream origin."""
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed),
            spawn_key=(int(self.stream_id),) + self.tags,
        )
        return np.random.Generator(np.random.Philox(seq))


def as_generator(stream) -> np.random.Generator:
    """Accept either an RngStream or an already-opened Generator."""
    if isinstance(stream, RngStream):
        return stream.generator()
    if isinstance(stream, np.random.Generator):
        return stream
    raise ConfigurationError(f"expected RngStream or Generator, got {type(stream)!r}")


# ---------------------------------------------------------------------------
# Jump-size families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointMass:
    """Degenerate jump size: every mark equals `value`."""

    value: float

    def moments(self) -> tuple[float, float]:
        return float(self.value), float(self.value) ** 2

    def support(self) -> tuple[float, float]:
        return float(self.value), float(self.value)

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, float(self.value))

    def quadrature(self, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
        return np.array([float(self.value)]), np.array([1.0])

    def to_dict(self) -> dict:
        return {"kind": "point_mass", "value": float(self.value)}


@dataclass(frozen=True)
class Uniform:
    """Uniform jump sizes on [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ConfigurationError("uniform size family needs hi > lo")

    def moments(self) -> tuple[float, float]:
        lo, hi = float(self.lo), float(self.hi)
        return 0.5 * (lo + hi), (lo * lo + lo * hi + hi * hi) / 3.0

    def support(self) -> tuple[float, float]:
        return float(self.lo), float(self.hi)

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        return gen.uniform(self.lo, self.hi, size)

    def quadrature(self, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
        nodes, weights = np.polynomial.legendre.leggauss(n)
        half = 0.5 * (self.hi - self.lo)
        mid = 0.5 * (self.hi + self.lo)
        # weights of leggauss sum to 2; the density is 1/(hi-lo).
        return mid + half * nodes, 0.5 * weights

    def to_dict(self) -> dict:
        return {"kind": "uniform", "lo": float(self.lo), "hi": float(self.hi)}


@dataclass(frozen=True)
class TruncatedGaussian:
    """Gaussian(mu, sd) conditioned on [-bound, bound]."""

    mu: float
    sd: float
    bound: float

    def __post_init__(self):
        if self.sd <= 0 or self.bound <= 0:
            raise ConfigurationError("truncated gaussian needs sd > 0 and bound > 0")
        if abs(self.mu) >= self.bound:
            raise ConfigurationError("truncated gaussian mean must lie inside the bound")

    def _pieces(self):
        a = (-self.bound - self.mu) / self.sd
        b = (self.bound - self.mu) / self.sd
        fa, fb = _phi(a), _phi(b)
        z = ndtr(b) - ndtr(a)
        return a, b, fa, fb, z

    def moments(self) -> tuple[float, float]:
        a, b, fa, fb, z = self._pieces()
        mean = self.mu + self.sd * (fa - fb) / z
        var = self.sd**2 * (1.0 + (a * fa - b * fb) / z - ((fa - fb) / z) ** 2)
        return float(mean), float(var + mean * mean)

    def support(self) -> tuple[float, float]:
        return -float(self.bound), float(self.bound)

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        a, b, _, _, _ = self._pieces()
        u = gen.uniform(0.0, 1.0, size)
        p = ndtr(a) + u * (ndtr(b) - ndtr(a))
        return self.mu + self.sd * ndtri(p)

    def quadrature(self, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
        nodes, weights = np.polynomial.legendre.leggauss(n)
        half = float(self.bound)
        x = half * nodes
        _, _, _, _, z = self._pieces()
        dens = _phi((x - self.mu) / self.sd) / (self.sd * z)
        w = weights * half * dens
        return x, w / w.sum()

    def to_dict(self) -> dict:
        return {
            "kind": "truncated_gaussian",
            "mu": float(self.mu),
            "sd": float(self.sd),
            "bound": float(self.bound),
        }


def _phi(x):
    return np.exp(-0.5 * np.asarray(x) ** 2) / np.sqrt(2.0 * np.pi)


def size_family_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "point_mass":
        return PointMass(d["value"])
    if kind == "uniform":
        return Uniform(d["lo"], d["hi"])
    if kind == "truncated_gaussian":
        return TruncatedGaussian(d["mu"], d["sd"], d["bound"])
    raise ConfigurationError(f"unknown jump size family {kind!r}")


# ---------------------------------------------------------------------------
# Jump measure
# ---------------------------------------------------------------------------

_MOMENT_TOL = 1e-12


@dataclass(frozen=True)
class JumpMeasureSpec:
    """Finite-activity jump measure: event rate plus mark distribution.

    `m1` and `m2` are the first and second moments of the mark law. They
    may be declared explicitly, in which case construction validates them
    against the family's analytic moments to within 1e-12.
    """

    intensity: float
    size: PointMass | Uniform | TruncatedGaussian
    m1: float = None  # type: ignore[assignment]
    m2: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.intensity < 0:
            raise ConfigurationError("jump intensity must be nonnegative")
        a1, a2 = self.size.moments()
        if self.m1 is None:
            object.__setattr__(self, "m1", a1)
        elif abs(self.m1 - a1) > _MOMENT_TOL * max(1.0, abs(a1)):
            raise ConfigurationError(
                f"declared m1={self.m1!r} disagrees with analytic {a1!r}"
            )
        if self.m2 is None:
            object.__setattr__(self, "m2", a2)
        elif abs(self.m2 - a2) > _MOMENT_TOL * max(1.0, abs(a2)):
            raise ConfigurationError(
                f"declared m2={self.m2!r} disagrees with analytic {a2!r}"
            )
        if not np.isfinite(self.m2):
            raise ConfigurationError("second mark moment must be finite")

    def to_dict(self) -> dict:
        return {"intensity": float(self.intensity), "size": self.size.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "JumpMeasureSpec":
        return cls(intensity=d["intensity"], size=size_family_from_dict(d["size"]))


def default_jump_measure(intensity: float = 1.0) -> JumpMeasureSpec:
    """Mean-zero bounded marks used by the built-in example models."""
    return JumpMeasureSpec(intensity=intensity, size=Uniform(-0.5, 0.5))


# ---------------------------------------------------------------------------
# Sampling operations
# ---------------------------------------------------------------------------


def sample_jump_times(intensity: float, horizon: float, stream) -> np.ndarray:
    """Event times of a constant-rate Poisson stream on (0, horizon].

    Exponential inter-arrival construction; strictly increasing output.
    """
    if intensity < 0:
        raise ConfigurationError("intensity must be nonnegative")
    if not horizon > 0:
        raise ConfigurationError("horizon must be positive")
    if intensity == 0:
        return np.empty(0)
    gen = as_generator(stream)
    mean_count = intensity * horizon
    block = max(16, int(mean_count + 6.0 * np.sqrt(mean_count) + 16))
    gaps = gen.exponential(1.0 / intensity, block)
    times = np.cumsum(gaps)
    while times[-1] <= horizon:
        more = gen.exponential(1.0 / intensity, block)
        times = np.concatenate([times, times[-1] + np.cumsum(more)])
    return times[times <= horizon]


def sample_jump_times_batch(
    intensity: float, horizon: float, n_paths: int, stream
) -> tuple[np.ndarray, np.ndarray]:
    """Event times for many independent paths at once.

    Uses the conditional-uniformity construction (Poisson count, then
    order statistics), which is distribution-exact and vectorizes.
    Returns (path_index, time) sorted by path then time.
    """
    if intensity < 0:
        raise ConfigurationError("intensity must be nonnegative")
    if not horizon > 0:
        raise ConfigurationError("horizon must be positive")
    if intensity == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    gen = as_generator(stream)
    counts = gen.poisson(intensity * horizon, n_paths)
    total = int(counts.sum())
    times = gen.uniform(0.0, horizon, total)
    paths = np.repeat(np.arange(n_paths, dtype=np.int64), counts)
    order = np.lexsort((times, paths))
    return paths[order], times[order]


def sample_jump_size(spec: JumpMeasureSpec, stream, size: int | None = None):
    """Draw mark(s) from the measure's size family."""
    gen = as_generator(stream)
    out = spec.size.sample(gen, 1 if size is None else size)
    return float(out[0]) if size is None else out


def compensator_rate(spec: JumpMeasureSpec) -> float:
    """First moment of the measure, intensity * m1 = integral of z nu(dz)."""
    return float(spec.intensity) * float(spec.m1)


def jump_expectation(spec: JumpMeasureSpec, fn, n_nodes: int = 64):
    """intensity * E[fn(Z)] by quadrature over the mark law.

    `fn` maps a mark array (k,) to values (k,) or (k, d); the return value
    carries the same trailing shape.
    """
    nodes, weights = spec.size.quadrature(n_nodes)
    vals = np.asarray(fn(nodes))
    return float(spec.intensity) * np.tensordot(weights, vals, axes=(0, 0))
