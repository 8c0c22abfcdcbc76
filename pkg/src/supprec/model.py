"""Problem model: configuration, deterministic streams, instance generation.

The observation model is y_i = phi_i @ x_i + w_i for i = 1..n, where the
x_i share one k-sized support, phi_i is m-by-d with i.i.d. N(0, 1/m)
entries, and w_i has i.i.d. N(0, sigma2) entries. Every random quantity is
drawn from a counter-based substream addressed by (seed, path), so a given
(config, seed) pair regenerates the exact same instance regardless of how
work is scheduled across workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np


class ConfigError(ValueError):
    """Invalid problem or experiment configuration."""


class SignalMode(str, Enum):
    CONSTANT_MAX = "constant_max"
    CONSTANT_MIN = "constant_min"
    UNIFORM_RANDOM_SIGN = "uniform_random_sign"
    FIXED_VECTOR = "fixed_vector"


class SupportMode(str, Enum):
    UNIFORM = "uniform"
    FIXED = "fixed"


_U64 = 2**64


@dataclass(frozen=True)
class Stream:
    """Deterministic random substream addressed by (seed, path).

    Children partition the key space, so streams with distinct paths are
    independent. Generators are backed by the counter-based Philox engine;
    the derivation only depends on (seed, path), never on draw order in
    sibling streams.
    """

    seed: int
    path: tuple[int, ...] = ()

    def child(self, *indices: int) -> "Stream":
        return Stream(self.seed, self.path + tuple(int(i) for i in indices))

    def _sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=self.path)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self._sequence()))

    def state_word(self) -> int:
        """A stable 64-bit digest of this stream, e.g. for logging."""
        lo, hi = self._sequence().generate_state(2, np.uint32)
        return (int(hi) << 32) | int(lo)


def derive_seed(seed: int, *path: int) -> int:
    """Derive an independent 64-bit seed from a master seed and a path."""
    return Stream(seed, tuple(int(p) for p in path)).state_word()


@dataclass(frozen=True)
class ProblemConfig:
    """All scalar parameters of one recovery problem plus generation options."""

    d: int
    k: int
    m: int
    n: int
    x_min: float = 1.0
    x_max: float = 1.0
    sigma2: float = 0.0
    signal_mode: SignalMode = SignalMode.CONSTANT_MIN
    support_mode: SupportMode = SupportMode.UNIFORM
    support_indices: tuple[int, ...] | None = None
    signal_values: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "signal_mode", SignalMode(self.signal_mode))
        object.__setattr__(self, "support_mode", SupportMode(self.support_mode))
        if self.support_indices is not None:
            object.__setattr__(
                self, "support_indices", tuple(int(i) for i in self.support_indices)
            )
        if self.signal_values is not None:
            object.__setattr__(
                self, "signal_values", tuple(float(v) for v in self.signal_values)
            )
        for name in ("d", "k", "m", "n"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.k > self.d:
            raise ConfigError(f"k={self.k} exceeds d={self.d}")
        if not (0.0 < self.x_min <= self.x_max):
            raise ConfigError(
                f"need 0 < x_min <= x_max, got x_min={self.x_min}, x_max={self.x_max}"
            )
        if self.sigma2 < 0.0:
            raise ConfigError(f"sigma2 must be nonnegative, got {self.sigma2}")
        if not (0 <= int(self.seed) < _U64):
            raise ConfigError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.support_mode is SupportMode.FIXED:
            if self.support_indices is None:
                raise ConfigError("support_mode=fixed requires support_indices")
            self._check_fixed_support(self.support_indices)
        elif self.support_indices is not None:
            raise ConfigError("support_indices given but support_mode is not fixed")
        if self.signal_mode is SignalMode.FIXED_VECTOR:
            if self.signal_values is None:
                raise ConfigError("signal_mode=fixed_vector requires signal_values")
            if len(self.signal_values) != self.k:
                raise ConfigError(
                    f"signal_values must have length k={self.k}, "
                    f"got {len(self.signal_values)}"
                )
            for v in self.signal_values:
                if not (self.x_min <= abs(v) <= self.x_max):
                    raise ConfigError(
                        f"signal value {v} has magnitude outside "
                        f"[{self.x_min}, {self.x_max}]"
                    )
        elif self.signal_values is not None:
            raise ConfigError("signal_values given but signal_mode is not fixed_vector")

    def _check_fixed_support(self, indices):
        if len(indices) != self.k:
            raise ConfigError(
                f"fixed support must have length k={self.k}, got {len(indices)}"
            )
        if len(set(indices)) != len(indices):
            raise ConfigError(f"fixed support has duplicate indices: {indices}")
        for i in indices:
            if not (0 <= i < self.d):
                raise ConfigError(f"support index {i} outside [0, {self.d})")


@dataclass(frozen=True)
class Support:
    """Strictly increasing index set of the common support."""

    indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ConfigError(f"support indices must be strictly increasing: {self.indices}")
        if self.indices and self.indices[0] < 0:
            raise ConfigError(f"support indices must be nonnegative: {self.indices}")

    @property
    def size(self) -> int:
        return len(self.indices)

    def mask(self, d: int) -> np.ndarray:
        out = np.zeros(d, dtype=bool)
        out[list(self.indices)] = True
        return out


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SignalSet:
    """The n signal vectors, one per row of ``vectors`` (shape (n, d))."""

    vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vectors", _frozen(self.vectors))


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Measurement matrices (n, m, d), noises (n, m), observations (n, m)."""

    matrices: np.ndarray
    noises: np.ndarray
    observations: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrices", _frozen(self.matrices))
        object.__setattr__(self, "noises", _frozen(self.noises))
        object.__setattr__(self, "observations", _frozen(self.observations))


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """One realized problem: config, support, signals and measurements."""

    config: ProblemConfig
    support: Support
    signals: SignalSet
    measurements: MeasurementSet

    def validate(self, rtol: float = 1e-10) -> None:
        """Check all structural invariants; raises ConfigError on violation."""
        cfg = self.config
        s = self.support
        if s.size != cfg.k:
            raise ConfigError(f"support size {s.size} != k={cfg.k}")
        if s.indices and s.indices[-1] >= cfg.d:
            raise ConfigError(f"support index {s.indices[-1]} outside [0, {cfg.d})")
        x = self.signals.vectors
        if x.shape != (cfg.n, cfg.d):
            raise ConfigError(f"signal array has shape {x.shape}, expected {(cfg.n, cfg.d)}")
        on = s.mask(cfg.d)
        mags = np.abs(x[:, on])
        slack = 1e-12 * cfg.x_max
        if mags.size and (mags.min() < cfg.x_min - slack or mags.max() > cfg.x_max + slack):
            raise ConfigError("on-support magnitudes leave [x_min, x_max]")
        if np.any(x[:, ~on] != 0.0):
            raise ConfigError("off-support signal entries must be exactly zero")
        phi = self.measurements.matrices
        w = self.measurements.noises
        y = self.measurements.observations
        if phi.shape != (cfg.n, cfg.m, cfg.d) or w.shape != (cfg.n, cfg.m) or y.shape != (cfg.n, cfg.m):
            raise ConfigError("measurement array shapes inconsistent with config")
        recomputed = np.einsum("imd,id->im", phi, x) + w
        scale = max(1.0, float(np.max(np.abs(y))) if y.size else 1.0)
        if float(np.max(np.abs(y - recomputed))) > rtol * scale:
            raise ConfigError("observations do not match phi @ x + w within tolerance")


# Fixed child indices of an instance's root stream. Signals, matrices and
# noises live in separate per-sample substreams so that changing one
# generation option (say sigma2 or the signal magnitudes) never shifts the
# draws of the others.
_CHILD_SUPPORT = 0
_CHILD_SIGNALS = 1
_CHILD_MATRICES = 2
_CHILD_NOISE = 3


def gen_support(config: ProblemConfig, stream: Stream) -> Support:
    """Draw (or validate) the common support."""
    if config.support_mode is SupportMode.FIXED:
        return Support(tuple(sorted(config.support_indices)))
    rng = stream.generator()
    idx = rng.choice(config.d, size=config.k, replace=False)
    return Support(tuple(sorted(int(i) for i in idx)))


def gen_signals(config: ProblemConfig, support: Support, stream: Stream) -> SignalSet:
    """Generate the n signal vectors for the given support."""
    if support.size != config.k:
        raise ConfigError(f"support size {support.size} != k={config.k}")
    n, d = config.n, config.d
    cols = list(support.indices)
    x = np.zeros((n, d), dtype=np.float64)
    mode = config.signal_mode
    if mode is SignalMode.CONSTANT_MAX:
        x[:, cols] = config.x_max
    elif mode is SignalMode.CONSTANT_MIN:
        x[:, cols] = config.x_min
    elif mode is SignalMode.FIXED_VECTOR:
        x[:, cols] = np.asarray(config.signal_values, dtype=np.float64)
    else:
        span = config.x_max - config.x_min
        for i in range(n):
            g = stream.child(i).generator()
            mags = config.x_min + span * g.random(config.k)
            signs = 2.0 * g.integers(0, 2, size=config.k) - 1.0
            x[i, cols] = signs * mags
    return SignalSet(x)


def gen_measurements(config: ProblemConfig, signals: SignalSet, stream: Stream) -> MeasurementSet:
    """Draw measurement matrices and noise, and form the observations.

    Matrix entries are standard normals scaled by 1/sqrt(m); noise is stored
    as sqrt(sigma2) times standard normal draws, so regenerating with a
    scaled (x, sigma) pair reuses the identical underlying draws.
    """
    n, m, d = config.n, config.m, config.d
    x = signals.vectors
    if x.shape != (n, d):
        raise ConfigError(f"signal array has shape {x.shape}, expected {(n, d)}")
    scale = 1.0 / math.sqrt(m)
    sig = math.sqrt(config.sigma2)
    phi = np.empty((n, m, d), dtype=np.float64)
    w = np.empty((n, m), dtype=np.float64)
    mat_stream = stream.child(_CHILD_MATRICES)
    noise_stream = stream.child(_CHILD_NOISE)
    for i in range(n):
        g = mat_stream.child(i).generator()
        phi[i] = g.standard_normal((m, d)) * scale
        if sig == 0.0:
            w[i] = 0.0  # own substream, so skipping draws shifts nothing else
        else:
            gz = noise_stream.child(i).generator()
            w[i] = gz.standard_normal(m) * sig
    y = np.einsum("imd,id->im", phi, x) + w
    return MeasurementSet(phi, w, y)


def generate_instance(config: ProblemConfig, stream: Stream | None = None) -> ProblemInstance:
    """Generate a full problem instance from (config, stream).

    With the default stream the instance is a pure function of the config
    (including its seed). Passing an explicit stream lets callers embed
    instance generation in a larger reproducible experiment.
    """
    if stream is None:
        stream = Stream(config.seed)
    support = gen_support(config, stream.child(_CHILD_SUPPORT))
    signals = gen_signals(config, support, stream.child(_CHILD_SIGNALS))
    measurements = gen_measurements(config, signals, stream)
    return ProblemInstance(config, support, signals, measurements)


def save_instance(instance: ProblemInstance, path) -> None:
    """Dump an instance to an ``.npz`` file that round-trips bit-exactly."""
    cfg = asdict(instance.config)
    cfg["signal_mode"] = instance.config.signal_mode.value
    cfg["support_mode"] = instance.config.support_mode.value
    np.savez(
        path,
        config_json=np.array(json.dumps(cfg, sort_keys=True)),
        support=np.array(instance.support.indices, dtype=np.int64),
        signals=instance.signals.vectors,
        matrices=instance.measurements.matrices,
        noises=instance.measurements.noises,
        observations=instance.measurements.observations,
    )


def load_instance(path) -> ProblemInstance:
    """Load an instance written by ``save_instance``."""
    with np.load(path, allow_pickle=False) as data:
        cfg_dict = json.loads(str(data["config_json"]))
        if cfg_dict.get("support_indices") is not None:
            cfg_dict["support_indices"] = tuple(cfg_dict["support_indices"])
        if cfg_dict.get("signal_values") is not None:
            cfg_dict["signal_values"] = tuple(cfg_dict["signal_values"])
        config = ProblemConfig(**cfg_dict)
        support = Support(tuple(int(i) for i in data["support"]))
        signals = SignalSet(data["signals"])
        measurements = MeasurementSet(data["matrices"], data["noises"], data["observations"])
    return ProblemInstance(config, support, signals, measurements)
