"""Monte Carlo ensembles of thermal (chaotic) light and their correlations.

Each realization is one draw of zero-mean circular complex Gaussian field
amplitudes at zero time lag in a single spatial mode.  Every channel has its own
counter-based Philox stream keyed by ``hash(seed, channel)``, so sample
``k`` of a channel is the same whatever the chunking or worker count.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Optional

import numpy as np

from .algebra import POL_NAMES, SOURCE_FREQUENCY, Frequency, H, Path, Source, V
from .circuit import BenchConfig
from .errors import (
    InvalidSampleCount,
    MissingChannels,
    SampleCountMismatch,
    UnknownChannel,
)
from .optics import BS, HWP, MIRROR, PBS, POLARIZERS

SIGMA_THRESHOLD = 5.0
CHUNK = 1 << 16
PREPS = ("unpolarized", "V", "H")


class Channel(NamedTuple):
    source: Source
    path: Optional[Path]
    pol: int

    def __str__(self):
        where = self.path.value if self.path is not None else "src"
        return f"{self.source.value}/{where}/{POL_NAMES[self.pol]}"


@dataclass(frozen=True)
class SourceSpec:
    id: Source
    polarization_prep: str = "unpolarized"
    mean_intensity: float = 1.0
    frequency: Optional[Frequency] = None

    def __post_init__(self):
        expected = SOURCE_FREQUENCY[self.id]
        if self.frequency is None:
            object.__setattr__(self, "frequency", expected)
        elif self.frequency is not expected:
            raise ValueError(f"{self.id.value} emits {expected.value}")
        if self.polarization_prep not in PREPS:
            raise ValueError(f"polarization_prep must be one of {PREPS}")
        if not self.mean_intensity > 0:
            raise ValueError("mean_intensity must be positive")


@dataclass(frozen=True, eq=False)
class FieldEnsemble:
    n_samples: int
    channels: Mapping[Channel, np.ndarray]
    seed: int

    def __post_init__(self):
        frozen = {}
        for key, arr in self.channels.items():
            arr = np.asarray(arr, dtype=complex)
            if arr.shape != (self.n_samples,):
                raise SampleCountMismatch(
                    f"channel {key} has shape {arr.shape}, expected ({self.n_samples},)")
            arr.setflags(write=False)
            frozen[key] = arr
        object.__setattr__(self, "channels", frozen)

    def __getitem__(self, key: Channel) -> np.ndarray:
        try:
            return self.channels[key]
        except KeyError:
            raise UnknownChannel(f"no channel {key}") from None

    def find(self, source: Source, path: Optional[Path]) -> Channel:
        """The single channel of ``source`` on ``path``."""
        keys = [k for k in self.channels if k.source is source and k.path is path]
        if len(keys) != 1:
            raise MissingChannels(
                f"expected one {source.value} channel on path "
                f"{path.value if path else 'src'}, found {len(keys)}")
        return keys[0]


@dataclass(frozen=True)
class CorrelationEstimate:
    value: complex
    std_error: float
    n_samples: int

    @property
    def sigma_distance(self) -> float:
        if self.std_error == 0:
            return 0.0 if self.value == 0 else math.inf
        return abs(self.value) / self.std_error

    def consistent_with_zero(self, threshold: float = SIGMA_THRESHOLD) -> bool:
        return abs(self.value) < threshold * self.std_error or self.value == 0


def channel_seed(seed: int, key) -> int:
    digest = hashlib.blake2b(f"{int(seed)}|{key}".encode(), digest_size=16).digest()
    return int.from_bytes(digest, "little")


def _gaussian_block(key: int, start: int, stop: int) -> np.ndarray:
    """Unit circular complex Gaussians for sample indices ``[start, stop)``.

    Sample ``k`` consumes raw draws ``2k`` and ``2k + 1``; a Philox counter
    step yields four draws, so the stream is entered at counter ``start // 2``.
    """
    first = start - start % 2
    bitgen = np.random.Philox(key=key)
    bitgen.advance(first // 2)
    raw = bitgen.random_raw(2 * (stop - first))[2 * (start - first):]
    u1 = ((raw[0::2] >> np.uint64(11)) + 1) * 2.0 ** -53   # (0, 1]
    u2 = (raw[1::2] >> np.uint64(11)) * 2.0 ** -53         # [0, 1)
    return np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u2)


def complex_gaussian(key: int, n: int, workers: int = 1, chunk: int = CHUNK) -> np.ndarray:
    bounds = [(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _gaussian_block(key, *b), bounds))
    else:
        parts = [_gaussian_block(key, *b) for b in bounds]
    return np.concatenate(parts)


def sample_source(spec: SourceSpec, n: int, seed: int, workers: int = 1,
                  chunk: int = CHUNK) -> FieldEnsemble:
    """Draw ``n`` realizations of a source's (V, H) field amplitudes."""
    if n < 1:
        raise InvalidSampleCount(f"n must be at least 1, got {n}")
    channels = {}
    for pol in (V, H):
        key = Channel(spec.id, None, pol)
        if spec.polarization_prep == "unpolarized":
            power = spec.mean_intensity / 2
        elif spec.polarization_prep == POL_NAMES[pol]:
            power = spec.mean_intensity
        else:
            channels[key] = np.zeros(n, dtype=complex)
            continue
        z = complex_gaussian(channel_seed(seed, key), n, workers, chunk)
        channels[key] = math.sqrt(power) * z
    return FieldEnsemble(n, channels, int(seed))


def _source_fields(e: FieldEnsemble, source: Source) -> np.ndarray:
    try:
        return np.stack([e.channels[Channel(source, None, V)],
                         e.channels[Channel(source, None, H)]])
    except KeyError:
        raise MissingChannels(f"ensemble has no {source.value} source channels") from None


def propagate_bench(e1: FieldEnsemble, e2: FieldEnsemble, cfg: BenchConfig) -> FieldEnsemble:
    """Push both source ensembles through the bench, realization by realization.

    The S2 polarizer named by ``cfg`` is part of the bench.  Output channels
    are the path-resolved components that carry light.
    """
    if e1.n_samples != e2.n_samples:
        raise SampleCountMismatch(f"{e1.n_samples} vs {e2.n_samples} samples")
    red = _source_fields(e1, Source.S1)
    blue = POLARIZERS[cfg.source2_polarizer].apply(_source_fields(e2, Source.S2), "in", "out")

    red_a = PBS.apply(red, "in", "reflected")
    red_b = PBS.apply(red, "in", "transmitted")
    blue_reflected = BS.apply(blue, "in", "reflected")
    blue_b = BS.apply(blue, "in", "transmitted")
    blue_a = MIRROR.apply(HWP.apply(MIRROR.apply(blue_reflected, "in", "out"), "in", "out"),
                          "in", "out")

    channels = {}
    for source, path, fields in ((Source.S1, Path.A, red_a), (Source.S2, Path.A, blue_a),
                                 (Source.S1, Path.B, red_b), (Source.S2, Path.B, blue_b)):
        for pol in (V, H):
            if np.any(fields[pol] != 0):
                channels[Channel(source, path, pol)] = fields[pol]
    return FieldEnsemble(e1.n_samples, channels, e1.seed)


def correlate(e: FieldEnsemble, ch1: Channel, ch2: Channel,
              conjugate_first: bool = True) -> CorrelationEstimate:
    """Sample mean of ``f(x1) * x2`` with its standard error."""
    x1, x2 = e[ch1], e[ch2]
    prod = (np.conj(x1) if conjugate_first else x1) * x2
    n = e.n_samples
    se = float(np.std(prod, ddof=1)) / math.sqrt(n) if n > 1 else math.inf
    return CorrelationEstimate(complex(prod.mean()), se, n)


def intensity(e: FieldEnsemble, ch: Channel) -> CorrelationEstimate:
    return correlate(e, ch, ch, conjugate_first=True)


def intensity_balance(e: FieldEnsemble, ch1: Channel, ch2: Channel) -> CorrelationEstimate:
    """Difference of two mean channel intensities, with the combined standard error."""
    i1, i2 = intensity(e, ch1), intensity(e, ch2)
    return CorrelationEstimate(i1.value - i2.value, math.hypot(i1.std_error, i2.std_error),
                               e.n_samples)


def anticoincidence_check(e: FieldEnsemble) -> CorrelationEstimate:
    """First-order correlation of the two red PBS outputs (V on a, H on b)."""
    a, b = Channel(Source.S1, Path.A, V), Channel(Source.S1, Path.B, H)
    missing = [str(k) for k in (a, b) if k not in e.channels]
    if missing:
        raise MissingChannels(f"ensemble lacks {', '.join(missing)}")
    return correlate(e, a, b)


@dataclass(frozen=True)
class ThermalCheck:
    name: str
    channels: tuple[str, str]
    estimate: CorrelationEstimate
    threshold: float = SIGMA_THRESHOLD

    @property
    def passed(self) -> bool:
        return self.estimate.consistent_with_zero(self.threshold)


def thermal_checks(n: int, seed: int, cfg: BenchConfig = BenchConfig("V"),
                   workers: int = 1) -> list[ThermalCheck]:
    """Sample both unpolarized sources, run the bench, and test every null correlation."""
    e1 = sample_source(SourceSpec(Source.S1), n, seed, workers)
    e2 = sample_source(SourceSpec(Source.S2), n, seed, workers)
    out = propagate_bench(e1, e2, cfg)

    src = FieldEnsemble(n, {**e1.channels, **e2.channels}, int(seed))
    s1v, s1h = Channel(Source.S1, None, V), Channel(Source.S1, None, H)
    red_a, blue_a = out.find(Source.S1, Path.A), out.find(Source.S2, Path.A)
    red_b, blue_b = out.find(Source.S1, Path.B), out.find(Source.S2, Path.B)

    def check(name, ens, c1, c2, conj=True):
        return ThermalCheck(name, (str(c1), str(c2)), correlate(ens, c1, c2, conj))

    checks = [
        check("unpolarized_cross", src, s1v, s1h, conj=False),
        ThermalCheck("unpolarized_balance", (str(s1v), str(s1h)),
                     intensity_balance(src, s1v, s1h)),
        check("same_path_a", out, red_a, blue_a),
        check("same_path_b", out, blue_b, red_b),
        check("cross_path_red_a_blue_b", out, red_a, blue_b),
        check("cross_path_blue_a_red_b", out, blue_a, red_b),
        check("anticoincidence", out, red_a, red_b),
    ]
    for c1 in (s1v, s1h):
        for c2 in (Channel(Source.S2, None, V), Channel(Source.S2, None, H)):
            checks.append(check("source_independence", src, c1, c2))
    return checks
