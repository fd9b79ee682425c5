"""The two-source bench that synthesizes the Bell-analog states, plus product states.

Bench topology (fixed):

    S1 (red, unpolarized) --PBS--reflected (V)------------------> DM1 -> path a
                              \\--transmitted (H)---------------> DM2 -> path b
    S2 (blue) --polarizer--BS--transmitted----------------------> DM2
                              \\--reflected--M1--HWP--M2--------> DM1

The PBS plays the Hadamard role and BS + HWP the CNOT role.  With a
vertical polarizer on S2 the output is ``(i/sqrt2)(|00> + |11>)``; with a
horizontal one it is ``(i/sqrt2)(|01> + |10>)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .algebra import (
    CompositeState,
    Frequency,
    JonesVector,
    ModeTag,
    Path,
    Source,
    normalize,
    tensor,
)
from .optics import (
    PathField,
    bs_split,
    dichroic_combine,
    hwp_apply,
    mirror_apply,
    pbs_split,
    polarizer_apply,
)

_S = 1 / np.sqrt(2)
FREQUENCY_LABEL = {Frequency.OMEGA1: 0, Frequency.OMEGA2: 1}


@dataclass(frozen=True)
class BenchConfig:
    source2_polarizer: str = "V"
    seed: Optional[int] = None

    def __post_init__(self):
        if self.source2_polarizer not in ("V", "H"):
            raise ValueError(
                f"source2_polarizer must be 'V' or 'H', got {self.source2_polarizer!r}"
            )


@dataclass(frozen=True)
class ProductStateParams:
    alpha: float
    beta: float
    gamma: float
    delta: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.alpha, self.beta, self.gamma, self.delta])):
            raise ValueError("product-state parameters must be finite")


@dataclass(frozen=True)
class TraceRecord:
    element: str
    input: Any
    output: Any


def unpolarized_amplitude(source: Source) -> JonesVector:
    """Deterministic stand-in for an unpolarized beam: equal V and H."""
    return JonesVector.of(_S, _S, ModeTag(source))


def _path_labels(field: PathField) -> tuple[str, dict[Frequency, int]]:
    """How the two modes of a path are told apart, and each mode's label."""
    pols = {}
    for freq in field.beams:
        occupied = field.occupied_polarizations(freq)
        if len(occupied) != 1:
            raise ValueError(f"{field.describe()} is not a single-polarization mode")
        pols[freq] = occupied.pop()
    if len(set(pols.values())) == len(pols):
        return "polarization", pols
    return "frequency", {f: FREQUENCY_LABEL[f] for f in pols}


def two_source_state(field_a: PathField, field_b: PathField) -> CompositeState:
    """Normalized tensor product of the two path fields, two-source sector only.

    Each path holds one red and one blue mode.  Terms in which the same
    source would appear on both paths are dropped, leaving the terms with
    one red and one blue component.  A path's modes are labeled by
    polarization when they are orthogonally polarized and by frequency
    (omega1 -> 0, omega2 -> 1) when they share a polarization.
    """
    kind_a, label_a = _path_labels(field_a)
    kind_b, label_b = _path_labels(field_b)
    terms: dict[tuple[int, int], complex] = {}
    tags = {}
    for fa, beam_a in field_a.beams.items():
        for fb, beam_b in field_b.beams.items():
            if fa is fb:
                continue
            pa = next(iter(field_a.occupied_polarizations(fa)))
            pb = next(iter(field_b.occupied_polarizations(fb)))
            key = (label_a[fa], label_b[fb])
            if key in terms:
                raise ValueError(f"two terms map to basis index {key}")
            terms[key] = beam_a.components[pa] * beam_b.components[pb]
            tags[key] = (beam_a.tags[pa], beam_b.tags[pb])
    return normalize(CompositeState.from_terms(terms, mode_tags=tags, labels=(kind_a, kind_b)))


def trace_bench(cfg: BenchConfig) -> list[TraceRecord]:
    """Propagate the bench step by step; the last record holds the output state."""
    trace = []
    s1 = unpolarized_amplitude(Source.S1)
    s2_raw = unpolarized_amplitude(Source.S2)
    trace.append(TraceRecord("S1", None, s1))
    trace.append(TraceRecord("S2", None, s2_raw))

    polarized = polarizer_apply(s2_raw, cfg.source2_polarizer)
    trace.append(TraceRecord(f"P{cfg.source2_polarizer}", s2_raw, polarized))
    s2 = normalize(polarized)
    trace.append(TraceRecord("renormalize", polarized, s2))

    red_a, red_b = pbs_split(s1, Path.A, Path.B)
    trace.append(TraceRecord("PBS", s1, (red_a, red_b)))

    blue_reflected, blue_b = bs_split(s2, transmitted_path=Path.B)
    trace.append(TraceRecord("BS", s2, (blue_reflected, blue_b)))

    m1 = mirror_apply(blue_reflected)
    trace.append(TraceRecord("M1", blue_reflected, m1))
    swapped = hwp_apply(m1)
    trace.append(TraceRecord("HWP", m1, swapped))
    blue_a = mirror_apply(swapped).routed(Path.A)
    trace.append(TraceRecord("M2", swapped, blue_a))

    field_a = dichroic_combine(red_a, blue_a, Path.A)
    trace.append(TraceRecord("DM1", (red_a, blue_a), field_a))
    field_b = dichroic_combine(red_b, blue_b, Path.B)
    trace.append(TraceRecord("DM2", (red_b, blue_b), field_b))

    state = two_source_state(field_a, field_b)
    trace.append(TraceRecord("output", (field_a, field_b), state))
    return trace


def build_bell_analog(cfg: BenchConfig) -> CompositeState:
    return trace_bench(cfg)[-1].output


def build_product_state(p: ProductStateParams) -> CompositeState:
    """``(cos a|0> + e^{ib} sin a|1>)_a (x) (cos g|0> + e^{id} sin g|1>)_b``."""
    beam_a = JonesVector.of(np.cos(p.alpha), np.exp(1j * p.beta) * np.sin(p.alpha))
    beam_b = JonesVector.of(np.cos(p.gamma), np.exp(1j * p.delta) * np.sin(p.gamma))
    return tensor(beam_a, beam_b)


def reference_state(source2_polarizer: str) -> CompositeState:
    """The target output written out by hand: phi+ analog for V, psi+ analog for H."""
    terms = {"V": ((0, 0), (1, 1)), "H": ((0, 1), (1, 0))}[source2_polarizer]
    return CompositeState.from_terms({t: 1j * _S for t in terms})
