"""Transfer-matrix models of the bench elements.

Phase conventions:

* beam splitters (polarizing or not) put a factor ``i`` on reflection and
  no phase on transmission;
* lossless mirrors reflect with a factor ``-1`` (``MIRROR_PHASE``), the
  pi shift of an ideal conductor;
* the half-wave plate is set with its fast axis at 45 degrees, a pure V/H
  swap.

With these conventions the two-source bench emits ``(i/sqrt2)(|00> + |11>)``
including the overall factor ``i``.  Every transfer block acts on a
``(c_v, c_h)`` column, or on a ``(2, n)`` array of ensemble samples.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .algebra import COLOUR, Frequency, JonesVector, Path
from .errors import FrequencyCollision

REFLECTION_PHASE = 1j
MIRROR_PHASE = -1.0
_S = 1 / np.sqrt(2)


class Kind(enum.Enum):
    PBS = "PBS"
    BS = "BS"
    HWP = "HWP"
    POLARIZER_V = "PolarizerV"
    POLARIZER_H = "PolarizerH"
    MIRROR = "Mirror"
    DICHROIC = "Dichroic"


@dataclass(frozen=True)
class OpticalElement:
    kind: Kind
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    transfer: Mapping[tuple[str, str], np.ndarray] = field(repr=False)

    @property
    def lossless(self) -> bool:
        return self.kind in (Kind.PBS, Kind.BS, Kind.HWP, Kind.MIRROR)

    def block(self, in_port: str, out_port: str) -> np.ndarray:
        return self.transfer.get((in_port, out_port), np.zeros((2, 2), dtype=complex))

    def total_transfer(self) -> np.ndarray:
        """Block matrix mapping all input ports to all output ports."""
        return np.block([[self.block(i, o) for i in self.inputs] for o in self.outputs])

    def apply(self, fields: np.ndarray, in_port: str, out_port: str) -> np.ndarray:
        return self.block(in_port, out_port) @ np.asarray(fields)


def _element(kind, inputs, outputs, blocks) -> OpticalElement:
    transfer = {}
    for key, m in blocks.items():
        m = np.array(m, dtype=complex)
        m.setflags(write=False)
        transfer[key] = m
    return OpticalElement(kind, tuple(inputs), tuple(outputs), transfer)


_PV = np.diag([1, 0])
_PH = np.diag([0, 1])
_I2 = np.eye(2)

# "in2" is the second face of each splitter; it is unused on the bench but
# completes the unitary.
PBS = _element(Kind.PBS, ("in", "in2"), ("reflected", "transmitted"), {
    ("in", "reflected"): REFLECTION_PHASE * _PV,
    ("in", "transmitted"): _PH,
    ("in2", "reflected"): _PH,
    ("in2", "transmitted"): REFLECTION_PHASE * _PV,
})
BS = _element(Kind.BS, ("in", "in2"), ("reflected", "transmitted"), {
    ("in", "reflected"): REFLECTION_PHASE * _S * _I2,
    ("in", "transmitted"): _S * _I2,
    ("in2", "reflected"): _S * _I2,
    ("in2", "transmitted"): REFLECTION_PHASE * _S * _I2,
})
HWP = _element(Kind.HWP, ("in",), ("out",), {("in", "out"): [[0, 1], [1, 0]]})
MIRROR = _element(Kind.MIRROR, ("in",), ("out",), {("in", "out"): MIRROR_PHASE * _I2})
POLARIZER_V = _element(Kind.POLARIZER_V, ("in",), ("out",), {("in", "out"): _PV})
POLARIZER_H = _element(Kind.POLARIZER_H, ("in",), ("out",), {("in", "out"): _PH})
# Frequency channels never mix, so each input reaches the output unchanged.
DICHROIC = _element(Kind.DICHROIC, ("red", "blue"), ("out",), {
    ("red", "out"): _I2,
    ("blue", "out"): _I2,
})

POLARIZERS = {"V": POLARIZER_V, "H": POLARIZER_H}


def _through(element: OpticalElement, v: JonesVector, in_port: str, out_port: str,
             path: Optional[Path] = None) -> JonesVector:
    out = v.with_components(element.apply(v.components, in_port, out_port))
    return out.routed(path) if path is not None else out


def pbs_split(v: JonesVector, reflected_path: Optional[Path] = Path.A,
              transmitted_path: Optional[Path] = Path.B) -> tuple[JonesVector, JonesVector]:
    """Split into the reflected vertical and transmitted horizontal parts.

    Outputs are not renormalized: their intensities add up to the input's.
    On the bench the reflected beam feeds path ``a``.
    """
    return (_through(PBS, v, "in", "reflected", reflected_path),
            _through(PBS, v, "in", "transmitted", transmitted_path))


def bs_split(v: JonesVector, reflected_path: Optional[Path] = None,
             transmitted_path: Optional[Path] = None) -> tuple[JonesVector, JonesVector]:
    return (_through(BS, v, "in", "reflected", reflected_path),
            _through(BS, v, "in", "transmitted", transmitted_path))


def hwp_apply(v: JonesVector) -> JonesVector:
    return _through(HWP, v, "in", "out")


def mirror_apply(v: JonesVector) -> JonesVector:
    return _through(MIRROR, v, "in", "out")


def polarizer_apply(v: JonesVector, axis: str) -> JonesVector:
    """Project onto the V or H axis.

    The result is left unnormalized; its ``intensity`` is the transmitted
    fraction (Malus' law).
    """
    try:
        element = POLARIZERS[axis]
    except KeyError:
        raise ValueError(f"polarizer axis must be 'V' or 'H', got {axis!r}") from None
    return _through(element, v, "in", "out")


def beam_frequency(v: JonesVector) -> Frequency:
    freqs = {t.frequency for t in v.tags if t is not None}
    if len(freqs) != 1:
        raise ValueError("beam must carry exactly one frequency tag")
    return freqs.pop()


@dataclass(frozen=True)
class PathField:
    """Co-propagating frequency components of one output path."""

    path: Optional[Path]
    beams: Mapping[Frequency, JonesVector]

    @property
    def intensity(self) -> float:
        return sum(b.norm_sq for b in self.beams.values())

    def occupied_polarizations(self, frequency: Frequency) -> set[int]:
        comps = self.beams[frequency].components
        return {k for k in range(2) if abs(comps[k]) > 0}

    def describe(self) -> str:
        parts = []
        for freq, beam in self.beams.items():
            comps = ", ".join(f"{z:.6g}" for z in beam.components)
            parts.append(f"{COLOUR[freq]}: [{comps}]")
        return f"path {self.path.value if self.path else '?'} {{" + "; ".join(parts) + "}"


def dichroic_combine(red: JonesVector, blue: JonesVector,
                     path: Optional[Path] = None) -> PathField:
    """Merge two differently coloured beams into one path without mixing them.

    Zero-intensity inputs are dropped from the output.
    """
    f_red, f_blue = beam_frequency(red), beam_frequency(blue)
    if f_red is f_blue:
        raise FrequencyCollision(f"both inputs are at {f_red.value}")
    if path is None:
        path = red.path or blue.path
    beams = {}
    for port, beam, freq in (("red", red, f_red), ("blue", blue, f_blue)):
        if beam.norm_sq > 0:
            out = _through(DICHROIC, beam, port, "out", path)
            beams[freq] = out
    return PathField(path, beams)
