"""Two-mode Jones vectors, two-beam composite states and operators on them.

Basis conventions used throughout the package:

* a Jones vector is ``(c_v, c_h)``: index 0 is vertical ``|0>``, index 1 is
  horizontal ``|1>``;
* a composite state is a flat 4-vector over ``(label_a, label_b)`` with
  flat index ``2 * label_a + label_b``.  Factor one is always beam ``a``,
  factor two beam ``b``; source identity is carried as metadata
  (:class:`ModeTag`), never as a tensor factor.

Tolerances are module-level constants.  Functions read them at call time,
so tests may monkeypatch them.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from .errors import NonHermitian, TagConflict, ZeroNorm

V, H = 0, 1
POL_NAMES = ("V", "H")

ZERO_NORM_SQ = 1e-30
NORM_TOL = 1e-12
IDEMPOTENCE_TOL = 1e-14
SCHMIDT_TOL = 1e-10
HERMITIAN_TOL = 1e-10
IMAG_TOL = 1e-10
PHASE_EQ_TOL = 1e-10


class Source(enum.Enum):
    S1 = "S1"
    S2 = "S2"


class Frequency(enum.Enum):
    OMEGA1 = "omega1"
    OMEGA2 = "omega2"


class Path(enum.Enum):
    A = "a"
    B = "b"


class Support(enum.Enum):
    PATH_A = "path_a"
    PATH_B = "path_b"
    JOINT = "joint"


SOURCE_FREQUENCY = {Source.S1: Frequency.OMEGA1, Source.S2: Frequency.OMEGA2}
COLOUR = {Frequency.OMEGA1: "red", Frequency.OMEGA2: "blue"}


@dataclass(frozen=True)
class ModeTag:
    """Which source a field component comes from and which path it is on.

    ``path`` is None for light that has not been routed yet.  The frequency
    is fixed by the source and is filled in when omitted.
    """

    source: Source
    path: Optional[Path] = None
    frequency: Optional[Frequency] = None

    def __post_init__(self):
        expected = SOURCE_FREQUENCY[self.source]
        if self.frequency is None:
            object.__setattr__(self, "frequency", expected)
        elif self.frequency is not expected:
            raise ValueError(
                f"{self.source.value} emits {expected.value}, not {self.frequency.value}"
            )

    def routed(self, path: Path) -> "ModeTag":
        return ModeTag(self.source, path)

    @property
    def name(self) -> str:
        return f"{self.source.value}-{COLOUR[self.frequency]}"

    def label(self, pol: int) -> str:
        return f"{self.name}-{POL_NAMES[pol]}"


Tags = tuple[Optional[ModeTag], Optional[ModeTag]]


def _frozen_array(values, shape) -> np.ndarray:
    if (isinstance(values, np.ndarray) and not values.flags.writeable
            and values.dtype == complex and values.shape == shape):
        arr = values
    else:
        arr = np.array(values, dtype=complex).reshape(shape)
    if not np.isfinite(arr).all():
        raise ValueError("amplitudes must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class JonesVector:
    """Polarization state of one beam.

    ``intensity`` is the squared norm the vector had before normalization
    (the physical intensity); it defaults to the squared norm of
    ``components``.  ``tags`` holds one optional :class:`ModeTag` per
    polarization component, since the two components of a combined path
    field may come from different sources.
    """

    components: np.ndarray
    intensity: Optional[float] = None
    tags: Tags = (None, None)

    def __post_init__(self):
        comps = _frozen_array(self.components, (2,))
        object.__setattr__(self, "components", comps)
        if self.intensity is None:
            object.__setattr__(self, "intensity", float(np.vdot(comps, comps).real))
        if len(self.tags) != 2:
            raise ValueError("tags must have one entry per polarization component")
        object.__setattr__(self, "tags", tuple(self.tags))

    @classmethod
    def of(cls, c_v: complex, c_h: complex, tag: Optional[ModeTag] = None) -> "JonesVector":
        return cls(np.array([c_v, c_h]), tags=(tag, tag))

    @property
    def v(self) -> complex:
        return complex(self.components[V])

    @property
    def h(self) -> complex:
        return complex(self.components[H])

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.components, self.components).real)

    @property
    def path(self) -> Optional[Path]:
        paths = {t.path for t in self.tags if t is not None and t.path is not None}
        if len(paths) > 1:
            raise TagConflict("Jones vector components are tagged with different paths")
        return paths.pop() if paths else None

    def with_components(self, components, intensity=None) -> "JonesVector":
        return JonesVector(components, intensity, self.tags)

    def routed(self, path: Path) -> "JonesVector":
        tags = tuple(t.routed(path) if t is not None else None for t in self.tags)
        return JonesVector(self.components, self.intensity, tags)

    def __eq__(self, other):
        if not isinstance(other, JonesVector):
            return NotImplemented
        return (
            np.array_equal(self.components, other.components)
            and self.intensity == other.intensity
            and self.tags == other.tags
        )

    def __repr__(self):
        c = ", ".join(f"{z:.6g}" for z in self.components)
        return f"JonesVector([{c}], intensity={self.intensity:.6g})"


@dataclass(frozen=True, eq=False)
class CompositeState:
    """Joint state of beams ``a`` and ``b`` as a flat 4-vector.

    ``mode_tags`` maps a basis index ``(label_a, label_b)`` to the tags of
    the light occupying path ``a`` and path ``b`` in that term.  It is empty
    for abstract (untagged) states; when present it must cover every
    nonzero amplitude.

    ``labels`` names the degree of freedom that distinguishes the two basis
    modes in each path: ``"polarization"`` (V=0, H=1) or ``"frequency"``
    (omega1=0, omega2=1, used when both modes of a path share a
    polarization).
    """

    amplitudes: np.ndarray
    mode_tags: Mapping[tuple[int, int], tuple[ModeTag, ModeTag]] = field(default_factory=dict)
    labels: tuple[str, str] = ("polarization", "polarization")

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _frozen_array(self.amplitudes, (4,)))
        object.__setattr__(self, "mode_tags", dict(self.mode_tags))
        if self.mode_tags:
            for idx in np.flatnonzero(np.abs(self.amplitudes) > 0):
                key = divmod(int(idx), 2)
                pair = self.mode_tags.get(key)
                if pair is None or None in pair:
                    raise TagConflict(f"nonzero term {key} has no complete mode tag")

    @classmethod
    def from_terms(cls, terms: Mapping[tuple[int, int], complex], **kw) -> "CompositeState":
        amps = np.zeros(4, dtype=complex)
        for (i, j), c in terms.items():
            amps[2 * i + j] = c
        return cls(amps, **kw)

    @property
    def matrix(self) -> np.ndarray:
        """Amplitudes reshaped to ``M[label_a, label_b]``."""
        return self.amplitudes.reshape(2, 2)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def amplitude(self, i: int, j: int) -> complex:
        return complex(self.amplitudes[2 * i + j])

    def __eq__(self, other):
        if not isinstance(other, CompositeState):
            return NotImplemented
        return (
            np.array_equal(self.amplitudes, other.amplitudes)
            and self.mode_tags == other.mode_tags
            and self.labels == other.labels
        )

    def __repr__(self):
        terms = [
            f"({z:.6g})|{i}{j}>"
            for (i, j), z in ((divmod(k, 2), self.amplitudes[k]) for k in range(4))
            if abs(z) > 0
        ]
        return "CompositeState(" + " + ".join(terms or ["0"]) + ")"


State = Union[JonesVector, CompositeState]


@dataclass(frozen=True, eq=False)
class Operator:
    """A 2x2 single-beam or 4x4 two-beam operator.

    A 2x2 matrix with support ``PATH_A``/``PATH_B`` acts on that beam only;
    :meth:`full` lifts it to the composite space.
    """

    matrix: np.ndarray
    support: Support = Support.JOINT

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape not in ((2, 2), (4, 4)):
            raise ValueError(f"operator must be 2x2 or 4x4, got {m.shape}")
        if m.shape == (2, 2) and self.support is Support.JOINT:
            raise ValueError("a 2x2 operator needs a single-path support")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def full(self) -> np.ndarray:
        if self.matrix.shape == (4, 4):
            return self.matrix
        if self.support is Support.PATH_A:
            return np.kron(self.matrix, np.eye(2))
        return np.kron(np.eye(2), self.matrix)

    def dagger(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.support)

    def __matmul__(self, other: "Operator") -> "Operator":
        if (
            self.support is other.support
            and self.support is not Support.JOINT
            and self.matrix.shape == other.matrix.shape
        ):
            return Operator(self.matrix @ other.matrix, self.support)
        return Operator(self.full() @ other.full(), Support.JOINT)

    def __add__(self, other: "Operator") -> "Operator":
        if self.support is other.support and self.matrix.shape == other.matrix.shape:
            return Operator(self.matrix + other.matrix, self.support)
        return Operator(self.full() + other.full(), Support.JOINT)

    def __sub__(self, other: "Operator") -> "Operator":
        if self.support is other.support and self.matrix.shape == other.matrix.shape:
            return Operator(self.matrix - other.matrix, self.support)
        return Operator(self.full() - other.full(), Support.JOINT)


def identity(support: Support = Support.JOINT) -> Operator:
    return Operator(np.eye(4 if support is Support.JOINT else 2), support)


def commutator(a: Operator, b: Operator) -> np.ndarray:
    fa, fb = a.full(), b.full()
    return fa @ fb - fb @ fa


def normalize(x: State) -> State:
    """Return ``x`` scaled to unit norm.

    A Jones vector keeps its original squared norm in ``intensity``.  Input
    already normalized to rounding error is returned unchanged, which makes
    the operation exactly idempotent.
    """
    if isinstance(x, JonesVector):
        vec = x.components
    elif isinstance(x, CompositeState):
        vec = x.amplitudes
    else:
        raise TypeError(f"cannot normalize {type(x).__name__}")

    norm_sq = float(np.vdot(vec, vec).real)
    if norm_sq < ZERO_NORM_SQ:
        raise ZeroNorm(f"squared norm {norm_sq:.3g} is below {ZERO_NORM_SQ:g}")
    if abs(norm_sq - 1.0) <= IDEMPOTENCE_TOL:
        return x

    scaled = vec / np.sqrt(norm_sq)
    if isinstance(x, JonesVector):
        return JonesVector(scaled, x.intensity, x.tags)
    return CompositeState(scaled, x.mode_tags, x.labels)


def is_normalized(x: State, tol: Optional[float] = None) -> bool:
    tol = NORM_TOL if tol is None else tol
    return abs(x.norm_sq - 1.0) <= tol


def tensor(beam_a: JonesVector, beam_b: JonesVector) -> CompositeState:
    """Normalized tensor product, beam ``a`` as the first factor."""
    path_a, path_b = beam_a.path, beam_b.path
    if path_a is not None and path_b is not None and path_a is path_b:
        raise TagConflict(f"both beams are on path {path_a.value}")
    if path_a is Path.B or path_b is Path.A:
        raise TagConflict("first factor must be the path-a beam, second the path-b beam")

    amps = np.outer(beam_a.components, beam_b.components)
    tags = {}
    if all(t is not None for t in beam_a.tags + beam_b.tags):
        for i in range(2):
            for j in range(2):
                if amps[i, j] != 0:
                    tags[(i, j)] = (beam_a.tags[i], beam_b.tags[j])
    return normalize(CompositeState(amps.ravel(), tags))


def schmidt_coefficients(s: CompositeState) -> np.ndarray:
    return np.linalg.svd(s.matrix, compute_uv=False)


def schmidt_rank(s: CompositeState) -> int:
    """Number of Schmidt coefficients above ``SCHMIDT_TOL``; 1 means product."""
    return int(np.count_nonzero(schmidt_coefficients(s) > SCHMIDT_TOL))


def is_hermitian(op: Operator, tol: Optional[float] = None) -> bool:
    tol = HERMITIAN_TOL if tol is None else tol
    m = op.matrix
    return float(np.linalg.norm(m - m.conj().T)) <= tol


def expectation(s: State, op: Operator) -> float:
    """``<s|op|s>`` for a Hermitian operator; raises if the result is not real."""
    if not is_hermitian(op):
        raise NonHermitian("operator differs from its adjoint by more than "
                           f"{HERMITIAN_TOL:g}")
    if isinstance(s, JonesVector):
        if op.matrix.shape != (2, 2):
            raise ValueError("single-beam states need a 2x2 operator")
        vec, m = s.components, op.matrix
    else:
        vec, m = s.amplitudes, op.full()
    value = np.vdot(vec, m @ vec)
    if abs(value.imag) > IMAG_TOL:
        raise ValueError(f"expectation has imaginary part {value.imag:.3g}")
    return float(value.real)


def phase_aligned(s: CompositeState, reference: CompositeState) -> np.ndarray:
    """Amplitudes of ``s`` times the global phase that matches ``reference``
    on the reference's largest-magnitude amplitude."""
    k = int(np.argmax(np.abs(reference.amplitudes)))
    z = s.amplitudes[k]
    if abs(z) == 0:
        return s.amplitudes.copy()
    phase = (reference.amplitudes[k] / abs(reference.amplitudes[k])) / (z / abs(z))
    return s.amplitudes * phase


def phase_distance(s1: CompositeState, s2: CompositeState) -> float:
    """Max amplitude deviation after removing the global phase."""
    return float(np.max(np.abs(phase_aligned(s1, s2) - s2.amplitudes)))


def equal_up_to_phase(s1: CompositeState, s2: CompositeState,
                      tol: Optional[float] = None) -> bool:
    tol = PHASE_EQ_TOL if tol is None else tol
    return phase_distance(s1, s2) < tol
