"""Circuits: ordered unitary components, auxiliary inputs and post-selection.

A device is an ordered chain of components acting on a truncated Fock basis,
together with an auxiliary input on the non-signal modes and a detection
specification on a subset of modes.  Evolution, prefix/suffix splitting,
post-selection and outcome classification are pure functions over immutable
circuit descriptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .fock import (
    FockBasis,
    PureState,
    apply_number_generator,
    apply_phase_rotation,
    apply_rotation_generator,
    apply_two_mode_rotation,
    enumerate_basis,
    register_only_basis,
)

__all__ = [
    "BEAM_SPLITTER",
    "PHASE_SHIFTER",
    "CUSTOM",
    "Component",
    "DetectionSpec",
    "SubspaceOutcome",
    "OutcomeTable",
    "Circuit",
    "HERALD",
    "FAILURE",
    "gate_outcome_table",
    "run",
    "postselect",
    "split",
    "classify_outcomes",
    "measurement_input_state",
    "embed_input",
    "evolve",
    "apply_component",
    "apply_component_generator",
]

BEAM_SPLITTER = "beam_splitter"
PHASE_SHIFTER = "phase_shifter"
CUSTOM = "custom"

HERALD = "herald"
FAILURE = "failure"

_ZERO_PROB = 1e-28


@dataclass(frozen=True)
class Component:
    """One unitary device element u = exp(-i theta H).

    kind selects the generator rule:
      * beam_splitter with two modes: the two-mode rotation generator;
        with four modes (pH, pV, qH, qV): the sum of the (pH,qH) and
        (pV,qV) generators, i.e. a polarisation-independent splitter
        driven by a single physical angle.
      * phase_shifter: photon number operator summed over ``modes``.
      * custom: an explicit Hermitian matrix over the circuit basis.

    ``theta_expr`` optionally records the closed-form origin of ``theta``
    for serialization; the float value is authoritative.
    """

    label: str
    kind: str
    modes: tuple[int, ...]
    theta: float
    generator: np.ndarray | None = None
    theta_expr: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        object.__setattr__(self, "theta", float(self.theta))
        if self.kind == BEAM_SPLITTER:
            if len(self.modes) not in (2, 4):
                raise ValueError(
                    f"component {self.label!r}: beam splitter needs 2 or 4 modes"
                )
        elif self.kind == PHASE_SHIFTER:
            if not self.modes:
                raise ValueError(f"component {self.label!r}: phase shifter needs modes")
        elif self.kind == CUSTOM:
            if self.generator is None:
                raise ValueError(
                    f"component {self.label!r}: custom kind requires a generator matrix"
                )
        else:
            raise ValueError(f"component {self.label!r}: unknown kind {self.kind!r}")
        if len(set(self.modes)) != len(self.modes):
            raise ValueError(f"component {self.label!r}: duplicate mode indices")

    def pairs(self) -> tuple[tuple[int, int], ...]:
        if self.kind != BEAM_SPLITTER:
            raise ValueError("pairs() is only defined for beam splitters")
        if len(self.modes) == 2:
            return (self.modes,)
        ph, pv, qh, qv = self.modes
        return ((ph, qh), (pv, qv))


def apply_component(
    state: PureState, comp: Component, theta: float | None = None
) -> PureState:
    """Apply exp(-i theta H) of the component; theta defaults to nominal."""
    th = comp.theta if theta is None else float(theta)
    if comp.kind == BEAM_SPLITTER:
        for pair in comp.pairs():
            state = apply_two_mode_rotation(state, pair, th)
        return state
    if comp.kind == PHASE_SHIFTER:
        return apply_phase_rotation(state, comp.modes, th)
    unitary = scipy.linalg.expm(-1j * th * comp.generator)
    return state.with_amplitudes((unitary @ state.table).reshape(-1))


def apply_component_generator(state: PureState, comp: Component) -> PureState:
    """Apply the Hermitian generator H of the component (unnormalized)."""
    if comp.kind == BEAM_SPLITTER:
        pairs = comp.pairs()
        out = apply_rotation_generator(state, pairs[0])
        if len(pairs) == 2:
            second = apply_rotation_generator(state, pairs[1])
            out = out.with_amplitudes(out.amplitudes + second.amplitudes)
        return out
    if comp.kind == PHASE_SHIFTER:
        return apply_number_generator(state, comp.modes)
    return state.with_amplitudes((comp.generator @ state.table).reshape(-1))


@dataclass(frozen=True)
class SubspaceOutcome:
    """Explicit detection outcome: a subspace of the detected-mode space.

    ``vectors`` lists orthonormal subspace vectors, each a mapping from a
    detected-mode occupation pattern to its amplitude.  An empty vector
    list is a degenerate outcome that never fires.
    """

    key: str
    vectors: tuple[Mapping[tuple[int, ...], complex], ...]


@dataclass(frozen=True)
class DetectionSpec:
    """Which modes are detected and how outcomes partition the results.

    With ``subspaces=None`` detection is photon-number resolving: one
    rank-one outcome per achievable occupation pattern of the detected
    modes.  Otherwise the declared subspaces (plus an automatic complement
    outcome ``"rest"``) partition the detected space.
    """

    detected_modes: tuple[int, ...]
    subspaces: tuple[SubspaceOutcome, ...] | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "detected_modes", tuple(int(m) for m in self.detected_modes)
        )
        if len(set(self.detected_modes)) != len(self.detected_modes):
            raise ValueError("duplicate detected modes")


class _BoundDetection:
    """Detection spec resolved against a concrete basis."""

    def __init__(self, basis: FockBasis, spec: DetectionSpec):
        self.basis = basis
        self.spec = spec
        for m in spec.detected_modes:
            basis._check_mode(m)
        det_occ = basis.occupations[:, spec.detected_modes]
        if spec.subspaces is None:
            patterns, pattern_ids = np.unique(det_occ, axis=0, return_inverse=True)
            self.pattern_ids = pattern_ids
            self.keys: list = [tuple(int(n) for n in row) for row in patterns]
            self.kind = "pnr"
            self._masks = {
                key: pattern_ids == i for i, key in enumerate(self.keys)
            }
            self._matrices = None
        else:
            self.kind = "subspace"
            self.pattern_ids = None
            det_patterns = [tuple(int(n) for n in row) for row in det_occ]
            self.keys = [s.key for s in spec.subspaces]
            if len(set(self.keys)) != len(self.keys):
                raise ValueError("duplicate subspace outcome keys")
            columns_by_key: dict[str, np.ndarray] = {}
            all_cols = []
            for sub in spec.subspaces:
                cols = []
                for vec in sub.vectors:
                    col = np.zeros(basis.size, dtype=np.complex128)
                    support = False
                    for i, pat in enumerate(det_patterns):
                        amp = vec.get(pat)
                        if amp:
                            col[i] = amp
                            support = True
                    if support:
                        cols.append(col)
                # group detected-pattern vectors by the undetected content:
                # a subspace vector |v> on the detected modes extends to
                # |v> tensor |u> for every undetected occupation u.
                columns_by_key[sub.key] = self._split_by_undetected(cols)
                all_cols.append(columns_by_key[sub.key])
            self._matrices = columns_by_key
            stacked = (
                np.concatenate([c for c in all_cols if c.size], axis=1)
                if any(c.size for c in all_cols)
                else np.zeros((basis.size, 0), dtype=np.complex128)
            )
            gram = stacked.conj().T @ stacked
            if stacked.shape[1] and not np.allclose(
                gram, np.eye(stacked.shape[1]), atol=1e-9
            ):
                raise ValueError("detection subspaces are not orthonormal")
            self._stacked = stacked
            self.keys.append("rest")

    def _split_by_undetected(self, det_cols) -> np.ndarray:
        basis = self.basis
        undetected = [
            m for m in range(basis.num_modes) if m not in self.spec.detected_modes
        ]
        if not det_cols:
            return np.zeros((basis.size, 0), dtype=np.complex128)
        if not undetected:
            return np.column_stack(det_cols)
        und_occ = basis.occupations[:, undetected]
        _, und_ids = np.unique(und_occ, axis=0, return_inverse=True)
        cols = []
        for col in det_cols:
            for u in range(und_ids.max() + 1):
                piece = np.where(und_ids == u, col, 0.0)
                n = np.linalg.norm(piece)
                if n > 1e-14:
                    cols.append(piece / n)
        return np.column_stack(cols)

    def outcome_keys(self) -> list:
        return list(self.keys)

    def project(self, table: np.ndarray, key) -> np.ndarray:
        """Apply the outcome projector (on the full basis, register kept)."""
        if self.kind == "pnr":
            mask = self._masks.get(key)
            if mask is None:
                raise KeyError(key)
            out = np.zeros_like(table)
            out[mask] = table[mask]
            return out
        if key == "rest":
            s = self._stacked
            return table - s @ (s.conj().T @ table)
        mat = self._matrices.get(key)
        if mat is None:
            raise KeyError(key)
        return mat @ (mat.conj().T @ table)

    def mask(self, key) -> np.ndarray:
        if self.kind != "pnr":
            raise ValueError("pattern masks exist only for PNR detection")
        m = self._masks.get(key)
        if m is None:
            raise KeyError(key)
        return m


@dataclass(frozen=True)
class OutcomeTable:
    """Classification of detection outcomes into herald labels and failures.

    ``entries`` maps an outcome key to ``(HERALD, label)`` or ``(FAILURE,)``.
    ``probabilities`` (if recorded) holds the outcome probabilities at
    nominal parameters; zero-probability outcomes are kept, never dropped.
    """

    entries: Mapping
    probabilities: Mapping | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))
        if self.probabilities is not None:
            object.__setattr__(self, "probabilities", dict(self.probabilities))

    def herald_keys(self) -> list:
        return [k for k, v in self.entries.items() if v[0] == HERALD]

    def failure_keys(self) -> list:
        return [k for k, v in self.entries.items() if v[0] == FAILURE]

    def label_of(self, key) -> str | None:
        entry = self.entries[key]
        return entry[1] if entry[0] == HERALD else None

    def herald_labels(self) -> list[str]:
        seen: list[str] = []
        for v in self.entries.values():
            if v[0] == HERALD and v[1] not in seen:
                seen.append(v[1])
        return seen


@dataclass(frozen=True)
class Circuit:
    """Ordered component chain with auxiliary input and detection.

    ``input_modes`` carry the signal state; the remaining modes carry the
    auxiliary state.  ``input_sectors`` declares the photon sectors the
    signal may occupy (the Haar-averaging subspace).  Measurement devices
    additionally carry the entangled ``measurement_input`` used for
    classification and sensitivity analysis.
    """

    basis: FockBasis
    components: tuple[Component, ...]
    input_modes: tuple[int, ...]
    input_sectors: tuple[int, ...]
    auxiliary: PureState | None
    detection: DetectionSpec
    outcomes: OutcomeTable | None = None
    measurement_input: PureState | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "input_modes", tuple(int(m) for m in self.input_modes))
        object.__setattr__(
            self, "input_sectors", tuple(sorted(int(s) for s in self.input_sectors))
        )
        if len(set(self.input_modes)) != len(self.input_modes):
            raise ValueError("duplicate input modes")
        for m in self.input_modes:
            self.basis._check_mode(m)
        labels = [c.label for c in self.components]
        if len(set(labels)) != len(labels):
            raise ValueError("component labels must be unique")
        for comp in self.components:
            for m in comp.modes:
                self.basis._check_mode(m)
            if comp.kind == CUSTOM:
                gen = np.asarray(comp.generator)
                if gen.shape != (self.basis.size, self.basis.size):
                    raise ValueError(
                        f"component {comp.label!r}: generator shape does not match basis"
                    )
                if not np.allclose(gen, gen.conj().T, atol=1e-12):
                    raise ValueError(f"component {comp.label!r}: generator not Hermitian")
        aux_modes = self.aux_modes
        if aux_modes:
            if self.auxiliary is None:
                raise ValueError("auxiliary state required for non-input modes")
            if self.auxiliary.basis.num_modes != len(aux_modes):
                raise ValueError("auxiliary state does not cover the auxiliary modes")
            if self.auxiliary.register_dim != 1:
                raise ValueError("auxiliary state cannot carry a register")
            if abs(self.auxiliary.norm() - 1.0) > 1e-10:
                raise ValueError("auxiliary state must be normalized")
        elif self.auxiliary is not None:
            raise ValueError("auxiliary state given but every mode is an input mode")
        # gate circuits must declare exactly one herald class
        if self.outcomes is not None and self.measurement_input is None:
            if len(self.outcomes.herald_labels()) != 1:
                raise ValueError("gate circuits need exactly one herald outcome class")

    @property
    def aux_modes(self) -> tuple[int, ...]:
        return tuple(
            m for m in range(self.basis.num_modes) if m not in self.input_modes
        )

    @property
    def is_measurement(self) -> bool:
        return self.measurement_input is not None

    def input_basis(self) -> FockBasis:
        return enumerate_basis(len(self.input_modes), self.input_sectors)

    def bound_detection(self) -> _BoundDetection:
        cached = getattr(self, "_bound_detection", None)
        if cached is None:
            cached = _BoundDetection(self.basis, self.detection)
            object.__setattr__(self, "_bound_detection", cached)
        return cached

    def component_index(self, label: str) -> int:
        for i, comp in enumerate(self.components):
            if comp.label == label:
                return i
        raise KeyError(f"no component labeled {label!r}")


def gate_outcome_table(
    circuit_or_detection, basis: FockBasis | None = None, herald=None, label="ok"
) -> OutcomeTable:
    """Outcome table for a gate: declared herald patterns, the rest failures."""
    if isinstance(circuit_or_detection, Circuit):
        bound = circuit_or_detection.bound_detection()
    else:
        bound = _BoundDetection(basis, circuit_or_detection)
    herald_keys = list(herald or [])
    herald_set = {tuple(k) if isinstance(k, (list, tuple)) else k for k in herald_keys}
    entries = {}
    known = set()
    for key in bound.outcome_keys():
        known.add(key)
        if key in herald_set:
            entries[key] = (HERALD, label)
        else:
            entries[key] = (FAILURE,)
    missing = herald_set - known
    if missing:
        raise ValueError(f"herald patterns {sorted(missing)} are not achievable outcomes")
    return OutcomeTable(entries)


def _embed_map(circuit: Circuit, input_basis: FockBasis):
    """(input idx, aux idx) -> full-basis index table; validates sectors."""
    basis = circuit.basis
    aux_modes = circuit.aux_modes
    aux_states = circuit.auxiliary.basis.states if aux_modes else ((),)
    table = np.empty((input_basis.size, len(aux_states)), dtype=np.int64)
    for i, occ_in in enumerate(input_basis.states):
        for a, occ_aux in enumerate(aux_states):
            full = [0] * basis.num_modes
            for mode, n in zip(circuit.input_modes, occ_in):
                full[mode] = n
            for mode, n in zip(aux_modes, occ_aux):
                full[mode] = n
            idx = basis.index.get(tuple(full))
            if idx is None:
                raise ValueError(
                    "sector mismatch between input and circuit basis: state "
                    f"{tuple(full)} (total {sum(full)}) is outside the declared sectors"
                )
            table[i, a] = idx
    return table, aux_states


def embed_input(circuit: Circuit, input_state: PureState) -> PureState:
    """Tensor the signal input with the auxiliary state on the full basis."""
    in_basis = input_state.basis
    if in_basis.num_modes != len(circuit.input_modes):
        raise ValueError("input state does not cover the circuit's input modes")
    table, _ = _embed_map(circuit, in_basis)
    d = input_state.register_dim
    out = np.zeros((circuit.basis.size, d), dtype=np.complex128)
    in_tab = input_state.table
    if circuit.aux_modes:
        aux = circuit.auxiliary.amplitudes
        for a in range(table.shape[1]):
            amp = aux[a]
            if amp != 0:
                out[table[:, a]] += amp * in_tab
    else:
        out[table[:, 0]] = in_tab
    return PureState(circuit.basis, d, out.reshape(-1))


def evolve(
    circuit: Circuit,
    state: PureState,
    start: int = 0,
    stop: int | None = None,
    inverse: bool = False,
    theta_overrides: Mapping[int, float] | None = None,
) -> PureState:
    """Apply components [start, stop) in order (reversed and inverted if asked)."""
    stop = len(circuit.components) if stop is None else stop
    indices = range(start, stop)
    if inverse:
        indices = reversed(indices)
    for j in indices:
        comp = circuit.components[j]
        theta = comp.theta
        if theta_overrides and j in theta_overrides:
            theta = theta_overrides[j]
        state = apply_component(state, comp, -theta if inverse else theta)
    return state


def run(circuit: Circuit, input_state: PureState) -> PureState:
    """Pre-detection output U |psi_in, A> on the full basis."""
    return evolve(circuit, embed_input(circuit, input_state))


@dataclass(frozen=True)
class SegmentEvaluator:
    """Product of a contiguous slice of circuit components."""

    circuit: Circuit
    start: int
    stop: int

    def apply(self, state: PureState) -> PureState:
        return evolve(self.circuit, state, self.start, self.stop)

    def apply_inverse(self, state: PureState) -> PureState:
        return evolve(self.circuit, state, self.start, self.stop, inverse=True)


def split(circuit: Circuit, j: int):
    """(V, u_j, W): components before j, the j-th component, components after."""
    n = len(circuit.components)
    if not 0 <= j < n:
        raise IndexError(f"component index {j} out of range [0, {n})")
    return (
        SegmentEvaluator(circuit, 0, j),
        circuit.components[j],
        SegmentEvaluator(circuit, j + 1, n),
    )


def _reduced_sectors(circuit: Circuit, pattern: tuple[int, ...]) -> list[int]:
    consumed = sum(pattern)
    return sorted(
        {s - consumed for s in circuit.basis.photon_sectors if s - consumed >= 0}
    )


def postselect(state: PureState, circuit: Circuit, outcome):
    """Condition a pre-detection state on one detection outcome.

    Returns ``(conditional_state, probability)``.  For photon-count
    outcomes the conditional state lives on the undetected modes (tensor
    the register); for subspace outcomes it stays on the full basis.  A
    zero-probability branch returns ``(None, 0.0)``.
    """
    if not state.basis.compatible(circuit.basis):
        raise ValueError("state does not live on the circuit basis")
    bound = circuit.bound_detection()
    if isinstance(outcome, list):
        outcome = tuple(outcome)
    if outcome not in set(bound.outcome_keys()):
        raise KeyError(f"undeclared outcome pattern {outcome!r}")
    table = state.table
    if bound.kind == "subspace":
        projected = bound.project(table, outcome)
        p = float(np.linalg.norm(projected) ** 2)
        if p <= _ZERO_PROB:
            return None, 0.0
        out = PureState(circuit.basis, state.register_dim, (projected / math.sqrt(p)).reshape(-1))
        return out, p
    mask = bound.mask(outcome)
    selected = table[mask]
    p = float(np.linalg.norm(selected) ** 2)
    if p <= _ZERO_PROB:
        return None, 0.0
    undetected = [
        m for m in range(circuit.basis.num_modes) if m not in circuit.detection.detected_modes
    ]
    if undetected:
        reduced = FockBasis(len(undetected), _reduced_sectors(circuit, outcome))
    else:
        reduced = register_only_basis()
    out = np.zeros((reduced.size, state.register_dim), dtype=np.complex128)
    surviving = np.nonzero(mask)[0]
    for row, full_idx in enumerate(surviving):
        occ = circuit.basis.states[full_idx]
        red_occ = tuple(occ[m] for m in undetected)
        out[reduced.index[red_occ]] = selected[row]
    out /= math.sqrt(p)
    return PureState(reduced, state.register_dim, out.reshape(-1)), p


def outcome_probabilities(circuit: Circuit, state: PureState) -> dict:
    """Probability of every declared detection outcome for a pre-detection state."""
    bound = circuit.bound_detection()
    table = state.table
    probs = {}
    if bound.kind == "pnr":
        weights = np.linalg.norm(table, axis=1) ** 2
        for key in bound.outcome_keys():
            probs[key] = float(weights[bound.mask(key)].sum())
    else:
        for key in bound.outcome_keys():
            probs[key] = float(np.linalg.norm(bound.project(table, key)) ** 2)
    return probs


def measurement_input_state(
    circuit: Circuit, reference_basis: Sequence[PureState]
) -> PureState:
    """Maximally entangled input sum_k |B_k>|k> / sqrt(d) over the reference basis."""
    d = len(reference_basis)
    if d < 2:
        raise ValueError("reference basis needs at least two states")
    in_basis = circuit.input_basis()
    for ref in reference_basis:
        if not ref.basis.compatible(in_basis):
            raise ValueError("reference states must live on the circuit input basis")
        if ref.register_dim != 1:
            raise ValueError("reference states cannot carry registers")
    gram = np.array(
        [
            [np.vdot(a.amplitudes, b.amplitudes) for b in reference_basis]
            for a in reference_basis
        ]
    )
    if not np.allclose(gram, np.eye(d), atol=1e-9):
        raise ValueError("reference states are not orthonormal")
    out = np.zeros((in_basis.size, d), dtype=np.complex128)
    for k, ref in enumerate(reference_basis):
        out[:, k] = ref.amplitudes / math.sqrt(d)
    return PureState(in_basis, d, out.reshape(-1))


def classify_outcomes(
    circuit: Circuit,
    reference_basis: Sequence[PureState],
    labels: Sequence[str] | None = None,
    fidelity_threshold: float = 1.0 - 1e-9,
) -> OutcomeTable:
    """Label detection outcomes by which reference state they collapse onto.

    The circuit is driven with the maximally entangled input over
    ``reference_basis``; for each outcome the register's reduced state is
    compared against the reference labels.  Outcomes that match a single
    reference with fidelity >= ``fidelity_threshold`` become heralds, all
    others (including zero-probability outcomes) are failures.
    """
    d = len(reference_basis)
    if labels is None:
        labels = [f"B{k}" for k in range(d)]
    if len(labels) != d:
        raise ValueError("one label per reference state required")
    entangled = measurement_input_state(circuit, reference_basis)
    out = run(circuit, entangled)
    bound = circuit.bound_detection()
    table = out.table
    entries = {}
    probabilities = {}
    for key in bound.outcome_keys():
        if bound.kind == "pnr":
            rows = table[bound.mask(key)]
        else:
            rows = bound.project(table, key)
        weights = np.abs(rows) ** 2
        p = float(weights.sum())
        probabilities[key] = p
        if p <= _ZERO_PROB:
            entries[key] = (FAILURE,)
            continue
        register_diag = weights.sum(axis=0) / p
        best = int(np.argmax(register_diag))
        if register_diag[best] >= fidelity_threshold:
            entries[key] = (HERALD, labels[best])
        else:
            entries[key] = (FAILURE,)
    return OutcomeTable(entries, probabilities)
