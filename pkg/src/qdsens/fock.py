"""Truncated multimode Fock bases and bosonic state-vector primitives.

Everything downstream works in the occupation-number representation over an
explicit, finite set of total-photon-number sectors.  States may carry a
finite auxiliary register (used to tag the reference outcomes of measurement
devices); amplitudes are stored basis-major, register-minor.

The two-mode rotation implemented here mixes a pair of mode operators as

    b1 =  cos(theta) a1 + sin(theta) a2
    b2 = -sin(theta) a1 + cos(theta) a2

and is generated by the Hermitian operator H = i(a1^dag a2 - a2^dag a1),
so that the rotation equals exp(-i theta H).  Rotations conserve photon
number, so they act block-wise inside each two-mode occupation block; the
blocks are obtained by dense exponentiation of the block generator and
cached, which is exact and cheap at the dimensions we care about.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "FockBasis",
    "PureState",
    "enumerate_basis",
    "fock_state",
    "superposition",
    "inner_product",
    "apply_two_mode_rotation",
    "apply_rotation_generator",
    "apply_phase_rotation",
    "apply_number_generator",
]


def _compositions(total: int, num_modes: int) -> Iterator[tuple[int, ...]]:
    """Occupation vectors of ``num_modes`` modes summing to ``total``.

    Emitted in descending lexicographic order, e.g. (2,0), (1,1), (0,2).
    """
    if num_modes == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, num_modes - 1):
            yield (first,) + rest


class FockBasis:
    """Ordered occupation-number basis over fixed total-photon sectors.

    States are grouped by ascending photon sector and ordered descending
    lexicographically inside each sector.  ``index`` maps an occupation
    tuple back to its position.  Instances are immutable after construction
    and safe to share between threads.
    """

    def __init__(self, num_modes: int, photon_sectors: Iterable[int]):
        sectors = tuple(sorted({int(n) for n in photon_sectors}))
        if num_modes < 0:
            raise ValueError("number of modes must be non-negative")
        if num_modes == 0 and sectors != (0,):
            raise ValueError("a zero-mode basis only supports the vacuum sector")
        if not sectors:
            raise ValueError("photon_sectors must be non-empty")
        if any(n < 0 for n in sectors):
            raise ValueError("photon numbers must be non-negative")
        self.num_modes = int(num_modes)
        self.photon_sectors = sectors
        if num_modes == 0:
            states: list[tuple[int, ...]] = [()]
        else:
            states = []
            for n in sectors:
                states.extend(_compositions(n, self.num_modes))
        self.states: tuple[tuple[int, ...], ...] = tuple(states)
        self.index: dict[tuple[int, ...], int] = {
            occ: i for i, occ in enumerate(self.states)
        }
        self.occupations = np.array(self.states, dtype=np.int64).reshape(
            len(self.states), self.num_modes
        )
        self.occupations.setflags(write=False)
        self.totals = self.occupations.sum(axis=1)
        self.totals.setflags(write=False)
        self._pair_groups_cache: dict[tuple[int, int], list[tuple[np.ndarray, int]]] = {}

    @property
    def size(self) -> int:
        return len(self.states)

    def compatible(self, other: "FockBasis") -> bool:
        return (
            self.num_modes == other.num_modes
            and self.photon_sectors == other.photon_sectors
        )

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return (
            f"FockBasis(num_modes={self.num_modes}, "
            f"photon_sectors={self.photon_sectors}, size={self.size})"
        )

    def _check_mode(self, mode: int) -> None:
        if not 0 <= mode < self.num_modes:
            raise ValueError(f"mode index {mode} out of range [0, {self.num_modes})")

    def pair_groups(self, pair: tuple[int, int]) -> list[tuple[np.ndarray, int]]:
        """Index groups on which a two-mode operation acts block-wise.

        For the ordered pair (p, q) each group collects the basis positions
        of states sharing the occupation of every other mode; inside a group
        the total t = n_p + n_q is constant and the returned indices are
        sorted by n_p = 0..t.
        """
        p, q = pair
        self._check_mode(p)
        self._check_mode(q)
        if p == q:
            raise ValueError("two-mode operation needs two distinct modes")
        key = (p, q)
        cached = self._pair_groups_cache.get(key)
        if cached is not None:
            return cached
        occ = self.occupations
        n_p = occ[:, p]
        t = n_p + occ[:, q]
        env = occ.copy()
        env[:, p] = 0
        env[:, q] = 0
        group_rows = np.column_stack([env, t])
        _, group_ids = np.unique(group_rows, axis=0, return_inverse=True)
        order = np.lexsort((n_p, group_ids))
        groups: list[tuple[np.ndarray, int]] = []
        start = 0
        sorted_ids = group_ids[order]
        for stop in range(1, len(order) + 1):
            if stop == len(order) or sorted_ids[stop] != sorted_ids[start]:
                idx = order[start:stop]
                block_t = int(t[idx[0]])
                if len(idx) != block_t + 1:
                    raise AssertionError("incomplete two-mode block in sector basis")
                groups.append((idx, block_t))
                start = stop
        self._pair_groups_cache[key] = groups
        return groups


def enumerate_basis(num_modes: int, photon_sectors: Iterable[int]) -> FockBasis:
    """Build the truncated Fock basis for the given modes and sectors."""
    if num_modes < 1:
        raise ValueError("num_modes must be at least 1")
    sectors = set(photon_sectors)
    if not sectors:
        raise ValueError("photon_sectors must be non-empty")
    return FockBasis(num_modes, sectors)


def register_only_basis() -> FockBasis:
    """Zero-mode vacuum basis used when every optical mode was detected."""
    return FockBasis(0, (0,))


@dataclass(frozen=True)
class PureState:
    """Complex state vector over a FockBasis, optionally with a register.

    ``amplitudes`` has length ``basis.size * register_dim`` and is ordered
    basis-major, register-minor.  Instances are immutable; all operations
    return new states.
    """

    basis: FockBasis
    register_dim: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.register_dim < 1:
            raise ValueError("register_dim must be at least 1")
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        expected = self.basis.size * self.register_dim
        if amps.shape[0] != expected:
            raise ValueError(
                f"amplitude vector has length {amps.shape[0]}, expected {expected}"
            )
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def table(self) -> np.ndarray:
        """Read-only (basis.size, register_dim) view of the amplitudes."""
        return self.amplitudes.reshape(self.basis.size, self.register_dim)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PureState":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return PureState(self.basis, self.register_dim, self.amplitudes / n)

    def with_amplitudes(self, amplitudes: np.ndarray) -> "PureState":
        return PureState(self.basis, self.register_dim, amplitudes)


def fock_state(
    basis: FockBasis,
    occupation: Sequence[int],
    register_dim: int = 1,
    register_index: int = 0,
) -> PureState:
    """Unit basis state |occupation> (times |register_index> if d > 1)."""
    occ = tuple(int(n) for n in occupation)
    if occ not in basis.index:
        raise ValueError(f"occupation {occ} not contained in the basis")
    amps = np.zeros(basis.size * register_dim, dtype=np.complex128)
    amps[basis.index[occ] * register_dim + register_index] = 1.0
    return PureState(basis, register_dim, amps)


def superposition(
    basis: FockBasis, terms: Mapping[Sequence[int], complex], register_dim: int = 1
) -> PureState:
    """State with the given occupation -> amplitude table (register index 0)."""
    amps = np.zeros(basis.size * register_dim, dtype=np.complex128)
    for occupation, amplitude in terms.items():
        occ = tuple(int(n) for n in occupation)
        if occ not in basis.index:
            raise ValueError(f"occupation {occ} not contained in the basis")
        amps[basis.index[occ] * register_dim] = amplitude
    return PureState(basis, register_dim, amps)


def inner_product(a: PureState, b: PureState) -> complex:
    """<a|b> with conjugation on the first argument."""
    if not a.basis.compatible(b.basis) or a.register_dim != b.register_dim:
        raise ValueError("inner product requires matching bases and registers")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


@functools.lru_cache(maxsize=None)
def _pair_generator_block(t: int) -> np.ndarray:
    """Two-mode rotation generator on the block n_p + n_q = t.

    Matrix of H = i(a_p^dag a_q - a_q^dag a_p) in the basis r = n_p = 0..t.
    """
    h = np.zeros((t + 1, t + 1), dtype=np.complex128)
    for r in range(t):
        # <r+1| H |r> for H = i a_p^dag a_q - i a_q^dag a_p
        h[r + 1, r] = 1j * math.sqrt((r + 1) * (t - r))
        h[r, r + 1] = -1j * math.sqrt((r + 1) * (t - r))
    h.setflags(write=False)
    return h


@functools.lru_cache(maxsize=None)
def _pair_rotation_block(t: int, theta: float) -> np.ndarray:
    u = scipy.linalg.expm(-1j * theta * _pair_generator_block(t))
    u.setflags(write=False)
    return u


def _apply_pair_blocks(state: PureState, pair: tuple[int, int], blocks) -> PureState:
    table = state.table.copy()
    for idx, t in state.basis.pair_groups(pair):
        table[idx] = blocks(t) @ table[idx]
    return state.with_amplitudes(table.reshape(-1))


def apply_two_mode_rotation(
    state: PureState, pair: tuple[int, int], theta: float
) -> PureState:
    """Evolve the state under exp(-i theta H) on the given mode pair."""
    theta = float(theta)
    return _apply_pair_blocks(state, pair, lambda t: _pair_rotation_block(t, theta))


def apply_rotation_generator(state: PureState, pair: tuple[int, int]) -> PureState:
    """Apply the Hermitian rotation generator H to the state (unnormalized)."""
    return _apply_pair_blocks(state, pair, _pair_generator_block)


def _occupation_weights(basis: FockBasis, modes: Sequence[int]) -> np.ndarray:
    for m in modes:
        basis._check_mode(m)
    if len(set(modes)) != len(tuple(modes)):
        raise ValueError("duplicate mode indices")
    return basis.occupations[:, tuple(modes)].sum(axis=1)


def apply_phase_rotation(
    state: PureState, modes: Sequence[int], theta: float
) -> PureState:
    """Evolve under exp(-i theta N) with N the photon number on ``modes``."""
    n = _occupation_weights(state.basis, modes)
    phases = np.exp(-1j * float(theta) * n)
    table = state.table * phases[:, None]
    return state.with_amplitudes(table.reshape(-1))


def apply_number_generator(state: PureState, modes: Sequence[int]) -> PureState:
    """Apply the photon-number generator N of a phase shifter on ``modes``."""
    n = _occupation_weights(state.basis, modes)
    table = state.table * n[:, None].astype(np.complex128)
    return state.with_amplitudes(table.reshape(-1))
