"""Matrix product states with open or periodic boundary, plus dense helpers.

A state on ``n`` qudits of local dimension ``d`` is stored as one rank-3
tensor per site with shape ``(d, D_left, D_right)``.  The amplitude of a basis
string is the (trace of the) product of the per-site matrices selected by the
string.  Open-boundary states have outer bond dimension 1; periodic states
close the ring with a trace.

Dense expansions use the big-endian convention: site 0 is the most significant
digit of the flat index.  Site indices are 0-based everywhere in this module.
"""
from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from . import linalg
from .errors import BadCut, DimensionMismatch, InvalidSpec, TooLarge

MPS_FORMAT_NAME = "mps-state"
MPS_FORMAT_VERSION = 1


@dataclasses.dataclass
class MatrixProductState:
    """Tensor-train representation of a pure multi-qudit state.

    Attributes
    ----------
    n : int
        Number of sites.
    d : int
        Local Hilbert space dimension, uniform across sites.
    boundary : str
        Either ``"open"`` or ``"periodic"``.
    tensors : list[np.ndarray]
        One tensor per site with shape ``(d, D_left, D_right)``.  Open
        boundary requires ``D_left = 1`` at site 0 and ``D_right = 1`` at the
        last site; periodic boundary requires the outer bonds to match so the
        ring closes.
    """

    n: int
    d: int
    boundary: str
    tensors: list[np.ndarray]

    def __post_init__(self) -> None:
        if self.boundary not in ("open", "periodic"):
            raise InvalidSpec(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        if self.n < 1 or self.d < 2:
            raise InvalidSpec(f"need n >= 1 and d >= 2, got n={self.n}, d={self.d}")
        if len(self.tensors) != self.n:
            raise DimensionMismatch(f"expected {self.n} site tensors, got {len(self.tensors)}")
        for k, t in enumerate(self.tensors):
            if t.ndim != 3 or t.shape[0] != self.d:
                raise DimensionMismatch(
                    f"site {k} tensor has shape {t.shape}, expected (d={self.d}, D_l, D_r)"
                )
            if k > 0 and t.shape[1] != self.tensors[k - 1].shape[2]:
                raise DimensionMismatch(
                    f"bond mismatch between sites {k - 1} and {k}: "
                    f"{self.tensors[k - 1].shape[2]} vs {t.shape[1]}"
                )
        first, last = self.tensors[0], self.tensors[-1]
        if self.boundary == "open":
            if first.shape[1] != 1 or last.shape[2] != 1:
                raise DimensionMismatch("open boundary requires outer bond dimension 1")
        elif first.shape[1] != last.shape[2]:
            raise DimensionMismatch("periodic boundary requires matching outer bonds")

    @property
    def bond_dimensions(self) -> tuple[int, ...]:
        """Right bond dimension after each site (the last closes the ring)."""
        return tuple(t.shape[2] for t in self.tensors)

    @property
    def max_bond_dimension(self) -> int:
        return max(self.bond_dimensions)

    def normalize(self) -> "MatrixProductState":
        """Scale the first tensor so the expanded vector has unit norm."""
        norm = float(np.linalg.norm(expand(self)))
        if norm == 0.0:
            raise InvalidSpec("cannot normalize the zero state")
        self.tensors[0] = self.tensors[0] / norm
        return self


@dataclasses.dataclass(frozen=True)
class StateSpec:
    """Recipe for generating a test state."""

    n: int
    d: int
    D: int
    boundary: str = "open"
    seed: int = 0
    kind: str = "random"

    def __post_init__(self) -> None:
        if self.n < 1 or self.d < 2 or self.D < 1:
            raise InvalidSpec(f"need n >= 1, d >= 2, D >= 1, got {self}")
        if self.boundary not in ("open", "periodic"):
            raise InvalidSpec(f"unknown boundary {self.boundary!r}")
        if self.kind not in ("random", "ghz", "product", "w-state"):
            raise InvalidSpec(f"unknown state kind {self.kind!r}")
        if self.kind == "ghz" and self.D != self.d:
            raise InvalidSpec(f"ghz needs D = d, got D={self.D}, d={self.d}")
        if self.kind == "w-state" and self.D != 2:
            raise InvalidSpec(f"w-state needs D = 2, got D={self.D}")
        if self.kind == "product" and self.D != 1:
            raise InvalidSpec(f"product needs D = 1, got D={self.D}")


def _open_bond_profile(n: int, d: int, D: int) -> list[int]:
    """Maximal open-boundary bond dimensions capped at D."""
    return [min(D, d**k, d ** (n - k)) for k in range(n + 1)]


def random_mps(spec: StateSpec) -> MatrixProductState:
    """Generate a normalized state from a :class:`StateSpec`.

    ``random`` draws iid complex Gaussian tensor entries at the maximal bond
    profile capped by ``D`` (open) or at uniform bond ``D`` (periodic), so the
    realized bond dimension is exactly ``min(D, maximal achievable)`` at every
    cut.  ``ghz``, ``w-state`` and ``product`` build the standard closed
    forms; ``product`` uses a seeded random unit vector on each site.
    """
    rng = np.random.default_rng(spec.seed)
    n, d, D = spec.n, spec.d, spec.D

    if spec.kind == "ghz":
        return _ghz_mps(n, d, spec.boundary)
    if spec.kind == "w-state":
        return _w_mps(n, d, spec.boundary)

    if spec.kind == "product":
        bonds = [1] * (n + 1)
    elif spec.boundary == "open":
        bonds = _open_bond_profile(n, d, D)
    else:
        bonds = [D] * (n + 1)

    tensors = []
    for k in range(n):
        shape = (d, bonds[k], bonds[k + 1])
        t = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        tensors.append(t)
    mps = MatrixProductState(n=n, d=d, boundary=spec.boundary, tensors=tensors)
    return mps.normalize()


def _ghz_mps(n: int, d: int, boundary: str) -> MatrixProductState:
    if n < 2:
        raise InvalidSpec("ghz needs n >= 2")
    diag = np.zeros((d, d, d), dtype=complex)
    for i in range(d):
        diag[i, i, i] = 1.0
    if boundary == "periodic":
        tensors = [diag.copy() for _ in range(n)]
    else:
        first = np.zeros((d, 1, d), dtype=complex)
        last = np.zeros((d, d, 1), dtype=complex)
        for i in range(d):
            first[i, 0, i] = 1.0
            last[i, i, 0] = 1.0
        tensors = [first] + [diag.copy() for _ in range(n - 2)] + [last]
    tensors[0] = tensors[0] / math.sqrt(d)
    return MatrixProductState(n=n, d=d, boundary=boundary, tensors=tensors)


def _w_mps(n: int, d: int, boundary: str) -> MatrixProductState:
    if n < 2:
        raise InvalidSpec("w-state needs n >= 2")
    # Two bond states: "no excitation yet" and "one excitation placed".
    a0 = np.eye(2, dtype=complex)
    a1 = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    mid = np.zeros((d, 2, 2), dtype=complex)
    mid[0], mid[1] = a0, a1
    first = np.zeros((d, 1, 2), dtype=complex)
    first[0, 0], first[1, 0] = a0[0], a1[0]
    last = np.zeros((d, 2, 1), dtype=complex)
    last[0, :, 0], last[1, :, 0] = a0[:, 1], a1[:, 1]
    if boundary == "periodic":
        # Close the ring through the boundary transfer |0><1|.
        hop = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
        closing = np.zeros((d, 2, 2), dtype=complex)
        closing[0] = a0 @ hop
        closing[1] = a1 @ hop
        tensors = [mid.copy() for _ in range(n - 1)] + [closing]
    else:
        tensors = [first] + [mid.copy() for _ in range(n - 2)] + [last]
    tensors[0] = tensors[0] / math.sqrt(n)
    return MatrixProductState(n=n, d=d, boundary=boundary, tensors=tensors)


def expand(mps: MatrixProductState) -> np.ndarray:
    """Contract the tensor train into a dense state vector of length d**n."""
    total = mps.d**mps.n
    if total > linalg.MAX_VECTOR_DIM:
        raise TooLarge(f"dense expansion of dimension {total} exceeds cap {linalg.MAX_VECTOR_DIM}")
    # Carry T[(i_1 .. i_k), a, b] = (A_1[i_1] ... A_k[i_k])[a, b].
    carry = np.asarray(mps.tensors[0], dtype=complex).copy()
    d0 = carry.shape[1]
    for a in mps.tensors[1:]:
        carry = np.einsum("xab,ibc->xiac", carry, a)
        carry = carry.reshape(carry.shape[0] * mps.d, d0, a.shape[2])
    if mps.boundary == "open":
        return carry[:, 0, 0].copy()
    return np.trace(carry, axis1=1, axis2=2).copy()


def block_rdm(state: np.ndarray, dims: Sequence[int], block: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of a site block.

    Parameters
    ----------
    state : np.ndarray
        Either a (possibly sub-normalized) state vector or a density matrix
        on the full register.
    dims : sequence of int
        Per-site dimensions.
    block : sequence of int
        0-based sites to keep, ascending in the output ordering.

    Returns
    -------
    np.ndarray
        Hermitian PSD matrix with the same trace as the input state.
    """
    dims = tuple(int(x) for x in dims)
    block = sorted(int(b) for b in block)
    n = len(dims)
    if not block or block[0] < 0 or block[-1] >= n:
        raise DimensionMismatch(f"block {block} outside register of {n} sites")
    state = np.asarray(state, dtype=complex)
    if state.ndim == 2:
        return linalg.partial_trace(state, dims, block)
    if state.ndim != 1 or state.shape[0] != math.prod(dims):
        raise DimensionMismatch(
            f"state has shape {state.shape}, expected ({math.prod(dims)},) or a square matrix"
        )
    tensor = state.reshape(dims)
    rest = [i for i in range(n) if i not in block]
    x = np.transpose(tensor, block + rest).reshape(
        math.prod(dims[b] for b in block), -1
    )
    rdm = x @ x.conj().T
    return (rdm + rdm.conj().T) / 2.0


def schmidt_rank(state, cut: int, tol: float = 1e-10, dims: Sequence[int] | None = None) -> int:
    """Rank of the reduced state across the cut ``(first cut sites | rest)``.

    ``state`` may be a :class:`MatrixProductState` or a dense vector (in which
    case ``dims`` is required).  ``cut`` counts sites on the left, so valid
    values are ``1 .. n-1``.  The rank is the number of squared singular
    values of the reshaped vector exceeding ``tol``, which equals the number
    of eigenvalues of the left block's reduced density matrix above ``tol``.
    """
    if isinstance(state, MatrixProductState):
        dims = (state.d,) * state.n
        vector = expand(state)
    else:
        if dims is None:
            raise DimensionMismatch("dims is required when passing a dense vector")
        dims = tuple(int(x) for x in dims)
        vector = np.asarray(state, dtype=complex).reshape(-1)
        if vector.shape[0] != math.prod(dims):
            raise DimensionMismatch(
                f"vector length {vector.shape[0]} does not match prod(dims) = {math.prod(dims)}"
            )
    n = len(dims)
    if not 1 <= cut <= n - 1:
        raise BadCut(f"cut must be in 1..{n - 1}, got {cut}")
    left = math.prod(dims[:cut])
    s = np.linalg.svd(vector.reshape(left, -1), compute_uv=False)
    return int(np.count_nonzero(s**2 > tol))


def mps_parameter_count(n: int, d: int, D: int, boundary: str = "open") -> int:
    """Number of stored tensor entries for a chain of these dimensions.

    Periodic boundary stores ``n * d * D**2`` entries.  Open boundary caps
    each bond at the maximal achievable rank, so short chains store fewer.
    """
    if n < 1 or d < 2 or D < 1:
        raise InvalidSpec(f"need n >= 1, d >= 2, D >= 1, got n={n}, d={d}, D={D}")
    if boundary == "periodic":
        return n * d * D * D
    if boundary != "open":
        raise InvalidSpec(f"unknown boundary {boundary!r}")
    bonds = _open_bond_profile(n, d, D)
    return sum(d * bonds[k] * bonds[k + 1] for k in range(n))


def _flatten_entries(arrays: Sequence[np.ndarray]) -> list[float]:
    out: list[float] = []
    for a in arrays:
        flat = np.asarray(a, dtype=complex).reshape(-1)
        for z in flat:
            out.append(float(z.real))
            out.append(float(z.imag))
    return out


def save_mps(mps: MatrixProductState, path: str | Path) -> None:
    """Write a versioned JSON description of the state.

    Floats are emitted with Python's shortest round-trip representation
    (at most 17 significant digits), so save/load is an exact round trip and
    repeated saves of the same state are byte-identical.
    """
    doc = {
        "format": MPS_FORMAT_NAME,
        "version": MPS_FORMAT_VERSION,
        "n": mps.n,
        "d": mps.d,
        "boundary": mps.boundary,
        "shapes": [list(t.shape) for t in mps.tensors],
        "entries": _flatten_entries(mps.tensors),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_mps(path: str | Path) -> MatrixProductState:
    """Load a state written by :func:`save_mps`."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MPS_FORMAT_NAME:
        raise InvalidSpec(f"not an MPS state file: format = {doc.get('format')!r}")
    if doc.get("version") != MPS_FORMAT_VERSION:
        raise InvalidSpec(f"unsupported MPS format version {doc.get('version')!r}")
    entries = doc["entries"]
    tensors = []
    pos = 0
    for shape in doc["shapes"]:
        count = int(np.prod(shape))
        chunk = np.asarray(entries[pos * 2 : (pos + count) * 2], dtype=float)
        # Assemble without arithmetic so signed zeros survive the round trip.
        tensor = np.empty(count, dtype=complex)
        tensor.real = chunk[0::2]
        tensor.imag = chunk[1::2]
        tensors.append(tensor.reshape(shape))
        pos += count
    if pos * 2 != len(entries):
        raise InvalidSpec("entry count does not match tensor shapes")
    return MatrixProductState(n=doc["n"], d=doc["d"], boundary=doc["boundary"], tensors=tensors)
