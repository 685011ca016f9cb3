"""Tree learner: recover a state-preparation circuit from block tomography.

The learner walks the halving schedule from :mod:`mpslearn.planner`.  At each
layer it estimates every acted block's marginal through a tomography oracle,
builds a disentangling unitary per block, applies the unitaries, projects the
shed qudits onto zero, and discards them.  After the last layer a final
tomography call on the surviving tail yields the residual state, and the
output circuit is the inverse of everything that was applied.

Two variants share the loop.  The ``exact`` variant assumes the input is a
bond-dimension-``D`` matrix product state and keeps the top ``D**2``
eigenvectors per block; its guarantee is fidelity at least ``1 - epsilon``
when oracle errors stay within the per-call budget.  The ``closest`` variant
makes no input assumption, keeps eigenvectors above a threshold, and competes
with the best fidelity achievable by any bond-dimension-``D`` state.

Registers whose chain is no longer than twice the block tail skip the tree
and estimate the whole register directly (the trivial path).
"""
from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from . import linalg, mps, tomography
from .backend import StateBackend, apply_unitary_density, apply_unitary_vector
from .disentangler import Disentangler, build_rank_capped, build_threshold
from .errors import (
    AuditDisabled,
    BadParameter,
    DegenerateD,
    MalformedCircuit,
    TooLarge,
)
from .planner import (
    LayerPlan,
    PlannedBlock,
    eta_closest,
    eta_exact,
    p_exact,
    plan_layers,
    select_epsilon,
    solve_p_closest,
)

CIRCUIT_FORMAT_NAME = "disentangling-circuit"
CIRCUIT_FORMAT_VERSION = 1


@dataclasses.dataclass(frozen=True)
class LearnSchedule:
    """Explicit schedule override for :func:`learn` (power users and tests)."""

    plan: LayerPlan
    eta: float


@dataclasses.dataclass(frozen=True)
class CircuitUnitary:
    """One block unitary of the learned circuit (support is 1-based)."""

    layer: int
    index: int
    support: tuple[int, ...]
    matrix: np.ndarray


@dataclasses.dataclass
class CircuitDescription:
    """Everything needed to rebuild the learned state.

    The learned state is ``U_1^дagger ... U_M^dagger (|0...0> (x) residual)``
    with the zeros on ``projected_by_layer`` sites and the residual on
    ``residual_sites``.  Site labels are 1-based to match the planner.
    """

    n: int
    d: int
    p: int
    plan: LayerPlan | None
    unitaries: list[CircuitUnitary]
    projected_by_layer: tuple[tuple[int, ...], ...]
    residual_sites: tuple[int, ...]
    residual: np.ndarray
    metadata: dict

    @property
    def num_layers(self) -> int:
        return self.plan.M if self.plan is not None else 0

    def layer_unitaries(self, layer: int) -> list[CircuitUnitary]:
        return [u for u in self.unitaries if u.layer == layer]


@dataclasses.dataclass(frozen=True)
class BlockStats:
    layer: int
    index: int
    support: tuple[int, ...]
    success_mass: float
    estimate_error: float
    copies_charged: int


@dataclasses.dataclass(frozen=True)
class LayerStats:
    layer: int
    success_mass: float
    drop_bound: float
    blocks: tuple[BlockStats, ...]


@dataclasses.dataclass
class LearnReport:
    """Run summary: accuracy, copy accounting, per-layer diagnostics."""

    variant: str
    n: int
    d: int
    D: int
    epsilon: float
    effective_epsilon: float
    delta: float
    p: int
    M: int
    eta: float
    tau: float
    seed: int
    oracle: str
    final_fidelity: float
    copies_used: int
    per_layer: list[LayerStats]
    deviations: list[str]
    theta: float | None = None
    audit: "AuditTrail | None" = None


class AuditTrail:
    """Stepwise snapshots of one learner run, for invariant checking.

    ``snapshots[j]`` is a backend copy after layer ``j`` (``j = 0`` is the
    input).  The trail can rebuild each stage as a sub-normalized operator on
    the full original register, evaluate overlaps against witness states, and
    bound how far each layer's projection can sink any witness's fidelity.
    """

    def __init__(
        self,
        n: int,
        d: int,
        snapshots: list[StateBackend],
        layer_supports: list[list[tuple[int, ...]]],
        layer_matrices: list[list[np.ndarray]],
        projected_by_layer: list[tuple[int, ...]],
    ):
        self.n = n
        self.d = d
        self.snapshots = snapshots
        self.layer_supports = layer_supports
        self.layer_matrices = layer_matrices
        self.projected_by_layer = projected_by_layer

    @property
    def M(self) -> int:
        return len(self.layer_supports)

    def _check_layer(self, j: int) -> None:
        if not 0 <= j <= self.M:
            raise BadParameter(f"layer must be in 0..{self.M}, got {j}")

    def success_mass(self, j: int) -> float:
        self._check_layer(j)
        return self.snapshots[j].success_mass()

    def _pad_vector(self, j: int) -> np.ndarray:
        """Sub-normalized vector w_j with the inverse prefix applied (pure runs)."""
        snap = self.snapshots[j]
        if not snap.pure:
            raise BadParameter("stepwise vectors exist only for pure-state runs")
        tensor = np.zeros((self.d,) * self.n, dtype=complex)
        index = [0] * self.n
        for s in snap.sites:
            index[s] = slice(None)
        tensor[tuple(index)] = snap.state.reshape((self.d,) * snap.n)
        vec = tensor.reshape(-1)
        for layer in range(j, 0, -1):
            for support, matrix in zip(
                self.layer_supports[layer - 1], self.layer_matrices[layer - 1]
            ):
                axes = [s - 1 for s in support]
                vec = apply_unitary_vector(vec, matrix.conj().T, axes, self.d)
        return vec

    def stepwise_vector(self, j: int) -> np.ndarray:
        self._check_layer(j)
        return self._pad_vector(j)

    def stepwise_state(self, j: int) -> np.ndarray:
        """Stage ``j`` as a sub-normalized operator on the full register."""
        self._check_layer(j)
        dim = self.d**self.n
        if dim > linalg.MAX_DENSITY_DIM:
            raise TooLarge(
                f"dense stage operator of dimension {dim} exceeds cap "
                f"{linalg.MAX_DENSITY_DIM}; use stepwise_vector for pure runs"
            )
        snap = self.snapshots[j]
        if snap.pure:
            w = self._pad_vector(j)
            return np.outer(w, w.conj())
        tensor = np.zeros((self.d,) * (2 * self.n), dtype=complex)
        index = [0] * self.n
        for s in snap.sites:
            index[s] = slice(None)
        tensor[tuple(index) * 2] = snap.state.reshape((self.d,) * (2 * snap.n))
        rho = tensor.reshape(dim, dim)
        for layer in range(j, 0, -1):
            for support, matrix in zip(
                self.layer_supports[layer - 1], self.layer_matrices[layer - 1]
            ):
                axes = [s - 1 for s in support]
                rho = apply_unitary_density(rho, matrix.conj().T, axes, self.d)
        return rho

    def _forward_witness(self, phi: np.ndarray, j: int) -> np.ndarray:
        """Witness pushed through layers 1..j and restricted to the kept sector."""
        vec = np.asarray(phi, dtype=complex).reshape(-1)
        if vec.size != self.d**self.n:
            raise BadParameter(f"witness has dimension {vec.size}, expected {self.d ** self.n}")
        dropped: list[int] = []
        for layer in range(1, j + 1):
            for support, matrix in zip(
                self.layer_supports[layer - 1], self.layer_matrices[layer - 1]
            ):
                remaining = [s for s in range(self.n) if s not in dropped]
                axes = [remaining.index(s - 1) for s in support]
                vec = apply_unitary_vector(vec, matrix, axes, self.d)
            remaining = [s for s in range(self.n) if s not in dropped]
            cut = [remaining.index(s - 1) for s in self.projected_by_layer[layer - 1]]
            tensor = vec.reshape((self.d,) * len(remaining))
            index = tuple(0 if i in cut else slice(None) for i in range(len(remaining)))
            vec = tensor[index].reshape(-1)
            dropped.extend(s - 1 for s in self.projected_by_layer[layer - 1])
        return vec

    def fidelity_against(self, phi: np.ndarray, j: int) -> float:
        """Overlap of stage ``j`` with a witness state, ``<phi| rho_j |phi>``."""
        self._check_layer(j)
        snap = self.snapshots[j]
        chi = self._forward_witness(phi, j)
        if snap.pure:
            return float(abs(np.vdot(snap.state, chi)) ** 2)
        return float(np.real(chi.conj() @ snap.state @ chi))

    def monotonicity_margin(self, j: int) -> float:
        """Smallest eigenvalue of ``rho_{j-1} - rho_j`` (non-negative in theory)."""
        if not 1 <= j <= self.M:
            raise BadParameter(f"layer must be in 1..{self.M}, got {j}")
        if self.snapshots[0].pure:
            u = self._pad_vector(j - 1)
            w = self._pad_vector(j)
            return _rank_two_min_eig(u, w)
        diff = self.stepwise_state(j - 1) - self.stepwise_state(j)
        return float(np.linalg.eigvalsh(diff)[0])


def _rank_two_min_eig(u: np.ndarray, w: np.ndarray) -> float:
    """Minimum eigenvalue of ``u u^dagger - w w^dagger`` via its 2-dim span."""
    basis: list[np.ndarray] = []
    for v in (u, w):
        r = v.copy()
        for b in basis:
            r = r - np.vdot(b, r) * b
        norm = np.linalg.norm(r)
        if norm > 1e-14:
            basis.append(r / norm)
    if not basis:
        return 0.0
    cu = np.array([np.vdot(b, u) for b in basis])
    cw = np.array([np.vdot(b, w) for b in basis])
    small = np.outer(cu, cu.conj()) - np.outer(cw, cw.conj())
    eigs = np.linalg.eigvalsh(small)
    return float(min(eigs[0], 0.0)) if eigs.size else 0.0


def _spawn_seed(base: Sequence[int], key: Sequence[int]) -> int:
    ss = np.random.SeedSequence(entropy=list(base), spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint32)[0])


def _child_mode(mode: tomography.OracleMode, eta_budget: float, base: Sequence[int], key: Sequence[int]):
    if isinstance(mode, tomography.ExactMode):
        return mode
    seed = _spawn_seed(base, key)
    if isinstance(mode, tomography.BoundedNoiseMode):
        eta = mode.eta if mode.eta is not None else eta_budget
        return tomography.BoundedNoiseMode(eta=eta, seed=seed, project_psd=mode.project_psd)
    if isinstance(mode, tomography.FiniteSampleMode):
        return tomography.FiniteSampleMode(copies=mode.copies, seed=seed)
    raise BadParameter(f"unknown oracle mode {mode!r}")


def _oracle_name(mode: tomography.OracleMode) -> str:
    return {
        tomography.ExactMode: "exact",
        tomography.BoundedNoiseMode: "bounded_noise",
        tomography.FiniteSampleMode: "finite_sample",
    }[type(mode)]


def _as_dense_input(state, d: int) -> np.ndarray:
    if isinstance(state, mps.MatrixProductState):
        if state.d != d:
            raise BadParameter(f"state has d={state.d}, learner called with d={d}")
        return mps.expand(state)
    arr = np.asarray(state, dtype=complex)
    if arr.ndim not in (1, 2):
        raise BadParameter(f"state must be a vector or density matrix, got ndim {arr.ndim}")
    return arr


def _fidelity(candidate: np.ndarray, reference: np.ndarray) -> float:
    if reference.ndim == 1:
        return float(abs(np.vdot(reference, candidate)) ** 2)
    return float(np.real(candidate.conj() @ reference @ candidate))


def _top_eigenvector(sigma: np.ndarray) -> np.ndarray:
    _, vectors = linalg.hermitian_eig(sigma)
    return vectors[:, 0].copy()


def learn(
    state,
    d: int,
    D: int,
    epsilon: float,
    delta: float,
    *,
    variant: str = "exact",
    mode: tomography.OracleMode | None = None,
    seed: int = 0,
    audit: bool = False,
    theta: float | None = None,
    schedule: LearnSchedule | None = None,
) -> tuple[CircuitDescription, LearnReport]:
    """Learn a disentangling circuit for ``state``.

    Parameters
    ----------
    state : MatrixProductState or np.ndarray
        The input state: an MPS, a unit vector, or a density matrix.
    d, D : int
        Local dimension and the bond-dimension parameter of the guarantee.
    epsilon, delta : float
        Target infidelity and failure probability, both in (0, 1).
    variant : str
        ``"exact"`` or ``"closest"``.
    mode : OracleMode
        Tomography oracle; defaults to :class:`~mpslearn.tomography.ExactMode`.
        A :class:`BoundedNoiseMode` with ``eta=None`` tracks the learner's own
        per-call budget.  Per-call seeds are derived from ``seed``, the mode
        seed, and the (layer, block) key, so results are order-independent.
    seed : int
        Base seed for all derived randomness.
    audit : bool
        Record stepwise snapshots on the report for invariant checking.
    theta : float, optional
        Promise parameter recorded in the metadata; it does not change the
        algorithm.
    schedule : LearnSchedule, optional
        Explicit plan and eta override.  The default schedule is derived from
        the variant's parameter solvers.

    Returns
    -------
    tuple[CircuitDescription, LearnReport]
    """
    if variant not in ("exact", "closest"):
        raise BadParameter(f"variant must be 'exact' or 'closest', got {variant!r}")
    if not 0.0 < epsilon <= 1.0:
        raise BadParameter(f"epsilon must be in (0, 1], got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise BadParameter(f"delta must be in (0, 1), got {delta}")
    if D < 1:
        raise BadParameter(f"D must be >= 1, got {D}")
    mode = tomography.ExactMode() if mode is None else mode

    dense = _as_dense_input(state, d)
    backend = StateBackend(dense, d)
    n = backend.n
    mass = backend.success_mass()
    if abs(mass - 1.0) > 1e-9:
        raise BadParameter(f"input state must be normalized, got mass {mass}")

    deviations: list[str] = []
    effective_epsilon = epsilon

    if schedule is not None:
        plan = schedule.plan
        if plan.n != n or plan.d != d:
            raise BadParameter("schedule plan does not match the input register")
        p = plan.p
        eta = schedule.eta
        deviations.append("custom-schedule: plan and eta supplied by caller")
    else:
        if variant == "exact":
            p = p_exact(d, D)
            if p == 0:
                p = 1
                deviations.append("p-clamped: D = 1 gives p = 0, using the minimum tail p = 1")
        else:
            solution = solve_p_closest(n, d, D, epsilon)
            if solution.exists:
                p = solution.p_candidate
            else:
                p, effective_epsilon = select_epsilon(n, d, D, epsilon)
                deviations.append(
                    f"epsilon-adjusted: {epsilon:g} -> {effective_epsilon:.12g} so the "
                    "block-size equation is solvable"
                )
        if n <= 2 * p:
            return _learn_trivial(
                backend, dense, d, D, effective_epsilon, epsilon, delta, p,
                variant, mode, seed, theta, deviations, audit,
            )
        plan = plan_layers(n, d, p)
        if variant == "exact":
            eta = eta_exact(effective_epsilon, plan.M)
        else:
            eta = eta_closest(effective_epsilon, p, D, n)

    # An oracle pinned to an explicit accuracy defines the per-block accuracy
    # of the whole run; the derived budget only applies when the oracle tracks
    # the learner (eta=None).
    if isinstance(mode, tomography.BoundedNoiseMode) and mode.eta is not None:
        eta = mode.eta

    if plan.s1_amended:
        deviations.append(
            "s1-amended: first-layer remainder divides evenly, last acted block "
            "widened to a full 2p block"
        )

    tau = effective_epsilon / 4.0
    mode_seed = getattr(mode, "seed", 0)
    seed_base = (seed, mode_seed)
    copies_used = 0
    per_layer: list[LayerStats] = []
    unitaries: list[CircuitUnitary] = []
    layer_supports: list[list[tuple[int, ...]]] = []
    layer_matrices: list[list[np.ndarray]] = []
    snapshots: list[StateBackend] = [backend.copy()] if audit else []

    for j in range(1, plan.M + 1):
        blocks = plan.blocks(j)
        built: list[tuple] = []
        stats: list[BlockStats] = []
        for block in blocks:
            if not block.acted:
                continue
            call_mode = _child_mode(mode, eta, seed_base, (j, block.index))
            positions = backend.positions([s - 1 for s in block.support])
            outcome = tomography.estimate_block(backend.state, backend.dims, positions, call_mode)
            sigma_true = mps.block_rdm(backend.state, backend.dims, positions)
            error = linalg.trace_norm(outcome.estimate - sigma_true)
            if variant == "exact":
                dz = build_rank_capped(outcome.estimate, d, D * D, p)
                charge = tomography.budget_rank_constrained(
                    outcome.success_mass, D, d, len(block.support), eta, delta / n
                )
            else:
                dz = build_threshold(outcome.estimate, d, eta)
                charge = tomography.budget_general(
                    outcome.success_mass, d, len(block.support), eta, delta / n
                )
            copies_used += charge
            built.append((block, dz))
            stats.append(
                BlockStats(
                    layer=j,
                    index=block.index,
                    support=block.support,
                    success_mass=outcome.success_mass,
                    estimate_error=error,
                    copies_charged=charge,
                )
            )
        for block, dz in built:
            backend.apply_unitary(dz.unitary, [s - 1 for s in block.support])
        for block in blocks:
            backend.project_zero_and_drop([s - 1 for s in block.projected])
        if variant == "exact":
            drop_bound = 2.0 * math.sqrt(2.0 * eta * 2 ** (plan.M - j))
        else:
            drop_bound = 2.0 * math.sqrt(2.0 * eta * D * D * 2 ** (plan.M - j))
        per_layer.append(
            LayerStats(
                layer=j,
                success_mass=backend.success_mass(),
                drop_bound=drop_bound,
                blocks=tuple(stats),
            )
        )
        unitaries.extend(
            CircuitUnitary(layer=j, index=b.index, support=b.support, matrix=dz.unitary.copy())
            for b, dz in built
        )
        layer_supports.append([b.support for b, _ in built])
        layer_matrices.append([dz.unitary.copy() for _, dz in built])
        if audit:
            snapshots.append(backend.copy())

    final_sites = plan.final_carried
    call_mode = _child_mode(mode, tau, seed_base, (plan.M + 1, 0))
    positions = backend.positions([s - 1 for s in final_sites])
    outcome = tomography.estimate_block(backend.state, backend.dims, positions, call_mode)
    if variant == "exact":
        copies_used += tomography.budget_rank_constrained(
            outcome.success_mass, D, d, p, tau, delta / n
        )
    else:
        copies_used += tomography.budget_general(outcome.success_mass, d, p, tau, delta / n)
    residual = _top_eigenvector(outcome.estimate)

    circuit = CircuitDescription(
        n=n,
        d=d,
        p=p,
        plan=plan,
        unitaries=unitaries,
        projected_by_layer=tuple(
            tuple(s for b in plan.blocks(j) for s in b.projected) for j in range(1, plan.M + 1)
        ),
        residual_sites=final_sites,
        residual=residual,
        metadata=_metadata(
            variant, epsilon, effective_epsilon, delta, eta, tau, seed, mode, theta,
            deviations, trivial=False,
        ),
    )
    report = LearnReport(
        variant=variant,
        n=n,
        d=d,
        D=D,
        epsilon=epsilon,
        effective_epsilon=effective_epsilon,
        delta=delta,
        p=p,
        M=plan.M,
        eta=eta,
        tau=tau,
        seed=seed,
        oracle=_oracle_name(mode),
        final_fidelity=_fidelity(reconstruct_state(circuit), dense),
        copies_used=copies_used,
        per_layer=per_layer,
        deviations=deviations,
        theta=theta,
        audit=AuditTrail(
            n, d, snapshots, layer_supports, layer_matrices,
            [tuple(s for b in plan.blocks(j) for s in b.projected) for j in range(1, plan.M + 1)],
        )
        if audit
        else None,
    )
    return circuit, report


def _learn_trivial(
    backend: StateBackend,
    dense: np.ndarray,
    d: int,
    D: int,
    effective_epsilon: float,
    epsilon: float,
    delta: float,
    p: int,
    variant: str,
    mode: tomography.OracleMode,
    seed: int,
    theta: float | None,
    deviations: list[str],
    audit: bool,
) -> tuple[CircuitDescription, LearnReport]:
    """Whole-register estimate for chains no longer than twice the tail."""
    n = backend.n
    tau = effective_epsilon / 4.0
    deviations = deviations + [
        f"trivial-path: n = {n} <= 2p = {2 * p}, estimating the whole register directly"
    ]
    seed_base = (seed, getattr(mode, "seed", 0))
    call_mode = _child_mode(mode, tau, seed_base, (1, 0))

    if backend.pure and isinstance(call_mode, tomography.ExactMode):
        residual = linalg.fix_phase(backend.state / np.linalg.norm(backend.state))
        mass = 1.0
    else:
        if d**n > linalg.MAX_DENSITY_DIM:
            raise TooLarge(
                f"trivial path with a non-exact oracle needs a dense operator of "
                f"dimension {d ** n} > {linalg.MAX_DENSITY_DIM}"
            )
        outcome = tomography.estimate_block(
            backend.state, backend.dims, list(range(n)), call_mode
        )
        residual = _top_eigenvector(outcome.estimate)
        mass = outcome.success_mass
    if variant == "exact":
        copies = tomography.budget_rank_constrained(mass, D, d, n, tau, delta / n)
    else:
        copies = tomography.budget_general(mass, d, n, tau, delta / n)

    circuit = CircuitDescription(
        n=n,
        d=d,
        p=p,
        plan=None,
        unitaries=[],
        projected_by_layer=(),
        residual_sites=tuple(range(1, n + 1)),
        residual=residual,
        metadata=_metadata(
            variant, epsilon, effective_epsilon, delta, tau, tau, seed, mode, theta,
            deviations, trivial=True,
        ),
    )
    report = LearnReport(
        variant=variant,
        n=n,
        d=d,
        D=D,
        epsilon=epsilon,
        effective_epsilon=effective_epsilon,
        delta=delta,
        p=p,
        M=0,
        eta=tau,
        tau=tau,
        seed=seed,
        oracle=_oracle_name(mode),
        final_fidelity=_fidelity(residual, dense),
        copies_used=copies,
        per_layer=[],
        deviations=deviations,
        theta=theta,
        audit=AuditTrail(n, d, [backend.copy()], [], [], []) if audit else None,
    )
    return circuit, report


def _metadata(
    variant: str,
    epsilon: float,
    effective_epsilon: float,
    delta: float,
    eta: float,
    tau: float,
    seed: int,
    mode: tomography.OracleMode,
    theta: float | None,
    deviations: list[str],
    trivial: bool,
) -> dict:
    params: dict = {}
    if isinstance(mode, tomography.BoundedNoiseMode):
        params = {"eta": mode.eta, "seed": mode.seed, "project_psd": mode.project_psd}
    elif isinstance(mode, tomography.FiniteSampleMode):
        params = {"copies": mode.copies, "seed": mode.seed}
    return {
        "variant": variant,
        "epsilon": epsilon,
        "effective_epsilon": effective_epsilon,
        "delta": delta,
        "eta": eta,
        "tau": tau,
        "seed": seed,
        "oracle": _oracle_name(mode),
        "oracle_params": params,
        "theta": theta,
        "deviations": list(deviations),
        "trivial_path": trivial,
    }


def reconstruct_state(circuit: CircuitDescription) -> np.ndarray:
    """Dense unit vector prepared by the learned circuit."""
    d, n = circuit.d, circuit.n
    if d**n > linalg.MAX_VECTOR_DIM:
        raise TooLarge(f"dense reconstruction of dimension {d ** n} exceeds the cap")
    tensor = np.zeros((d,) * n, dtype=complex)
    index = [0] * n
    for s in circuit.residual_sites:
        index[s - 1] = slice(None)
    tensor[tuple(index)] = circuit.residual.reshape((d,) * len(circuit.residual_sites))
    vec = tensor.reshape(-1)
    for layer in range(circuit.num_layers, 0, -1):
        for u in circuit.layer_unitaries(layer):
            axes = [s - 1 for s in u.support]
            vec = apply_unitary_vector(vec, u.matrix.conj().T, axes, d)
    return vec


def forward_transform(circuit: CircuitDescription, vector: np.ndarray) -> np.ndarray:
    """Apply the learned circuit in the forward (disentangling) direction."""
    vec = np.asarray(vector, dtype=complex).reshape(-1)
    if vec.size != circuit.d**circuit.n:
        raise BadParameter(
            f"vector has dimension {vec.size}, expected {circuit.d ** circuit.n}"
        )
    for layer in range(1, circuit.num_layers + 1):
        for u in circuit.layer_unitaries(layer):
            axes = [s - 1 for s in u.support]
            vec = apply_unitary_vector(vec, u.matrix, axes, circuit.d)
    return vec


def stepwise_state(report: LearnReport, j: int) -> np.ndarray:
    """Stage-``j`` operator from an audited run (see :class:`AuditTrail`)."""
    if report.audit is None:
        raise AuditDisabled("run learn(..., audit=True) to record stepwise states")
    return report.audit.stepwise_state(j)


def residual_projection(circuit: CircuitDescription, phi: np.ndarray, j: int) -> np.ndarray:
    """Witness ``phi`` pushed through ``j`` layers and restricted to the kept sector.

    The returned sub-normalized vector lives on the sites still in the
    register after layer ``j``, in ascending site order.  Its overlap with the
    backend state at stage ``j`` equals the witness's overlap with the
    stage-``j`` operator on the full register.
    """
    if not 0 <= j <= circuit.num_layers:
        raise BadParameter(f"layer must be in 0..{circuit.num_layers}, got {j}")
    d, n = circuit.d, circuit.n
    vec = np.asarray(phi, dtype=complex).reshape(-1)
    if vec.size != d**n:
        raise BadParameter(f"witness has dimension {vec.size}, expected {d ** n}")
    dropped: list[int] = []
    for layer in range(1, j + 1):
        remaining = [s for s in range(n) if s not in dropped]
        for u in circuit.layer_unitaries(layer):
            axes = [remaining.index(s - 1) for s in u.support]
            vec = apply_unitary_vector(vec, u.matrix, axes, d)
        cut = [remaining.index(s - 1) for s in circuit.projected_by_layer[layer - 1]]
        tensor = vec.reshape((d,) * len(remaining))
        index = tuple(0 if i in cut else slice(None) for i in range(len(remaining)))
        vec = tensor[index].reshape(-1)
        dropped.extend(s - 1 for s in circuit.projected_by_layer[layer - 1])
    return vec


def _tt_split(window: np.ndarray, d: int, count: int, cutoff: float = 1e-12) -> list[np.ndarray]:
    """Split ``(D_l, d**count, D_r)`` into site tensors by repeated SVD.

    Singular values below ``cutoff`` relative to the largest are numerical
    zeros and are pruned; no other truncation happens.
    """
    left, _, right = window.shape
    tensors: list[np.ndarray] = []
    carry = window.reshape(left, d**count * right)
    bond = left
    for k in range(count - 1):
        matrix = carry.reshape(bond * d, d ** (count - 1 - k) * right)
        u, s, vh = np.linalg.svd(matrix, full_matrices=False)
        keep = int(np.count_nonzero(s > cutoff * s[0])) if s.size and s[0] > 0 else 1
        keep = max(keep, 1)
        u, s, vh = u[:, :keep], s[:keep], vh[:keep]
        tensors.append(np.transpose(u.reshape(bond, d, keep), (1, 0, 2)))
        carry = s[:, None] * vh
        bond = keep
    tensors.append(np.transpose(carry.reshape(bond, d, right), (1, 0, 2)))
    return tensors


def extract_mps(circuit: CircuitDescription, cutoff: float = 1e-12) -> mps.MatrixProductState:
    """Contract the learned circuit into an open-boundary tensor train.

    Starts from the product of zeros and the residual, then applies each block
    unitary's inverse in reverse layer order by contracting the spanned window
    and re-splitting it with un-truncated SVDs (values below ``cutoff``
    relative to the largest are pruned as numerical zeros).
    """
    d, n = circuit.d, circuit.n
    zero = np.zeros((d, 1, 1), dtype=complex)
    zero[0, 0, 0] = 1.0
    tensors: list[np.ndarray] = [zero.copy() for _ in range(n)]

    sites = sorted(circuit.residual_sites)
    if sites != list(range(sites[0], sites[-1] + 1)):
        raise MalformedCircuit(f"residual sites must be contiguous, got {sites}")
    window = circuit.residual.reshape(1, -1, 1)
    for offset, tensor in enumerate(_tt_split(window, d, len(sites), cutoff)):
        tensors[sites[0] - 1 + offset] = tensor

    for layer in range(circuit.num_layers, 0, -1):
        for u in circuit.layer_unitaries(layer):
            lo, hi = u.support[0] - 1, u.support[-1] - 1
            width = hi - lo + 1
            # Contract the window into one tensor (D_l, d**width, D_r).
            carry = tensors[lo]
            block = carry.transpose(1, 0, 2)  # (D_l, d, D_r)
            left = block.shape[0]
            window = block.reshape(left, d, -1)
            for site in range(lo + 1, hi + 1):
                t = tensors[site]
                window = np.einsum("lxa,iab->lxib", window, t)
                window = window.reshape(left, -1, t.shape[2])
            if window.shape[1] * window.shape[0] * window.shape[2] > 2**24:
                raise TooLarge("window contraction exceeds the desk-scale cap")
            rel = [s - 1 - lo for s in u.support]
            y = len(u.support)
            op = u.matrix.conj().T.reshape((d,) * (2 * y))
            t3 = window.reshape((left,) + (d,) * width + (window.shape[2],))
            moved = np.tensordot(op, t3, axes=(list(range(y, 2 * y)), [1 + r for r in rel]))
            t3 = np.moveaxis(moved, list(range(y)), [1 + r for r in rel])
            window = t3.reshape(left, d**width, -1)
            for offset, tensor in enumerate(_tt_split(window, d, width, cutoff)):
                tensors[lo + offset] = tensor

    return mps.MatrixProductState(n=n, d=d, boundary="open", tensors=tensors)


def _flatten(array: np.ndarray) -> list[float]:
    out: list[float] = []
    for z in np.asarray(array, dtype=complex).reshape(-1):
        out.append(float(z.real))
        out.append(float(z.imag))
    return out


def _unflatten(entries: Sequence[float], shape: tuple[int, ...]) -> np.ndarray:
    chunk = np.asarray(entries, dtype=float)
    # Assemble without arithmetic so signed zeros survive the round trip.
    out = np.empty(chunk.size // 2, dtype=complex)
    out.real = chunk[0::2]
    out.imag = chunk[1::2]
    return out.reshape(shape)


def save_circuit(circuit: CircuitDescription, path: str | Path) -> None:
    """Write a versioned JSON description of the circuit.

    Floats use Python's shortest round-trip representation (at most 17
    significant digits), so save/load round-trips exactly and repeated saves
    are byte-identical.
    """
    plan = circuit.plan
    doc = {
        "format": CIRCUIT_FORMAT_NAME,
        "version": CIRCUIT_FORMAT_VERSION,
        "n": circuit.n,
        "d": circuit.d,
        "p": circuit.p,
        "plan": None
        if plan is None
        else {
            "M": plan.M,
            "ell1": plan.ell1,
            "s1": plan.s1,
            "k1": plan.k1,
            "s1_amended": plan.s1_amended,
            "layers": [
                [
                    {
                        "index": b.index,
                        "support": list(b.support),
                        "projected": list(b.projected),
                        "acted": b.acted,
                    }
                    for b in layer
                ]
                for layer in plan.layers
            ],
        },
        "unitaries": [
            {
                "layer": u.layer,
                "index": u.index,
                "support": list(u.support),
                "entries": _flatten(u.matrix),
            }
            for u in circuit.unitaries
        ],
        "projected_by_layer": [list(layer) for layer in circuit.projected_by_layer],
        "residual_sites": list(circuit.residual_sites),
        "residual": _flatten(circuit.residual),
        "metadata": circuit.metadata,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_circuit(path: str | Path) -> CircuitDescription:
    """Load and validate a circuit written by :func:`save_circuit`."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CIRCUIT_FORMAT_NAME:
        raise MalformedCircuit(f"not a circuit file: format = {doc.get('format')!r}")
    if doc.get("version") != CIRCUIT_FORMAT_VERSION:
        raise MalformedCircuit(f"unsupported circuit format version {doc.get('version')!r}")
    n, d, p = doc["n"], doc["d"], doc["p"]

    plan = None
    if doc["plan"] is not None:
        raw = doc["plan"]
        layers = []
        for layer_number, blocks in enumerate(raw["layers"], start=1):
            built = []
            for b in blocks:
                support = tuple(b["support"])
                projected = tuple(b["projected"])
                if projected != support[: len(projected)]:
                    raise MalformedCircuit("projected sites must be the leading block sites")
                built.append(
                    PlannedBlock(
                        layer=layer_number,
                        index=b["index"],
                        support=support,
                        projected=projected,
                        carried=support[len(projected) :],
                        acted=b["acted"],
                    )
                )
            layers.append(tuple(built))
        plan = LayerPlan(
            n=n, d=d, p=p, M=raw["M"], ell1=raw["ell1"], s1=raw["s1"], k1=raw["k1"],
            s1_amended=raw["s1_amended"], layers=tuple(layers),
        )

    unitaries = []
    for u in doc["unitaries"]:
        support = tuple(u["support"])
        dim = d ** len(support)
        matrix = _unflatten(u["entries"], (dim, dim))
        defect = float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(dim))))
        if defect > 1e-8:
            raise MalformedCircuit(f"stored block unitary deviates from unitarity by {defect:.3e}")
        unitaries.append(
            CircuitUnitary(layer=u["layer"], index=u["index"], support=support, matrix=matrix)
        )

    residual_sites = tuple(doc["residual_sites"])
    residual = _unflatten(doc["residual"], (d ** len(residual_sites),))
    return CircuitDescription(
        n=n,
        d=d,
        p=p,
        plan=plan,
        unitaries=unitaries,
        projected_by_layer=tuple(tuple(layer) for layer in doc["projected_by_layer"]),
        residual_sites=residual_sites,
        residual=residual,
        metadata=doc["metadata"],
    )
