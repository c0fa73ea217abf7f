"""Multi-time correlation functions from PT-MPO contraction.

A schedule lists dipole-style interventions at time-step boundaries; the last
entry is the trailing operator, whose application point is swept over all
remaining steps in a single pass so a whole final-time series costs one
contraction.  Interventions at a shared step compose in list order (the
operator product read right-to-left).  Each intervention is applied at the
full-step boundary, i.e. after the second half-step propagator of its step
and before the first half-step of the next one; step-0 interventions precede
all propagation.
"""

import warnings
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from .bath import DiscreteBath
from .errors import ScheduleError, ValidationError
from .process_tensor import ProcessTensorMPO
from .system import (
    DIM,
    SystemModel,
    SuperOperator,
    half_step_propagator,
    left_super,
    right_super,
    trace_vector,
    vectorize,
)

__all__ = [
    "InterventionEntry",
    "InterventionSchedule",
    "CorrelationSeries",
    "SweepResult",
    "evolve_with_pt",
    "sweep_intervention",
    "exact_few_mode_oracle",
]


@dataclass(frozen=True)
class InterventionEntry:
    """One operator insertion: ``V rho`` (side 'L') or ``rho V`` (side 'R')."""

    step: int
    operator: np.ndarray
    side: str

    def __post_init__(self):
        op = np.asarray(self.operator, dtype=complex)
        if op.shape != (DIM, DIM):
            raise ScheduleError(f"intervention operator must be 3x3, got {op.shape}")
        if self.side not in ("L", "R"):
            raise ScheduleError(f"side must be 'L' or 'R', got {self.side!r}")
        if self.step < 0:
            raise ScheduleError(f"step index must be >= 0, got {self.step}")
        object.__setattr__(self, "operator", op)

    @property
    def superoperator(self) -> SuperOperator:
        return left_super(self.operator) if self.side == "L" else right_super(self.operator)

    def at_step(self, step: int) -> "InterventionEntry":
        return InterventionEntry(step=step, operator=self.operator, side=self.side)


@dataclass(frozen=True)
class InterventionSchedule:
    """Time-ordered interventions plus the initial system state.

    The last entry is the trailing operator: correlation values are produced
    for every placement of it from its declared step to the end of the grid.
    """

    entries: Tuple[InterventionEntry, ...]
    initial_state: np.ndarray

    def __post_init__(self):
        entries = tuple(self.entries)
        steps = [e.step for e in entries]
        if any(b < a for a, b in zip(steps, steps[1:])):
            raise ScheduleError(f"step indices must be non-decreasing, got {steps}")
        rho = np.asarray(self.initial_state, dtype=complex)
        if rho.shape != (DIM, DIM):
            raise ScheduleError(f"initial state must be 3x3, got {rho.shape}")
        if not np.allclose(rho, rho.conj().T, atol=1e-10):
            raise ScheduleError("initial state must be Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-10:
            raise ScheduleError(f"initial state must have trace 1, got {np.trace(rho)}")
        if scipy.linalg.eigvalsh(rho).min() < -1e-10:
            raise ScheduleError("initial state must be positive semidefinite")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "initial_state", rho)

    @property
    def fixed_entries(self) -> Tuple[InterventionEntry, ...]:
        return self.entries[:-1] if self.entries else ()

    @property
    def trailing_entry(self):
        return self.entries[-1] if self.entries else None

    def with_entry_steps(self, indices: Iterable[int], step: int) -> "InterventionSchedule":
        entries = list(self.entries)
        for i in indices:
            entries[i] = entries[i].at_step(step)
        return InterventionSchedule(entries=tuple(entries), initial_state=self.initial_state)


@dataclass(frozen=True)
class CorrelationSeries:
    """Correlation values over the swept final-time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValidationError("times and values must have equal length")


@dataclass(frozen=True)
class SweepResult:
    """Grid of correlations: rows = moved-entry step, columns = final step.

    Entries before a row's first valid final time are NaN.
    """

    entry_steps: np.ndarray
    final_steps: np.ndarray
    values: np.ndarray  # (len(entry_steps), len(final_steps))
    dt: float


def _grouped_superops(entries: Sequence[InterventionEntry]):
    grouped = {}
    for e in entries:
        grouped.setdefault(e.step, []).append(e.superoperator.matrix)
    return grouped


def evolve_with_pt(
    pt: ProcessTensorMPO,
    s: SystemModel,
    sched: InterventionSchedule,
    dt: float = None,
) -> CorrelationSeries:
    """Contract the PT with propagators and interventions in one pass.

    Returns the correlation value at every step from the trailing entry's
    declared step to ``pt.n_steps``; the value at step M applies the trailing
    operator at M and traces.  With an empty schedule the series is the bare
    trace (constant 1 for trace-preserving dynamics).
    """
    if dt is not None and abs(dt - pt.dt) > 1e-15:
        raise ScheduleError(f"dt mismatch: schedule {dt} vs process tensor {pt.dt}")
    trailing = sched.trailing_entry
    start = trailing.step if trailing is not None else 0
    if start > pt.n_steps:
        raise ScheduleError(
            f"trailing step {start} beyond process tensor length {pt.n_steps}"
        )
    for e in sched.fixed_entries:
        if e.step > pt.n_steps:
            raise ScheduleError(f"entry step {e.step} beyond PT length {pt.n_steps}")
    k_half = half_step_propagator(s, pt.dt).matrix
    trail_matrix = trailing.superoperator.matrix if trailing is not None else None
    fixed = _grouped_superops(sched.fixed_entries)
    caps = pt.caps

    v = vectorize(sched.initial_state)[None, :].copy()
    values = []

    def readout(boundary):
        w = v @ trail_matrix.T if trail_matrix is not None else v
        values.append(np.sum(w * caps[boundary]))

    for op in fixed.get(0, ()):
        v = v @ op.T
    if start == 0:
        readout(0)
    for m in range(pt.n_steps):
        v = v @ k_half.T
        v = np.einsum("bj,bjc->cj", v, pt.cores[m])
        v = v @ k_half.T
        boundary = m + 1
        for op in fixed.get(boundary, ()):
            v = v @ op.T
        if boundary >= start:
            readout(boundary)
    times = pt.dt * np.arange(start, pt.n_steps + 1)
    return CorrelationSeries(times=times, values=np.asarray(values))


def sweep_intervention(
    pt: ProcessTensorMPO,
    s: SystemModel,
    sched: InterventionSchedule,
    which_entry: Union[int, Iterable[int]],
    step_range: Sequence[int],
) -> SweepResult:
    """Repeat the contraction, moving the chosen entry (or entries) across steps.

    Row i holds the series of ``evolve_with_pt`` with the selected entries
    placed at ``step_range[i]``; columns are absolute final steps, NaN before
    a row's trailing start.
    """
    indices = [which_entry] if isinstance(which_entry, int) else list(which_entry)
    n_entries = len(sched.entries)
    for i in indices:
        if not 0 <= i < n_entries:
            raise ScheduleError(f"entry index {i} out of range for {n_entries} entries")
    final_steps = np.arange(pt.n_steps + 1)
    out = np.full((len(step_range), pt.n_steps + 1), np.nan, dtype=complex)
    for row, step in enumerate(step_range):
        moved = sched.with_entry_steps(indices, int(step))
        series = evolve_with_pt(pt, s, moved)
        start = moved.trailing_entry.step if moved.trailing_entry else 0
        out[row, start:] = series.values
    return SweepResult(
        entry_steps=np.asarray(list(step_range)),
        final_steps=final_steps,
        values=out,
        dt=pt.dt,
    )


def _thermal_fock(omega: float, temperature: float, fock_cut: int) -> np.ndarray:
    n = np.arange(fock_cut)
    weights = np.exp(-omega * n / temperature)
    return np.diag(weights / weights.sum()).astype(complex)


def exact_few_mode_oracle(
    s: SystemModel,
    modes: Union[DiscreteBath, Sequence[Tuple[float, float]]],
    fock_cut: int,
    sched: InterventionSchedule,
    dt: float,
    n_steps: int,
    temperature: float = None,
) -> CorrelationSeries:
    """Brute-force system (x) modes evolution with exact interventions.

    The total Hamiltonian is diagonalized once and the density matrix stepped
    through unitary sandwiches; interventions and the trailing readout follow
    the same boundary conventions as :func:`evolve_with_pt`.  Intended for
    desk scale (<= 4 modes, Fock cutoff <= 8).
    """
    if isinstance(modes, DiscreteBath):
        temperature = modes.temperature
        mode_list = list(zip(modes.frequencies, modes.couplings))
    else:
        mode_list = list(modes)
        if mode_list and temperature is None:
            raise ValidationError("temperature required with an explicit mode list")
    if len(mode_list) > 4 or fock_cut > 8:
        raise ValidationError("oracle is desk-scale only: <= 4 modes, fock_cut <= 8")

    dim_b = fock_cut ** len(mode_list)
    dim = DIM * dim_b
    lower = np.diag(np.sqrt(np.arange(1, fock_cut)), k=1)
    number = np.diag(np.arange(fock_cut)).astype(float)

    h = np.kron(s.hamiltonian, np.eye(dim_b)).astype(complex)
    coupling = np.kron(s.coupling_operator, np.eye(dim_b)).astype(complex)
    rho_bath = np.eye(1, dtype=complex)
    for i, (omega, g) in enumerate(mode_list):
        ops_before = fock_cut ** i
        ops_after = fock_cut ** (len(mode_list) - i - 1)
        embed = lambda op: np.kron(np.kron(np.eye(ops_before), op), np.eye(ops_after))
        h += np.kron(np.eye(DIM), omega * embed(number))
        x = g * embed(lower) + np.conj(g) * embed(lower).conj().T
        h += coupling @ np.kron(np.eye(DIM), x)
        rho_bath = np.kron(rho_bath, _thermal_fock(omega, temperature, fock_cut))

    energies, basis = scipy.linalg.eigh(h)
    u_dt = (basis * np.exp(-1j * energies * dt)) @ basis.conj().T
    u_dag = u_dt.conj().T

    rho = np.kron(np.asarray(sched.initial_state, dtype=complex), rho_bath)

    def lift(entry: InterventionEntry):
        op = np.kron(entry.operator, np.eye(dim_b))
        return (lambda r: op @ r) if entry.side == "L" else (lambda r: r @ op)

    trailing = sched.trailing_entry
    start = trailing.step if trailing is not None else 0
    if start > n_steps:
        raise ScheduleError(f"trailing step {start} beyond grid length {n_steps}")
    fixed = {}
    for e in sched.fixed_entries:
        fixed.setdefault(e.step, []).append(lift(e))
    apply_trailing = lift(trailing) if trailing is not None else (lambda r: r)

    values = []
    for op in fixed.get(0, ()):
        rho = op(rho)
    if start == 0:
        values.append(np.trace(apply_trailing(rho)))
    for m in range(n_steps):
        rho = u_dt @ rho @ u_dag
        boundary = m + 1
        for op in fixed.get(boundary, ()):
            rho = op(rho)
        if boundary >= start:
            values.append(np.trace(apply_trailing(rho)))

    if mode_list:
        leak = _top_level_population(rho, len(mode_list), fock_cut)
        if leak > 1e-4:
            warnings.warn(
                f"oracle truncation leak {leak:.2e} at fock_cut={fock_cut}",
                stacklevel=2,
            )
    times = dt * np.arange(start, n_steps + 1)
    return CorrelationSeries(times=times, values=np.asarray(values))


def _top_level_population(rho: np.ndarray, n_modes: int, fock_cut: int) -> float:
    """Largest population in any mode's highest retained Fock level."""
    dims = [DIM] + [fock_cut] * n_modes
    diag = np.real(np.diag(rho)).reshape(dims)
    worst = 0.0
    for i in range(n_modes):
        worst = max(worst, float(np.take(diag, -1, axis=1 + i).sum()))
    return worst
