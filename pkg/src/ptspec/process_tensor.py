"""Process-tensor MPO construction from the discretized influence functional.

The bath's influence on the system is a multiplicative weight on paths of
Liouville indices at the half-step points of the symmetric Trotter splitting,

    B(j_0, ..., j_{M-1}) = prod_m prod_{k=0..min(m, dkmax)} I_k(j_m, j_{m-k}),

with I_k built from the memory-kernel coefficients eta_k.  B is stored as a
matrix product of 3-leg cores (bond, system, bond); the process-tensor sites
of the public contract are the exact diagonal embeddings of those cores into
4-leg (bond-in, system-in, bond-out, system-out) tensors, materialized on
demand.  Columns of bath tensors are absorbed in time order with a zip-up
left-to-right truncating pass followed by a right-to-left cleanup sweep, both
at relative singular-value threshold eps_rel.
"""

import io
import json
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from . import bath as bath_mod
from .bath import BathSpec, DiscreteBath, EtaCoefficients
from .errors import PtFileError, ResourceError, ValidationError
from .linalg import svd_truncate
from .system import COUPLING_EIGENVALUES, LIOUVILLE_DIM

__all__ = [
    "BathTensor",
    "ProcessTensorMPO",
    "influence_function",
    "influence_matrix",
    "build_pt_mpo",
    "save_pt",
    "load_pt",
]

MAGIC = b"PTMPO1"
FORMAT_VERSION = 1

# Difference and sum of coupling-operator eigenvalues per Liouville index
# j = 3*a + b  <->  |a><b|.
_O_DIFF = (COUPLING_EIGENVALUES[:, None] - COUPLING_EIGENVALUES[None, :]).reshape(-1)
_O_SUM = (COUPLING_EIGENVALUES[:, None] + COUPLING_EIGENVALUES[None, :]).reshape(-1)

# The later-time index enters the influence only through d, so the message
# bond of an absorbed column needs one state per distinct d value, not 9.
_D_CLASSES = np.unique(_O_DIFF)
_CLASS_OF = np.searchsorted(_D_CLASSES, _O_DIFF)

_TRACE = np.eye(3).reshape(-1).astype(complex)


def influence_function(eta: EtaCoefficients, k: int, j: int, jp: int) -> complex:
    """Influence I_k between the later index ``j`` and earlier index ``jp``.

    I_k(j, j') = exp[-d_j (Re(eta_k) d_j' + i Im(eta_k) s_j')] with d and s
    the difference and sum of coupling eigenvalues of the index's (ket, bra)
    pair.  Ground-state-diagonal indices have d = 0 and are bath-decoupled.
    """
    if not 0 <= k < len(eta.values):
        raise ValidationError(f"memory distance {k} outside eta range {len(eta.values)}")
    if not (0 <= j < LIOUVILLE_DIM and 0 <= jp < LIOUVILLE_DIM):
        raise ValidationError(f"Liouville indices must lie in [0, 9), got ({j}, {jp})")
    e = eta.values[k]
    return complex(
        np.exp(-_O_DIFF[j] * (e.real * _O_DIFF[jp] + 1j * e.imag * _O_SUM[jp]))
    )


def influence_matrix(eta: EtaCoefficients, k: int) -> np.ndarray:
    """All influences at distance k as a matrix [j_later, j_earlier]."""
    if not 0 <= k < len(eta.values):
        raise ValidationError(f"memory distance {k} outside eta range {len(eta.values)}")
    e = eta.values[k]
    exponent = -np.outer(_O_DIFF, e.real * _O_DIFF + 1j * e.imag * _O_SUM)
    return np.exp(exponent)


@dataclass(frozen=True)
class BathTensor:
    """One bath tensor of the time-ordered network, Eq.-(11)-style.

    Bulk variant: [b_k]^{a,j}_{a',j'} = delta^j_{j'} delta^a_{a'} I_k(a, j),
    with the a-legs carrying the later step's index.  Edge variants drop the
    delta on the missing leg.  Only used for inspection/tests; the builder
    works on the contracted column form directly.
    """

    k: int
    tensor: np.ndarray

    @classmethod
    def bulk(cls, eta: EtaCoefficients, k: int) -> "BathTensor":
        infl = influence_matrix(eta, k)
        d = LIOUVILLE_DIM
        t = np.zeros((d, d, d, d), dtype=complex)
        idx = np.arange(d)
        # legs (a, j, a', j')
        t[idx[:, None], idx[None, :], idx[:, None], idx[None, :]] = infl
        return cls(k=k, tensor=t)


class _DiagonalSiteView(Sequence):
    """Lazy list of 4-leg MPO sites embedding the diagonal weight cores."""

    def __init__(self, cores: List[np.ndarray]):
        self._cores = cores

    def __len__(self):
        return len(self._cores)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        core = self._cores[index]
        chi_l, d, chi_r = core.shape
        site = np.zeros((chi_l, d, chi_r, d), dtype=complex)
        idx = np.arange(d)
        site[:, idx, :, idx] = core.transpose(1, 0, 2)
        return site


@dataclass
class ProcessTensorMPO:
    """Compressed influence functional for n_steps time steps.

    ``sites`` exposes the 4-leg (bond-in, system-in, bond-out, system-out)
    MPO tensors; system legs have dimension 9 and the edge bonds dimension 1.
    ``caps`` are the trace closures used to read out observables before the
    final step.
    """

    cores: List[np.ndarray]
    dt: float
    n_steps: int
    dkmax: int
    eps_rel: float
    bath: Union[BathSpec, DiscreteBath]
    _caps: Optional[List[np.ndarray]] = field(default=None, repr=False)

    @property
    def sites(self) -> Sequence[np.ndarray]:
        return _DiagonalSiteView(self.cores)

    @property
    def bond_dims(self) -> List[int]:
        if not self.cores:
            return [1]
        return [c.shape[0] for c in self.cores] + [self.cores[-1].shape[2]]

    @property
    def max_bond_dim(self) -> int:
        return max(self.bond_dims)

    @property
    def caps(self) -> List[np.ndarray]:
        """caps[m][bond, j]: contraction of sites m.. with the bath-trace closure."""
        if self._caps is None:
            caps = [None] * (self.n_steps + 1)
            caps[self.n_steps] = np.tile(_TRACE, (self.cores[-1].shape[2], 1)) \
                if self.cores else _TRACE.reshape(1, -1).copy()
            for p in range(self.n_steps - 1, -1, -1):
                caps[p] = np.einsum("ljr,rj->lj", self.cores[p], caps[p + 1])
            self._caps = caps
        return self._caps


def build_pt_mpo(
    b: Union[BathSpec, DiscreteBath],
    dt: float,
    n_steps: int,
    dkmax: int = 1000,
    eps_rel: float = 1e-6,
    max_bond: int = 512,
) -> ProcessTensorMPO:
    """Construct the PT-MPO for ``n_steps`` steps of length ``dt``.

    Memory beyond ``dkmax`` steps is dropped; a warning is emitted when that
    cap cuts into the bath memory time (the |C| -> 1e-3 decay criterion).
    Bond growth past ``max_bond`` raises ResourceError with the peak reached.
    """
    if dt <= 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    if n_steps < 0:
        raise ValidationError(f"n_steps must be >= 0, got {n_steps}")
    if dkmax < 0:
        raise ValidationError(f"dkmax must be >= 0, got {dkmax}")

    if n_steps == 0:
        return ProcessTensorMPO([], dt, 0, dkmax, eps_rel, b)

    if dkmax < n_steps - 1 and isinstance(b, BathSpec) and b.alpha > 0:
        t_mem = bath_mod.memory_time(b)
        if dt * dkmax < t_mem:
            warnings.warn(
                f"dt*dkmax = {dt * dkmax:.2f} ps is below the bath memory "
                f"time ~{t_mem:.2f} ps; results may not be converged",
                stacklevel=2,
            )

    k_needed = min(dkmax, n_steps - 1)
    eta = bath_mod.eta_coefficients(b, dt, k_needed)
    # Influence factors with the later index reduced to its d class,
    # [class, j_earlier]; exact because I_k depends on the later index only
    # through d.
    infl = [
        np.exp(
            -np.outer(_D_CLASSES, eta.values[k].real * _O_DIFF
                      + 1j * eta.values[k].imag * _O_SUM)
        )
        for k in range(k_needed + 1)
    ]
    i0_diag = np.exp(
        -_O_DIFF * (eta.values[0].real * _O_DIFF + 1j * eta.values[0].imag * _O_SUM)
    )
    trivial = [bool(np.all(f == 1.0)) for f in infl]

    d = LIOUVILLE_DIM
    n_cls = len(_D_CLASSES)
    identity_core = np.ones((1, d, 1), dtype=complex)
    cores: List[np.ndarray] = [
        identity_core.copy() if trivial[0] else i0_diag.reshape(1, d, 1).astype(complex)
    ]
    peak = 1
    for m in range(1, n_steps):
        km = min(m, dkmax)
        # A column whose factors are all exactly 1 (decoupled bath, or
        # eta identically zero) multiplies nothing in; keep exact identity
        # sites so no SVD gauge leaks into them.
        if km == 0 or all(trivial[k] for k in range(min(km, k_needed) + 1)):
            cores.append(cores[0].copy() if trivial[0]
                         else i0_diag.reshape(1, d, 1).astype(complex))
            continue
        a = m - km
        # -- zip-up absorption of column m; message bond carries the d class
        #    of the new step's index --
        carry = None
        for p in range(a, m):
            w = infl[m - p]  # [class, j_p]
            core = cores[p]
            if p == a:
                tmp = core[:, :, :, None] * w.T[None, :, None, :]  # (l, j, r, c)
            else:
                tmp = np.tensordot(carry, core, axes=([1], [0]))  # (s, c, j, r)
                tmp = tmp * w[None, :, :, None]
                tmp = tmp.transpose(0, 2, 3, 1)  # (s, j, r, c)
            left, chi_r = tmp.shape[0], core.shape[2]
            svd = svd_truncate(tmp.reshape(left * d, chi_r * n_cls), eps_rel)
            r = svd.rank
            if r > max_bond:
                raise ResourceError(
                    f"bond dimension {r} exceeds max_bond={max_bond} "
                    f"at step {m}",
                    peak_bond_dim=r,
                )
            peak = max(peak, r)
            cores[p] = svd.left_factors.reshape(left, d, r)
            carry = (svd.singular_values[:, None] * svd.right_factors).reshape(
                r, chi_r, n_cls
            )
        cores.append(
            (carry[:, 0, _CLASS_OF] * i0_diag[None, :]).reshape(-1, d, 1)
        )
        # -- right-to-left cleanup sweep over the touched window --
        for p in range(m, max(a, 1) - 1, -1):
            core = cores[p]
            chi_l = core.shape[0]
            svd = svd_truncate(core.reshape(chi_l, d * core.shape[2]), eps_rel)
            r = svd.rank
            cores[p] = svd.right_factors.reshape(r, d, core.shape[2])
            absorb = svd.left_factors * svd.singular_values[None, :]
            cores[p - 1] = np.tensordot(cores[p - 1], absorb, axes=([2], [0]))
    return ProcessTensorMPO(cores, dt, n_steps, dkmax, eps_rel, b)


def _header_dict(pt: ProcessTensorMPO) -> dict:
    if not isinstance(pt.bath, BathSpec):
        raise PtFileError(
            "only continuum-bath process tensors are saved; discrete-bath "
            "PTs are in-memory test objects"
        )
    return {
        "format_version": FORMAT_VERSION,
        "dt": pt.dt,
        "n_steps": pt.n_steps,
        "dkmax": pt.dkmax,
        "eps_rel": pt.eps_rel,
        "bath": {
            "alpha": pt.bath.alpha,
            "omega_c": pt.bath.omega_c,
            "temperature": pt.bath.temperature,
        },
        "bond_dims": pt.bond_dims,
        "endianness": "little",
    }


def save_pt(pt: ProcessTensorMPO, path) -> None:
    """Write magic, length-prefixed JSON header, then raw complex128 sites."""
    header = json.dumps(_header_dict(pt), sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        sites = pt.sites
        for i in range(len(sites)):
            fh.write(np.ascontiguousarray(sites[i], dtype="<c16").tobytes())


def load_pt(path) -> ProcessTensorMPO:
    """Read a PT file back; bit-exact inverse of :func:`save_pt`."""
    with open(path, "rb") as fh:
        data = fh.read()
    buf = io.BytesIO(data)
    if buf.read(len(MAGIC)) != MAGIC:
        raise PtFileError(f"{path}: bad magic, not a PT file")
    try:
        header_len = int.from_bytes(buf.read(8), "little")
        header = json.loads(buf.read(header_len).decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise PtFileError(f"{path}: corrupt header ({exc})") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise PtFileError(
            f"{path}: format version {header.get('format_version')} "
            f"not supported (expected {FORMAT_VERSION})"
        )
    if header.get("endianness") != "little":
        raise PtFileError(f"{path}: unsupported endianness {header.get('endianness')}")
    n_steps = header["n_steps"]
    bond_dims = header["bond_dims"]
    if len(bond_dims) != max(n_steps + 1, 1) or bond_dims[0] != 1 or bond_dims[-1] != 1:
        raise PtFileError(f"{path}: declared bond dimensions are inconsistent")
    d = LIOUVILLE_DIM
    expected = sum(
        bond_dims[i] * d * bond_dims[i + 1] * d for i in range(n_steps)
    )
    payload = buf.read()
    if len(payload) != expected * 16:
        raise PtFileError(
            f"{path}: payload size {len(payload)} does not match the "
            f"declared bond dimensions (expected {expected * 16} bytes)"
        )
    raw = np.frombuffer(payload, dtype="<c16")
    cores = []
    offset = 0
    idx = np.arange(d)
    for i in range(n_steps):
        chi_l, chi_r = bond_dims[i], bond_dims[i + 1]
        count = chi_l * d * chi_r * d
        site = raw[offset:offset + count].reshape(chi_l, d, chi_r, d)
        offset += count
        core = site[:, idx, :, idx].transpose(1, 0, 2)  # (chi_l, d, chi_r)
        embedded = np.zeros_like(site)
        embedded[:, idx, :, idx] = core.transpose(1, 0, 2)
        if np.count_nonzero(site - embedded):
            raise PtFileError(f"{path}: site {i} is not diagonal on system legs")
        cores.append(np.ascontiguousarray(core))
    b = BathSpec(**header["bath"])
    return ProcessTensorMPO(
        cores=cores,
        dt=header["dt"],
        n_steps=n_steps,
        dkmax=header["dkmax"],
        eps_rel=header["eps_rel"],
        bath=b,
    )
