"""Noiseless statevector simulator for the quantum generator circuits.

Bit order: qubit 0 is the least significant bit of the basis index, so the
basis state ``|q5 q4 q3 q2 q1 q0>`` sits at index ``sum(q_i << i)``.

Two ansatz families are supported, both in the SU(2) 2-local layout
(``L`` repetitions of rotation block + circular CNOT ring, followed by one
final rotation block, i.e. ``L + 1`` rotation blocks):

* ``RxFixedY``: each block is an RX ladder followed by a fixed Pauli-Y ladder.
* ``RxRy``: each block is an RX ladder followed by an RY ladder.

The public single-gate functions work on :class:`Statevector` objects and are
pure. The circuit runners work on batches of raw amplitude arrays of shape
``(batch, 2**n)`` for speed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError

MAX_QUBITS = 12
SHIFT = np.pi / 2

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)


class AnsatzFamily(str, enum.Enum):
    RX_FIXED_Y = "RxFixedY"
    RX_RY = "RxRy"


@dataclass(frozen=True)
class AnsatzSpec:
    family: AnsatzFamily
    layers: int
    n_qubits: int = 6

    def __post_init__(self):
        object.__setattr__(self, "family", AnsatzFamily(self.family))
        if self.layers < 1:
            raise ConfigurationError(f"layers must be >= 1, got {self.layers}")
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ConfigurationError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")

    @property
    def param_count(self) -> int:
        return param_count(self)


@dataclass(frozen=True)
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n_qubits,):
            raise ValueError(f"expected {2**self.n_qubits} amplitudes, got shape {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def marginals(self) -> np.ndarray:
        """Probability of measuring |0> on each wire."""
        return zero_marginals(self.amplitudes[None, :], self.n_qubits)[0]


def param_count(spec: AnsatzSpec) -> int:
    per_block = spec.n_qubits if spec.family is AnsatzFamily.RX_FIXED_Y else 2 * spec.n_qubits
    return per_block * (spec.layers + 1)


# ---------------------------------------------------------------------------
# batched kernels

def rx_matrices(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    m = np.empty(theta.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = c
    m[..., 0, 1] = -1j * s
    m[..., 1, 0] = -1j * s
    m[..., 1, 1] = c
    return m


def ry_matrices(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    m = np.empty(theta.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = c
    m[..., 0, 1] = -s
    m[..., 1, 0] = s
    m[..., 1, 1] = c
    return m


def apply_1q(states: np.ndarray, mats: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Apply a 2x2 gate to ``qubit`` of every row of ``states``.

    ``mats`` is either a single ``(2, 2)`` matrix or one matrix per row,
    shape ``(batch, 2, 2)``.
    """
    batch = states.shape[0]
    s = states.reshape(batch, 2 ** (n_qubits - 1 - qubit), 2, 2**qubit)
    s0, s1 = s[:, :, 0, :], s[:, :, 1, :]
    if mats.ndim == 2:
        m00, m01, m10, m11 = mats[0, 0], mats[0, 1], mats[1, 0], mats[1, 1]
    else:
        m00, m01, m10, m11 = (mats[:, i, j, None, None] for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)))
    out = np.empty_like(s)
    out[:, :, 0, :] = m00 * s0 + m01 * s1
    out[:, :, 1, :] = m10 * s0 + m11 * s1
    return out.reshape(batch, -1)


@lru_cache(maxsize=None)
def cnot_permutation(control: int, target: int, n_qubits: int) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    return np.where((idx >> control) & 1, idx ^ (1 << target), idx)


@lru_cache(maxsize=None)
def ring_permutation(n_qubits: int) -> np.ndarray:
    """Index gather for CNOT(0,1), CNOT(1,2), ..., CNOT(n-1,0) applied in order."""
    perm = np.arange(2**n_qubits)
    if n_qubits < 2:
        return perm
    for q in range(n_qubits):
        # new[k] = old[p(k)]; composing gathers in application order
        perm = perm[cnot_permutation(q, (q + 1) % n_qubits, n_qubits)]
    return perm


@lru_cache(maxsize=None)
def ring_inverse(n_qubits: int) -> np.ndarray:
    return np.argsort(ring_permutation(n_qubits))


@lru_cache(maxsize=None)
def zero_mask(n_qubits: int) -> np.ndarray:
    """(2**n, n) matrix with 1 where bit q of the basis index is 0."""
    idx = np.arange(2**n_qubits)[:, None]
    return (((idx >> np.arange(n_qubits)) & 1) == 0).astype(float)


def zero_marginals(states: np.ndarray, n_qubits: int) -> np.ndarray:
    probs = states.real**2 + states.imag**2
    return probs @ zero_mask(n_qubits)


def ground_states(batch: int, n_qubits: int) -> np.ndarray:
    states = np.zeros((batch, 2**n_qubits), dtype=complex)
    states[:, 0] = 1.0
    return states


# ---------------------------------------------------------------------------
# single-state gate API

def new_statevector(n_qubits: int) -> Statevector:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    return Statevector(n_qubits, ground_states(1, n_qubits)[0])


def _check_qubit(state: Statevector, qubit: int) -> None:
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.n_qubits}-qubit register")


def _apply(state: Statevector, mat: np.ndarray, qubit: int) -> Statevector:
    _check_qubit(state, qubit)
    out = apply_1q(state.amplitudes[None, :], mat, qubit, state.n_qubits)
    return Statevector(state.n_qubits, out[0])


def apply_rx(state: Statevector, qubit: int, theta: float) -> Statevector:
    return _apply(state, rx_matrices(theta), qubit)


def apply_ry(state: Statevector, qubit: int, theta: float) -> Statevector:
    return _apply(state, ry_matrices(theta), qubit)


def apply_pauli_y(state: Statevector, qubit: int) -> Statevector:
    return _apply(state, _PAULI_Y, qubit)


def apply_cnot(state: Statevector, control: int, target: int) -> Statevector:
    if control == target:
        raise ValueError("CNOT control and target must differ")
    _check_qubit(state, control)
    _check_qubit(state, target)
    perm = cnot_permutation(control, target, state.n_qubits)
    return Statevector(state.n_qubits, state.amplitudes[perm])


def angle_embed(state: Statevector, z, axis: str = "ry") -> Statevector:
    """Encode ``z`` by one rotation per wire (RY by default)."""
    z = np.asarray(z, dtype=float)
    if z.shape != (state.n_qubits,):
        raise ValueError(f"expected {state.n_qubits} latent values, got shape {z.shape}")
    rot = apply_ry if axis == "ry" else apply_rx
    for q, angle in enumerate(z):
        state = rot(state, q, angle)
    return state


# ---------------------------------------------------------------------------
# generator circuits

def circuit_layers(spec: AnsatzSpec) -> list[tuple[str, np.ndarray | None]]:
    """Layer tape after the embedding.

    Entries are ``("rx", param_indices)``, ``("ry", param_indices)`` (one
    rotation per wire), ``("y", None)`` (fixed Pauli-Y on every wire) or
    ``("ring", None)``.
    """
    n = spec.n_qubits
    layers = []
    p = 0
    for block in range(spec.layers + 1):
        layers.append(("rx", np.arange(p, p + n)))
        p += n
        if spec.family is AnsatzFamily.RX_FIXED_Y:
            layers.append(("y", None))
        else:
            layers.append(("ry", np.arange(p, p + n)))
            p += n
        if block < spec.layers and n > 1:
            layers.append(("ring", None))
    assert p == param_count(spec)
    return layers


@lru_cache(maxsize=None)
def _bits(n_qubits: int) -> np.ndarray:
    """(n, 2**n) array, entry [q, k] = bit q of k."""
    return (np.arange(2**n_qubits)[None, :] >> np.arange(n_qubits)[:, None]) & 1


@lru_cache(maxsize=None)
def _flip_index(n_qubits: int) -> np.ndarray:
    """(n, 2**n) array, entry [q, k] = k with bit q flipped."""
    return np.arange(2**n_qubits)[None, :] ^ (1 << np.arange(n_qubits))[:, None]


def _kron_layer(mats: np.ndarray) -> np.ndarray:
    """Full-register matrix of one 2x2 gate per wire; ``mats[q]`` acts on qubit q."""
    out = mats[-1]
    for m in mats[-2::-1]:
        out = np.kron(out, m)
    return out


def _apply_layer(states: np.ndarray, mats: np.ndarray) -> np.ndarray:
    return states @ _kron_layer(mats).T


def _as_rows(values, batch: int, width: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[-1] != width:
        raise ValueError(f"{name} must have {width} entries per row, got shape {arr.shape}")
    if arr.shape[0] not in (1, batch):
        raise ValueError(f"{name} has {arr.shape[0]} rows, expected 1 or {batch}")
    return arr


def embed_states(z: np.ndarray, n_qubits: int, axis: str = "ry") -> np.ndarray:
    """Product states from rotating each wire of |0...0> by ``z[:, q]``."""
    half = np.asarray(z, dtype=float) / 2
    wire = np.empty(half.shape + (2,), dtype=complex)  # (batch, n, 2)
    wire[..., 0] = np.cos(half)
    wire[..., 1] = np.sin(half) if axis == "ry" else -1j * np.sin(half)
    bits = _bits(n_qubits)
    states = np.ones((half.shape[0], 2**n_qubits), dtype=complex)
    for q in range(n_qubits):
        states *= wire[:, q, bits[q]]
    return states


def _run_shared(spec: AnsatzSpec, params: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Whole-layer application; every row shares one parameter vector."""
    pending = None
    for kind, idx in circuit_layers(spec):
        if kind == "ring":
            if pending is not None:
                states, pending = _apply_layer(states, pending), None
            states = states[:, ring_permutation(spec.n_qubits)]
            continue
        if kind == "y":
            mats = np.broadcast_to(_PAULI_Y, (spec.n_qubits, 2, 2))
        else:
            mats = (rx_matrices if kind == "rx" else ry_matrices)(params[idx])
        pending = mats if pending is None else mats @ pending
    return states if pending is None else _apply_layer(states, pending)


def _run_per_row(spec: AnsatzSpec, params: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Gate-by-gate application with one parameter vector per row."""
    n = spec.n_qubits
    for kind, idx in circuit_layers(spec):
        if kind == "ring":
            states = states[:, ring_permutation(n)]
        elif kind == "y":
            for q in range(n):
                states = apply_1q(states, _PAULI_Y, q, n)
        else:
            make = rx_matrices if kind == "rx" else ry_matrices
            for q, p in enumerate(idx):
                states = apply_1q(states, make(params[:, p]), q, n)
    return states


def final_states(spec: AnsatzSpec, params, z, embed_axis: str = "ry") -> np.ndarray:
    """Output amplitudes for a batch, shape ``(batch, 2**n)``.

    ``params`` is ``(P,)`` or ``(batch, P)``; ``z`` is ``(n,)`` or ``(batch, n)``.
    """
    z = np.asarray(z, dtype=float)
    params = np.asarray(params, dtype=float)
    batch = max(z.shape[0] if z.ndim == 2 else 1, params.shape[0] if params.ndim == 2 else 1)
    z = _as_rows(z, batch, spec.n_qubits, "z")
    params = _as_rows(params, batch, param_count(spec), "params")
    states = embed_states(np.broadcast_to(z, (batch, spec.n_qubits)), spec.n_qubits, embed_axis)
    if params.shape[0] == 1:
        return _run_shared(spec, params[0], states)
    return _run_per_row(spec, params, states)


def run_generator_circuit(spec: AnsatzSpec, params, z, embed_axis: str = "ry") -> np.ndarray:
    """Per-qubit |0> probabilities; shape ``(n,)`` for one latent vector, else ``(batch, n)``."""
    single = np.ndim(z) == 1 and np.ndim(params) == 1
    probs = zero_marginals(final_states(spec, params, z, embed_axis), spec.n_qubits)
    return probs[0] if single else probs


def param_shift_jacobian(spec: AnsatzSpec, params, z, embed_axis: str = "ry") -> np.ndarray:
    """d(marginals)/d(params) by the two-term shift rule.

    Returns shape ``(n, P)`` for a single latent vector or ``(batch, n, P)``.
    All ``2 P`` shifted circuits (times the batch) are simulated in one pass.
    """
    params = np.asarray(params, dtype=float)
    n_params = param_count(spec)
    if params.shape != (n_params,):
        raise ValueError(f"expected {n_params} parameters, got shape {params.shape}")
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[1] != spec.n_qubits:
        raise ValueError(f"z must have {spec.n_qubits} entries per row, got shape {z.shape}")
    batch = z.shape[0]

    shifts = np.concatenate([np.eye(n_params), -np.eye(n_params)]) * SHIFT
    rows = np.repeat(params[None, :] + shifts, batch, axis=0)  # (2P * batch, P)
    states = embed_states(np.tile(z, (2 * n_params, 1)), spec.n_qubits, embed_axis)
    probs = zero_marginals(_run_per_row(spec, rows, states), spec.n_qubits)
    probs = probs.reshape(2, n_params, batch, spec.n_qubits)
    jac = ((probs[0] - probs[1]) / 2).transpose(1, 2, 0)
    return jac[0] if single else jac


def adjoint_vjp(spec: AnsatzSpec, params, z, upstream, embed_axis: str = "ry", states=None) -> np.ndarray:
    """Vector-Jacobian product ``sum_b upstream[b] @ J[b]`` by adjoint differentiation.

    The weighted marginal sum is the expectation of a diagonal observable, so
    one backward sweep gives every parameter derivative. Rotations within a
    layer act on distinct wires and commute, so a whole layer's derivatives
    are read off at once: d/d(theta_q) = Im <lam| G_q |psi> for generator
    G in {X, Y}. Matches :func:`param_shift_jacobian` to rounding error.
    ``states`` may pass in precomputed output amplitudes for ``z``.
    """
    params = np.asarray(params, dtype=float)
    n_params = param_count(spec)
    if params.shape != (n_params,):
        raise ValueError(f"expected {n_params} parameters, got shape {params.shape}")
    z = np.atleast_2d(np.asarray(z, dtype=float))
    upstream = np.atleast_2d(np.asarray(upstream, dtype=float))
    if upstream.shape != z.shape:
        raise ValueError(f"upstream shape {upstream.shape} does not match z shape {z.shape}")
    n = spec.n_qubits

    psi = final_states(spec, params, z, embed_axis) if states is None else states
    lam = (upstream @ zero_mask(n).T) * psi
    flip = _flip_index(n)
    y_phase = np.where(_bits(n) == 1, 1j, -1j)  # (Y_q psi)[k] = phase[q, k] * psi[k ^ 2**q]
    grads = np.zeros(n_params)
    for kind, idx in reversed(circuit_layers(spec)):
        if kind == "ring":
            inv = ring_inverse(n)
            psi, lam = psi[:, inv], lam[:, inv]
            continue
        if kind == "y":
            undo = _kron_layer(np.broadcast_to(_PAULI_Y, (n, 2, 2))).T
        else:
            flipped = psi[:, flip]  # (batch, n, 2**n)
            if kind == "ry":
                flipped = flipped * y_phase
            grads[idx] = np.einsum("bk,bqk->q", np.conj(lam), flipped).imag
            make = rx_matrices if kind == "rx" else ry_matrices
            undo = _kron_layer(make(-params[idx])).T
        psi, lam = psi @ undo, lam @ undo
    return grads
