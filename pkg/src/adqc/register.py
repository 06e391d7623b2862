"""The n-qubit machine: attach an ancilla, entangle, measure, track the frame.

A step couples one mobile ancilla to one or two register qubits with preset
entanglers and measures the ancilla in an adaptively resolved basis.  Patterns
are ordered step lists whose basis angles may depend on earlier outcomes and
whose byproduct corrections are recorded per qubit as outcome-parity sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import AncillaSpec, MeasBasis, assemble_entangler, preset
from .linalg import PAULIS, PureState, dagger

PRUNE_PROBABILITY = 1e-12
PAYLOAD_BIT = 1 << 20  # set index i + PAYLOAD_BIT refers to step i's payload flip


@dataclass(frozen=True)
class AdaptiveAngle:
    """Angle resolved as sum of terms value*(-1)^parity(bits at negate_on).

    Indices below PAYLOAD_BIT reference earlier step outcomes; larger ones
    reference per-step payload-flip bits, which are zero outside delegated
    runs.
    """

    terms: tuple[tuple[float, frozenset[int]], ...] = ()

    @classmethod
    def constant(cls, value: float) -> "AdaptiveAngle":
        return cls(((float(value), frozenset()),))

    def resolve(self, outcomes, payload_bits=None) -> float:
        total = 0.0
        for value, negate_on in self.terms:
            parity = 0
            for i in negate_on:
                if i >= PAYLOAD_BIT:
                    if payload_bits:
                        parity ^= payload_bits[i - PAYLOAD_BIT] & 1
                else:
                    parity ^= outcomes[i] & 1
            total += -value if parity else value
        return total

    def max_dependency(self) -> int:
        deps = [i for _, negs in self.terms for i in negs if i < PAYLOAD_BIT]
        return max(deps) if deps else -1


@dataclass(frozen=True)
class AdqcStep:
    """One ancilla-couple-and-measure step.

    ``entangler_labels`` has one preset label per target; couplings are applied
    ancilla-to-target in listed order.  The ancilla parameters are canonical:
    the physical payload is the first coupling's ancilla pre-frame inverse
    applied to ``|+_{gamma,delta}>``, and the measurement happens in the last
    coupling's ancilla post-frame rotation of the requested basis.
    """

    targets: tuple[int, ...]
    entangler_labels: tuple[str, ...]
    ancilla: AncillaSpec
    basis_theta: AdaptiveAngle
    basis_phi: float = 0.0

    def __post_init__(self):
        if len(self.targets) not in (1, 2):
            raise ValueError("a step couples the ancilla to 1 or 2 targets")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("step targets must be distinct")
        if len(self.entangler_labels) != len(self.targets):
            raise ValueError("one entangler label per target required")


@dataclass(frozen=True)
class QubitCorrection:
    """Byproduct Pauli on one qubit: X^(x) Z^(z) with each exponent given by a
    constant bit xored with the parity of the listed bits.  Indices below
    PAYLOAD_BIT refer to step outcomes; others to per-step payload-flip bits
    (zero outside delegated runs)."""

    x_parity: frozenset[int] = frozenset()
    x_const: int = 0
    z_parity: frozenset[int] = frozenset()
    z_const: int = 0

    def bits(self, outcomes, payload_bits=None) -> tuple[int, int]:
        def bit(i: int) -> int:
            if i >= PAYLOAD_BIT:
                return payload_bits[i - PAYLOAD_BIT] & 1 if payload_bits else 0
            return outcomes[i] & 1

        x = self.x_const
        for i in self.x_parity:
            x ^= bit(i)
        z = self.z_const
        for i in self.z_parity:
            z ^= bit(i)
        return x, z

    def pauli(self, outcomes, payload_bits=None) -> str:
        return {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}[
            self.bits(outcomes, payload_bits)
        ]


@dataclass(frozen=True)
class SlotSpec:
    """Protocol-facing grouping of steps into one delegable slot."""

    kind: str  # 'J' | 'RX' | 'RZ' | 'ASSIST' | 'CZ2'
    qubits: tuple[int, ...]
    theta_prime: float | None
    step_indices: tuple[int, ...]
    roles: dict[str, int]
    theta_negate: frozenset[int] = frozenset()
    theta_sign: int = 1
    gamma_negate: frozenset[int] = frozenset()
    labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class GatePattern:
    """Adaptive step sequence with a target unitary and byproduct corrections."""

    num_qubits: int
    steps: tuple[AdqcStep, ...]
    target: np.ndarray
    target_qubits: tuple[int, ...]
    corrections: tuple[QubitCorrection, ...]
    slots: tuple[SlotSpec, ...] = ()
    slot_boundaries: tuple[tuple[QubitCorrection, ...], ...] = ()

    def __post_init__(self):
        for i, step in enumerate(self.steps):
            if step.basis_theta.max_dependency() >= i:
                raise ValueError(f"step {i} depends on a non-earlier outcome")
            if any(t >= self.num_qubits for t in step.targets):
                raise ValueError(f"step {i} targets outside the register")

    def correction_for(self, outcomes, payload_bits=None) -> tuple[str, ...]:
        if len(outcomes) != len(self.steps):
            raise ValueError("need one outcome per step")
        return tuple(c.pauli(outcomes, payload_bits) for c in self.corrections)

    def correction_table(self) -> dict[tuple[int, ...], tuple[str, ...]]:
        """Extensional outcome-vector -> Pauli-string map (patterns <= 14 steps)."""
        k = len(self.steps)
        if k > 14:
            raise ValueError("correction table too large; use correction_for")
        table = {}
        for m in range(2**k):
            outs = tuple((m >> (k - 1 - j)) & 1 for j in range(k))
            table[outs] = self.correction_for(outs)
        return table


@dataclass(frozen=True)
class RegisterState:
    register: PureState
    attached_ancilla: PureState | None = None
    pauli_frame: tuple[str, ...] = ()
    outcome_log: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.pauli_frame:
            object.__setattr__(
                self, "pauli_frame", ("I",) * self.register.num_qubits
            )


def init_register(n: int, state="") -> RegisterState:
    """Fresh register of 1..4 qubits from a PureState or a label like "0+"."""
    if not (1 <= n <= 4):
        raise ValueError("register size must be between 1 and 4")
    if isinstance(state, PureState):
        if state.num_qubits != n:
            raise ValueError("input state size mismatch")
        reg = state
    else:
        label = state if state else "0" * n
        reg = PureState.from_label(label)
        if reg.num_qubits != n:
            raise ValueError("label length does not match register size")
    return RegisterState(reg)


def _embed_two(op4: np.ndarray, pos_a: int, pos_b: int, n_total: int) -> np.ndarray:
    """Embed a 2-qubit operator (first factor at pos_a, second at pos_b)."""
    op = op4.reshape(2, 2, 2, 2)
    dim = 2**n_total
    full = np.zeros((dim, dim), dtype=complex)
    rest = [q for q in range(n_total) if q not in (pos_a, pos_b)]
    for ao in range(2):
        for bo in range(2):
            for ai in range(2):
                for bi in range(2):
                    amp = op[ao, bo, ai, bi]
                    if amp == 0:
                        continue
                    for r in range(2 ** len(rest)):
                        idx_o = [0] * n_total
                        idx_i = [0] * n_total
                        idx_o[pos_a], idx_o[pos_b] = ao, bo
                        idx_i[pos_a], idx_i[pos_b] = ai, bi
                        for k, q in enumerate(rest):
                            bit = (r >> k) & 1
                            idx_o[q] = bit
                            idx_i[q] = bit
                        io = int("".join(map(str, idx_o)), 2)
                        ii = int("".join(map(str, idx_i)), 2)
                        full[io, ii] += amp
    return full


def step_branch_operators(step: AdqcStep, theta: float, n: int):
    """The two register Kraus operators of a step (unnormalized), plus the
    outcome ordering (plus branch first).  ``n`` is the register size."""
    ents = [preset(lbl) for lbl in step.entangler_labels]
    anc_pos = n  # ancilla appended as least significant qubit
    total = np.eye(2 ** (n + 1), dtype=complex)
    for tgt, ent in zip(step.targets, ents):
        total = _embed_two(assemble_entangler(ent), anc_pos, tgt, n + 1) @ total
    first_va = ents[0].frame.v_a
    payload = dagger(first_va) @ step.ancilla.ket().amplitudes
    last_wa = ents[-1].frame.w_a
    basis = MeasBasis(theta, step.basis_phi)
    bras = [last_wa @ b.amplitudes for b in basis.bra_states()]

    dim = 2**n
    t = total.reshape(dim, 2, dim, 2)  # (reg_out, anc_out, reg_in, anc_in)
    ops = []
    for b in bras:
        ops.append(np.einsum("a,iajb,b->ij", b.conj(), t, payload))
    return ops


def execute_step(state: RegisterState, step: AdqcStep, outcome=None, rng=None):
    """Run one step; ``outcome`` forces a branch, otherwise ``rng`` samples one.

    Returns (new_state, outcome_bit).  Forcing a branch whose probability is
    below 1e-12 is an error.
    """
    if state.attached_ancilla is not None:
        raise RuntimeError("an ancilla is already attached")
    n = state.register.num_qubits
    if any(t >= n for t in step.targets):
        raise ValueError("step targets outside the register")
    theta = step.basis_theta.resolve(state.outcome_log)
    ops = step_branch_operators(step, theta, n)
    vecs = [op @ state.register.amplitudes for op in ops]
    probs = [float(np.vdot(v, v).real) for v in vecs]

    if outcome is None:
        if rng is None:
            raise ValueError("sampling a step requires an rng")
        s = 0 if rng.random() < probs[0] else 1
    else:
        s = int(outcome)
        if probs[s] < PRUNE_PROBABILITY:
            raise ValueError(f"forced branch {s} has probability {probs[s]:.3e}")
    new_reg = PureState(n, vecs[s])
    new_state = replace(
        state, register=new_reg, outcome_log=state.outcome_log + (s,)
    )
    return new_state, s


@dataclass(frozen=True)
class Branch:
    outcomes: tuple[int, ...]
    probability: float
    raw: RegisterState
    frame: tuple[str, ...]
    corrected: PureState


@dataclass(frozen=True)
class RunResult:
    branches: tuple[Branch, ...]

    def total_probability(self) -> float:
        return sum(b.probability for b in self.branches)


def _apply_frame(state: PureState, frame) -> PureState:
    op = np.array([[1.0]], dtype=complex)
    for name in frame:
        op = np.kron(op, PAULIS[name])
    # Pauli application is exactly norm-preserving; skip renormalization so the
    # corrected state is bit-identical to frame @ raw
    out = PureState.__new__(PureState)
    object.__setattr__(out, "num_qubits", state.num_qubits)
    object.__setattr__(out, "amplitudes", op @ state.amplitudes)
    return out


def run_pattern(state: RegisterState, pattern: GatePattern, mode="enumerate", seed=None):
    """Execute a pattern.

    ``mode='enumerate'`` explores every outcome branch (probabilities summing to
    one); ``mode='sample'`` draws a single trajectory from the given seed.  Each
    returned branch carries its resolved byproduct frame and the corrected
    register state obtained by applying that frame to the raw final state.
    """
    if pattern.num_qubits != state.register.num_qubits:
        raise ValueError("pattern size does not match the register")
    base_log = len(state.outcome_log)
    if base_log:
        raise ValueError("run_pattern expects a fresh outcome log")

    def finish(st: RegisterState, prob: float) -> Branch:
        frame = pattern.correction_for(st.outcome_log)
        corrected = _apply_frame(st.register, frame)
        final = replace(st, pauli_frame=frame)
        return Branch(st.outcome_log, prob, final, frame, corrected)

    cache: dict = {}

    def cached_ops(k: int, step: AdqcStep, theta: float):
        key = (k, round(theta, 12) % (2 * math.pi))
        if key not in cache:
            cache[key] = step_branch_operators(step, theta, pattern.num_qubits)
        return cache[key]

    if mode == "sample":
        rng = np.random.default_rng(seed)
        st, prob = state, 1.0
        for k, step in enumerate(pattern.steps):
            theta = step.basis_theta.resolve(st.outcome_log)
            ops = cached_ops(k, step, theta)
            vecs = [op @ st.register.amplitudes for op in ops]
            probs = [float(np.vdot(v, v).real) for v in vecs]
            s = 0 if rng.random() < probs[0] else 1
            prob *= probs[s]
            st = replace(
                st,
                register=PureState(st.register.num_qubits, vecs[s]),
                outcome_log=st.outcome_log + (s,),
            )
        return RunResult((finish(st, prob),))

    if mode != "enumerate":
        raise ValueError(f"unknown mode {mode!r}")

    branches = []
    stack = [(state, 1.0, 0)]
    while stack:
        st, prob, k = stack.pop()
        if k == len(pattern.steps):
            branches.append(finish(st, prob))
            continue
        step = pattern.steps[k]
        theta = step.basis_theta.resolve(st.outcome_log)
        ops = cached_ops(k, step, theta)
        for s in (1, 0):
            vec = ops[s] @ st.register.amplitudes
            p = float(np.vdot(vec, vec).real)
            if p < PRUNE_PROBABILITY:
                continue
            nxt = replace(
                st,
                register=PureState(st.register.num_qubits, vec),
                outcome_log=st.outcome_log + (s,),
            )
            stack.append((nxt, prob * p, k + 1))
    branches.sort(key=lambda b: b.outcomes)
    return RunResult(tuple(branches))
