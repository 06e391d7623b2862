"""Blind delegation: client and server state machines, transcripts, audits.

The client owns the circuit and per-slot angles; the server owns the register
and executes steps.  Per rotation slot the dialogue is: the client sends a
randomly rotated ancilla, the server couples and measures it at the fixed
basis and returns the outcome, the client then sends one basis angle whose
value folds its secret angle, the hidden rotation, the accumulated byproduct
frame and a random half-turn, and the server measures at that angle.  Every
message the server sees is either a maximally mixed ancilla (after averaging
the client's coin) or a grid angle whose distribution is exactly uniform.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import AncillaSpec, MeasBasis, assemble_entangler, param_state, preset, rotation
from .linalg import I2, PAULIS, DensityMatrix, PureState, trace_distance
from .patterns import CZ_SLOT_ANCILLA, CircuitDescription, compile_circuit
from .register import (
    AdaptiveAngle,
    AdqcStep,
    GatePattern,
    RegisterState,
    _embed_two,
    init_register,
)

TWO_PI = 2.0 * math.pi
DEFAULT_GRID = 8


class ProtocolOrderError(RuntimeError):
    """A message arrived out of protocol order."""


def grid_angles(grid_n: int) -> tuple[float, ...]:
    if grid_n < 4 or grid_n % 2:
        raise ValueError("grid size must be an even integer >= 4")
    return tuple(TWO_PI * k / grid_n for k in range(grid_n))


def grid_index(theta: float, grid_n: int) -> int:
    k = round((theta % TWO_PI) / (TWO_PI / grid_n)) % grid_n
    if abs((theta % TWO_PI) - k * TWO_PI / grid_n) > 1e-9 and abs(
        (theta % TWO_PI) - TWO_PI - (k - grid_n) * TWO_PI / grid_n
    ) > 1e-9:
        raise ValueError(f"angle {theta} does not lie on the grid of size {grid_n}")
    return k


# ---------------------------------------------------------------------------
# messages and transcripts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Message:
    kind: str  # 'ANCILLA' | 'ANGLE' | 'OUTCOME'
    slot: int
    payload: tuple[complex, complex] | None = None
    theta_grid: int | None = None
    bit: int | None = None

    def __post_init__(self):
        if self.kind == "ANCILLA":
            if self.payload is None:
                raise ValueError("ANCILLA message needs a payload")
            v = np.array(self.payload, dtype=complex)
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise ValueError("ANCILLA payload is not a unit state")
        elif self.kind == "ANGLE":
            if self.theta_grid is None:
                raise ValueError("ANGLE message needs a grid index")
        elif self.kind == "OUTCOME":
            if self.bit not in (0, 1):
                raise ValueError("OUTCOME message needs a bit")
        else:
            raise ValueError(f"unknown message kind {self.kind!r}")

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind, "slot": self.slot}
        if self.kind == "ANCILLA":
            d["payload"] = [[z.real, z.imag] for z in self.payload]
        elif self.kind == "ANGLE":
            d["theta_grid"] = self.theta_grid
        else:
            d["bit"] = self.bit
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Message":
        if d["kind"] == "ANCILLA":
            payload = tuple(complex(re, im) for re, im in d["payload"])
            return cls("ANCILLA", d["slot"], payload=payload)
        if d["kind"] == "ANGLE":
            return cls("ANGLE", d["slot"], theta_grid=d["theta_grid"])
        return cls("OUTCOME", d["slot"], bit=d["bit"])


@dataclass
class ProtocolTranscript:
    messages: list[Message] = field(default_factory=list)
    client_log: list[dict] = field(default_factory=list)

    def server_view(self) -> list[Message]:
        return list(self.messages)

    def to_jsonl(self, view: str = "full") -> str:
        lines = [json.dumps({"view": view}, sort_keys=True)]
        for m in self.messages:
            lines.append(json.dumps(m.to_dict(), sort_keys=True))
        if view == "full":
            for entry in self.client_log:
                lines.append(json.dumps({"client_log": entry}, sort_keys=True))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# client
# ---------------------------------------------------------------------------


@dataclass
class SlotDraw:
    gamma_index: int | None = None
    r_payload: int = 0
    r_assist: int = 0
    r_angle: int = 0


@dataclass
class ClientSecret:
    """Everything the server must never learn: the circuit, the per-slot
    angles, and the random draws that hide them."""

    circuit: CircuitDescription
    variant: str
    grid_n: int
    seed: int
    pattern: GatePattern = field(init=False)
    draws: list[SlotDraw] = field(init=False)

    def __post_init__(self):
        self.pattern = compile_circuit(self.circuit, self.variant)
        for slot in self.pattern.slots:
            if slot.theta_prime is not None:
                grid_index(slot.theta_prime, self.grid_n)  # angles must be on-grid
        rng = np.random.default_rng(self.seed)
        self.draws = []
        for slot in self.pattern.slots:
            d = SlotDraw()
            if slot.kind in ("J", "RX", "RZ"):
                d.gamma_index = int(rng.integers(self.grid_n))
                d.r_payload = int(rng.integers(2))
                d.r_angle = int(rng.integers(2))
                if slot.kind == "J":
                    d.r_assist = int(rng.integers(2))
            else:  # ASSIST, CZ2
                d.r_payload = int(rng.integers(2))
            self.draws.append(d)


class Client:
    """Drives one delegation; produces outgoing messages and digests outcomes."""

    def __init__(self, secret: ClientSecret):
        self.secret = secret
        self.grid = grid_angles(secret.grid_n)
        n_steps = len(secret.pattern.steps)
        self.eff_outcomes = [0] * n_steps
        self.payload_bits = [0] * n_steps
        self.transcript = ProtocolTranscript()

    # -- message producers ----------------------------------------------------

    def prepare_ancilla(self, slot_idx: int, role: str) -> Message:
        """Step-1 style quantum message for the given round of a slot."""
        slot = self.secret.pattern.slots[slot_idx]
        d = self.secret.draws[slot_idx]
        if role == "gamma":
            gamma = self.grid[d.gamma_index] + d.r_payload * math.pi
            ket = param_state("+", gamma, 0.0)
        elif role == "assist":
            bit = d.r_assist if "gamma" in slot.roles else d.r_payload
            ket = param_state("+", bit * math.pi, 0.0)
        elif role == "couple":
            anc = CZ_SLOT_ANCILLA
            ket = param_state("+", anc.gamma + d.r_payload * math.pi, anc.delta)
            self.payload_bits[slot.roles["couple"]] = d.r_payload
        else:
            raise ValueError(f"no ancilla round for role {role!r}")
        return Message("ANCILLA", slot_idx, payload=tuple(ket.amplitudes))

    def angle_message(self, slot_idx: int) -> Message:
        """Step-3 style basis angle, folding the secret and its hiding."""
        slot = self.secret.pattern.slots[slot_idx]
        d = self.secret.draws[slot_idx]
        gamma_eff = self.grid[d.gamma_index] + d.r_payload * math.pi

        def parity(bits: frozenset[int]) -> int:
            p = 0
            for i in bits:
                if i >= 1 << 20:
                    p ^= self.payload_bits[i - (1 << 20)]
                else:
                    p ^= self.eff_outcomes[i]
            return p

        theta = slot.theta_sign * slot.theta_prime
        if parity(slot.theta_negate):
            theta = -theta
        gterm = -gamma_eff
        if parity(slot.gamma_negate):
            gterm = -gterm
        theta = theta + gterm + d.r_angle * math.pi
        k = round((theta % TWO_PI) / (TWO_PI / self.secret.grid_n)) % self.secret.grid_n
        self.transcript.client_log.append(
            {
                "slot": slot_idx,
                "kind": slot.kind,
                "theta_prime": slot.theta_prime,
                "gamma_index": d.gamma_index,
                "r_payload": d.r_payload,
                "r_angle": d.r_angle,
                "theta_sign": slot.theta_sign,
            }
        )
        return Message("ANGLE", slot_idx, theta_grid=k)

    # -- outcome digestion ------------------------------------------------------

    def record(self, slot_idx: int, role: str, outcome: int):
        slot = self.secret.pattern.slots[slot_idx]
        d = self.secret.draws[slot_idx]
        step = slot.roles[role]
        eff = outcome
        if role == "assist" and "gamma" in slot.roles:
            eff ^= d.r_assist
        elif role == "assist":
            eff ^= d.r_payload  # standalone assistant slot
        elif role == "theta":
            eff ^= d.r_angle
        self.eff_outcomes[step] = eff

    def final_frame(self) -> tuple[str, ...]:
        return self.secret.pattern.correction_for(
            tuple(self.eff_outcomes), tuple(self.payload_bits)
        )


def slot_rounds(slot) -> tuple[tuple[str, str], ...]:
    """Ordered (role, message kind) rounds composing one slot."""
    if slot.kind == "J":
        return (("gamma", "ANCILLA"), ("assist", "ANCILLA"), ("theta", "ANGLE"))
    if slot.kind in ("RX", "RZ"):
        return (("gamma", "ANCILLA"), ("theta", "ANGLE"))
    if slot.kind == "ASSIST":
        return (("assist", "ANCILLA"),)
    if slot.kind == "CZ2":
        return (("couple", "ANCILLA"),)
    raise ValueError(slot.kind)


# ---------------------------------------------------------------------------
# server
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ServerStepShape:
    """Secret-free description of one step: where to couple and what message
    kind resolves its basis."""

    targets: tuple[int, ...]
    entangler_labels: tuple[str, ...]
    expects: str  # 'ANCILLA' | 'ANGLE'
    basis_phi: float = 0.0


def pattern_shape(pattern: GatePattern) -> tuple[ServerStepShape, ...]:
    shapes = []
    angle_steps = {
        slot.roles["theta"] for slot in pattern.slots if "theta" in slot.roles
    }
    for i, step in enumerate(pattern.steps):
        shapes.append(
            ServerStepShape(
                step.targets,
                step.entangler_labels,
                "ANGLE" if i in angle_steps else "ANCILLA",
                step.basis_phi,
            )
        )
    return tuple(shapes)


def server_step(
    state: RegisterState,
    msg: Message,
    targets,
    entangler_labels,
    grid_n: int = DEFAULT_GRID,
    outcome=None,
    rng=None,
    expect: str | None = None,
):
    """Execute one step from a message: couple the (given or standard) ancilla
    to the targets and measure.

    Returns (new_state, OUTCOME message, branch probability).
    """
    if expect is not None and msg.kind != expect:
        raise ProtocolOrderError(f"expected a {expect} message, got {msg.kind}")
    if msg.kind == "ANCILLA":
        payload = np.array(msg.payload, dtype=complex)
        theta = 0.0
    elif msg.kind == "ANGLE":
        payload = np.array([1.0, 0.0], dtype=complex)  # standard ancilla
        theta = grid_angles(grid_n)[msg.theta_grid]
    else:
        raise ProtocolOrderError("server received an OUTCOME message")

    n = state.register.num_qubits
    step = AdqcStep(
        tuple(targets),
        tuple(entangler_labels),
        AncillaSpec(0.0, 0.0),
        AdaptiveAngle.constant(theta),
    )
    ops = _branch_ops_with_payload(step, theta, n, payload)
    vecs = [op @ state.register.amplitudes for op in ops]
    probs = [float(np.vdot(v, v).real) for v in vecs]
    if outcome is None:
        if rng is None:
            raise ValueError("sampling requires an rng")
        s = 0 if rng.random() < probs[0] else 1
    else:
        s = int(outcome)
        if probs[s] < 1e-12:
            raise ValueError("forced branch has vanishing probability")
    new_state = replace(
        state,
        register=PureState(n, vecs[s]),
        outcome_log=state.outcome_log + (s,),
    )
    return new_state, Message("OUTCOME", msg.slot, bit=s), probs[s]


def _branch_ops_with_payload(step, theta, n, payload):
    """Branch operators of a step with an explicit physical ancilla payload."""
    ents = [preset(lbl) for lbl in step.entangler_labels]
    anc_pos = n
    total = np.eye(2 ** (n + 1), dtype=complex)
    for tgt, ent in zip(step.targets, ents):
        total = _embed_two(assemble_entangler(ent), anc_pos, tgt, n + 1) @ total
    last_wa = ents[-1].frame.w_a
    basis = MeasBasis(theta, step.basis_phi)
    bras = [last_wa @ b.amplitudes for b in basis.bra_states()]
    dim = 2**n
    t = total.reshape(dim, 2, dim, 2)
    return [np.einsum("a,iajb,b->ij", b.conj(), t, payload) for b in bras]


class Server:
    """Honest server: executes messages against the pattern shape in order."""

    def __init__(self, shape, num_qubits: int, input_state=None, grid_n: int = DEFAULT_GRID, seed=None):
        self.shape = tuple(shape)
        self.grid_n = grid_n
        self.state = init_register(num_qubits, input_state if input_state is not None else "0" * num_qubits)
        self.cursor = 0
        self.rng = np.random.default_rng(seed)

    def handle(self, msg: Message, outcome=None) -> Message:
        if self.cursor >= len(self.shape):
            raise ProtocolOrderError("protocol already finished")
        sh = self.shape[self.cursor]
        self.state, out, prob = server_step(
            self.state,
            msg,
            sh.targets,
            sh.entangler_labels,
            grid_n=self.grid_n,
            outcome=outcome,
            rng=self.rng,
            expect=sh.expects,
        )
        self.last_probability = prob
        self.cursor += 1
        return out


# ---------------------------------------------------------------------------
# delegation driver
# ---------------------------------------------------------------------------


def client_prepare_ancilla(client: Client, slot_idx: int, role: str = "gamma") -> Message:
    return client.prepare_ancilla(slot_idx, role)


def client_angle(client: Client, slot_idx: int, s: int) -> Message:
    """The basis-angle message, given the hidden-rotation round's outcome."""
    client.record(slot_idx, "gamma", s)
    return client.angle_message(slot_idx)


def client_postprocess(client: Client, s_prime: int, slot_idx: int) -> int:
    """Invert the rotation-round outcome when the angle carried a half-turn."""
    return s_prime ^ client.secret.draws[slot_idx].r_angle


@dataclass(frozen=True)
class DelegationResult:
    final_state: PureState
    reference_state: PureState
    fidelity: float
    transcript: ProtocolTranscript
    worst_branch_fidelity: float | None = None


def run_delegation(
    secret: ClientSecret,
    seed=None,
    input_state=None,
    mode: str = "sample",
) -> DelegationResult:
    """Execute the full delegated run.

    ``mode='sample'`` plays one seeded trajectory; ``mode='enumerate'`` expands
    every measurement branch slot by slot, asserting that all branches agree
    after correction before carrying one representative forward, and reports
    the worst branch fidelity.
    """
    pattern = secret.pattern
    n = pattern.num_qubits
    client = Client(secret)
    shape = pattern_shape(pattern)
    reference = PureState(
        n,
        pattern.target
        @ init_register(n, input_state if input_state is not None else "0" * n).register.amplitudes,
    )

    if mode == "sample":
        server = Server(shape, n, input_state, secret.grid_n, seed)
        _dialogue(client, server)
        frame = client.final_frame()
        final = _apply_frame_vec(server.state.register, frame)
        fid = final.fidelity(reference)
        return DelegationResult(final, reference, fid, client.transcript)

    if mode != "enumerate":
        raise ValueError(f"unknown mode {mode!r}")

    worst = 1.0
    server = Server(shape, n, input_state, secret.grid_n, seed=0)
    state = server.state.register.amplitudes
    start = 0
    for slot_idx, slot in enumerate(pattern.slots):
        rounds = slot_rounds(slot)
        k = len(rounds)
        combos = []
        for m in range(2**k):
            outs = [(m >> (k - 1 - j)) & 1 for j in range(k)]
            probe = Client(secret)
            probe.eff_outcomes = list(client.eff_outcomes)
            probe.payload_bits = list(client.payload_bits)
            st = PureState(n, state)
            srv = Server(shape, n, st, secret.grid_n, seed=0)
            srv.cursor = start
            srv.state = replace(srv.state, outcome_log=(0,) * start)
            p = 1.0
            ok = True
            for j, (role, kind) in enumerate(rounds):
                msg = (
                    probe.prepare_ancilla(slot_idx, role)
                    if kind == "ANCILLA"
                    else probe.angle_message(slot_idx)
                )
                try:
                    out = srv.handle(msg, outcome=outs[j])
                except ValueError:
                    ok = False
                    break
                pr = _last_branch_probability(srv)
                p *= pr
                probe.record(slot_idx, role, out.bit)
            if not ok:
                continue
            boundary = pattern.slot_boundaries[slot_idx]
            frame = tuple(
                c.pauli(tuple(probe.eff_outcomes), tuple(probe.payload_bits))
                for c in boundary
            )
            combos.append((outs, p, _apply_frame_vec(srv.state.register, frame), probe))
        total = sum(p for _, p, _, _ in combos)
        if abs(total - 1.0) > 1e-9:
            raise RuntimeError(f"slot {slot_idx} branch probabilities sum to {total}")
        base = combos[0][2]
        for outs, p, vec, _ in combos[1:]:
            worst = min(worst, vec.fidelity(base))
        # carry the first combo forward
        _, _, _, probe0 = combos[0]
        client.eff_outcomes = probe0.eff_outcomes
        client.payload_bits = probe0.payload_bits
        # replay the first combo on the real server to extend the transcript
        srv = Server(shape, n, PureState(n, state), secret.grid_n, seed=0)
        srv.cursor = start
        srv.state = replace(srv.state, outcome_log=(0,) * start)
        for j, (role, kind) in enumerate(slot_rounds(slot)):
            msg = (
                client.prepare_ancilla(slot_idx, role)
                if kind == "ANCILLA"
                else client.angle_message(slot_idx)
            )
            client.transcript.messages.append(msg)
            out = srv.handle(msg, outcome=combos[0][0][j])
            client.transcript.messages.append(out)
            client.record(slot_idx, role, out.bit)
        state = srv.state.register.amplitudes
        start += k

    frame = client.final_frame()
    final = _apply_frame_vec(PureState(n, state), frame)
    fid = final.fidelity(reference)
    return DelegationResult(final, reference, fid, client.transcript, min(worst, fid))


def _dialogue(client: Client, server: Server):
    for slot_idx, slot in enumerate(client.secret.pattern.slots):
        for role, kind in slot_rounds(slot):
            msg = (
                client.prepare_ancilla(slot_idx, role)
                if kind == "ANCILLA"
                else client.angle_message(slot_idx)
            )
            client.transcript.messages.append(msg)
            out = server.handle(msg)
            client.transcript.messages.append(out)
            client.record(slot_idx, role, out.bit)


def _last_branch_probability(server: Server) -> float:
    return server.last_probability


def _apply_frame_vec(state: PureState, frame) -> PureState:
    op = np.array([[1.0]], dtype=complex)
    for name in frame:
        op = np.kron(op, PAULIS[name])
    return PureState(state.num_qubits, op @ state.amplitudes)


# ---------------------------------------------------------------------------
# blindness audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditReport:
    grid_n: int
    ancilla_trace_distance: float
    angle_max_nonuniformity: float
    angle_tvd: float
    output_diag_error: float
    output_gamma_spread: float
    passed: bool


def audit_blindness(
    grid_n: int = DEFAULT_GRID,
    theta_prime: float = math.pi / 4,
    theta_prime_alt: float = 3 * math.pi / 4,
    input_theta: float = 2 * math.pi / 3,
    input_phi: float = math.pi / 5,
    always_r0: bool = False,
) -> AuditReport:
    """Exhaustive blindness checks on the rotation-slot dialogue.

    (a) For every hidden-rotation value the ancilla payload averaged over the
    client's coin is maximally mixed.  (b) The basis-angle message is exactly
    uniform on the grid and its distribution is independent of the secret
    angle.  (c) After the hidden-rotation round the register state averaged
    over the coin is the same fixed diagonal matrix for every hidden value.
    ``always_r0`` models a sabotaged client that never flips its payload.
    """
    grid = grid_angles(grid_n)
    rs = (0,) if always_r0 else (0, 1)

    # (a) payload mixing, per fixed gamma
    eye_half = DensityMatrix(1, I2 / 2)
    worst_td = 0.0
    for g in grid:
        avg = np.zeros((2, 2), dtype=complex)
        for r in (0, 1):
            if always_r0:
                r = 0
            ket = param_state("+", g + r * math.pi, 0.0).amplitudes
            avg += 0.5 * np.outer(ket, ket.conj())
        rho = DensityMatrix(1, (avg + avg.conj().T) / 2 / np.trace(avg).real)
        worst_td = max(worst_td, trace_distance(rho, eye_half))

    # (b) angle distribution: theta = s_theta*theta' - (-1)^{s} gamma + r pi
    def angle_distribution(tp: float) -> np.ndarray:
        counts = np.zeros(grid_n)
        weight = 1.0 / (grid_n * len(rs) * 2 * 2)
        for gi in range(grid_n):
            for r_pay in rs:
                gamma_eff = grid[gi] + r_pay * math.pi
                for s in (0, 1):  # hidden-round outcome, probability 1/2 each
                    for r_ang in (0, 1):
                        theta = tp - (-1.0 if s else 1.0) * gamma_eff + r_ang * math.pi
                        k = round((theta % TWO_PI) / (TWO_PI / grid_n)) % grid_n
                        counts[k] += weight
        return counts

    da = angle_distribution(theta_prime)
    db = angle_distribution(theta_prime_alt)
    nonuni = float(np.abs(da - 1.0 / grid_n).max())
    tvd = float(0.5 * np.abs(da - db).sum())

    # (c) averaged post-round register state in the |+/-> basis
    hadamard = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    psi = (
        math.cos(input_theta / 2) * np.array([1, 1], dtype=complex) / math.sqrt(2)
        + math.sin(input_theta / 2)
        * complex(math.cos(input_phi), math.sin(input_phi))
        * np.array([1, -1], dtype=complex)
        / math.sqrt(2)
    )
    expected = np.diag(
        [math.cos(input_theta / 2) ** 2, math.sin(input_theta / 2) ** 2]
    ).astype(complex)
    diag_err = 0.0
    rhos = []
    for g in grid:
        for s in (0, 1):
            avg = np.zeros((2, 2), dtype=complex)
            for r in (0, 1):
                if always_r0:
                    r = 0
                k = np.linalg.matrix_power(PAULIS["X"], s) @ rotation(
                    "x", (-1.0 if s else 1.0) * (g + r * math.pi)
                )
                v = k @ psi
                avg += 0.5 * np.outer(v, v.conj())
            rho_pm = hadamard @ avg @ hadamard  # to the |+/-> basis
            rhos.append(rho_pm)
            diag_err = max(diag_err, float(np.abs(rho_pm - expected).max()))
    spread = 0.0
    for r1 in rhos:
        spread = max(spread, float(np.abs(r1 - rhos[0]).max()))

    passed = worst_td <= 1e-12 and nonuni == 0.0 and tvd == 0.0 and diag_err <= 1e-10
    return AuditReport(grid_n, worst_td, nonuni, tvd, diag_err, spread, passed)
