"""Error-correcting codes, recovery channels, and noise generators.

The recovery operation is a syndrome-controlled channel Phi built from
Kraus operators: measure which error class a basis state belongs to,
then flip it back to the nearest codeword.  Acting with Phi at Poisson
rate kappa gives the correction generator kappa * (Phi - id), which is
combined with either

* a Markovian bit-flip Lindbladian (rate lambda per qubit), or
* a Hamiltonian pair coupling gamma * X_system x X_bath per qubit,
  with the bath qubits kept in the register (non-Markovian case).

Superoperators are stored as dense matrices in the column-stacking
convention of :mod:`cqec.tensor_core` whenever the register is small
enough (here: up to 4 qubits / 256x256 superoperator).  The six-qubit
pair-coupled scenario would need a 4096x4096 matrix, so it is handled
by a matrix-free generator object with the same ``apply`` interface.
"""

from dataclasses import dataclass, field

import numpy as np

from .tensor_core import (
    QubitRegister,
    basis_ket,
    pauli_on,
    projector,
    vectorize,
    devectorize,
)


@dataclass(frozen=True)
class CodeSpec:
    """A bit-flip stabilizer code described by its syndrome lookup tables.

    `syndrome_of[s]` labels the error class of computational basis state s,
    `corrected[s]` is the basis state the recovery maps s to.  The recovery
    channel acts on matrix units as

        Phi(|s><s'|) = delta(syndrome_of[s], syndrome_of[s']) |c(s)><c(s')|

    so its Kraus operators are K_v = sum_{s: syndrome_of[s]=v} |c(s)><s|.
    """

    name: str
    system_count: int
    logical_zero: int
    logical_one: int | None
    syndrome_of: tuple
    corrected: tuple

    def __post_init__(self):
        d = 2**self.system_count
        assert len(self.syndrome_of) == d and len(self.corrected) == d

    def kraus(self):
        d = 2**self.system_count
        ops = []
        for v in sorted(set(self.syndrome_of)):
            k = np.zeros((d, d), dtype=complex)
            for s in range(d):
                if self.syndrome_of[s] == v:
                    k[self.corrected[s], s] = 1.0
            ops.append(k)
        return ops

    def code_projector(self):
        d = 2**self.system_count
        p = projector(basis_ket(self.logical_zero, self.system_count))
        if self.logical_one is not None:
            p = p + projector(basis_ket(self.logical_one, self.system_count))
        return p


def trivial_code():
    """Single-qubit 'code' whose recovery resets everything to |0>."""
    return CodeSpec(
        name="trivial",
        system_count=1,
        logical_zero=0,
        logical_one=None,
        syndrome_of=(0, 1),
        corrected=(0, 0),
    )


def bitflip3_code():
    """Three-qubit repetition code against bit flips (codewords |000>, |111>).

    Syndrome classes pair each single-flip state with the codeword reached
    by flipping the complementary two qubits: {100, 011}, {010, 101},
    {001, 110}; majority vote sends each class member to its nearest
    codeword.
    """
    syndrome = [0] * 8
    corrected = [0] * 8
    for s in range(8):
        w = bin(s).count("1")
        if w <= 1:
            corrected[s] = 0b000
        else:
            corrected[s] = 0b111
        # class label: which qubit the majority vote flips (0 = none)
        flip = s ^ corrected[s]
        syndrome[s] = {0b000: 0, 0b100: 1, 0b010: 2, 0b001: 3}[flip]
    return CodeSpec(
        name="bitflip3",
        system_count=3,
        logical_zero=0b000,
        logical_one=0b111,
        syndrome_of=tuple(syndrome),
        corrected=tuple(corrected),
    )


# ---------------------------------------------------------------------------
# superoperators
# ---------------------------------------------------------------------------


@dataclass
class Superoperator:
    """Dense superoperator matrix with a semantic tag.

    kind = "channel": completely positive trace-preserving map (columns of
    the matrix conserve trace).  kind = "generator": derivative of a
    trace-preserving evolution (trace-annihilating).
    """

    matrix: np.ndarray
    kind: str
    hilbert_dim: int
    kappa: float | None = None
    register: QubitRegister | None = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        n = self.hilbert_dim**2
        if self.matrix.shape != (n, n):
            raise ValueError(f"expected {(n, n)} matrix, got {self.matrix.shape}")
        if self.kind not in ("channel", "generator"):
            raise ValueError(f"unknown superoperator kind {self.kind!r}")

    @property
    def superop_dim(self):
        return self.hilbert_dim**2

    def apply(self, rho):
        return devectorize(self.matrix @ vectorize(rho))

    def trace_defect(self):
        """Max deviation of column trace-sums from the kind's requirement."""
        vec_id = vectorize(np.eye(self.hilbert_dim))
        col = vec_id @ self.matrix
        target = vec_id if self.kind == "channel" else np.zeros_like(vec_id)
        return float(np.max(np.abs(col - target)))


def apply_kraus(kraus, rho):
    out = np.zeros_like(np.asarray(rho, dtype=complex))
    for k in kraus:
        out += k @ rho @ k.conj().T
    return out


def kraus_superop_matrix(kraus):
    d = kraus[0].shape[0]
    m = np.zeros((d * d, d * d), dtype=complex)
    for k in kraus:
        m += np.kron(k.conj(), k)
    return m


def strong_map(code):
    """The recovery channel Phi of a code as a dense superoperator."""
    return Superoperator(
        matrix=kraus_superop_matrix(code.kraus()),
        kind="channel",
        hilbert_dim=2**code.system_count,
    )


def weak_map(code, epsilon):
    """(1 - epsilon) * id + epsilon * Phi; the channel applied once per
    correlation time when the recovery acts weakly."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    d = 2**code.system_count
    eye = np.eye(d * d, dtype=complex)
    m = (1.0 - epsilon) * eye + epsilon * kraus_superop_matrix(code.kraus())
    return Superoperator(matrix=m, kind="channel", hilbert_dim=d)


def lifted_kraus(code, register):
    """Kraus operators of Phi (x) id_bath on a system+bath register."""
    assert register.system_count == code.system_count
    eye_bath = np.eye(2**register.bath_count, dtype=complex)
    return [np.kron(k, eye_bath) for k in code.kraus()]


def correction_generator(code, register):
    """Gamma = Phi - id on the full register (rate factored out)."""
    d = register.dim
    m = kraus_superop_matrix(lifted_kraus(code, register)) - np.eye(d * d, dtype=complex)
    return Superoperator(matrix=m, kind="generator", hilbert_dim=d)


def hamiltonian_generator(h):
    """-i[H, .] as a dense superoperator; H must be Hermitian."""
    h = np.asarray(h, dtype=complex)
    assert np.max(np.abs(h - h.conj().T)) < 1e-12, "Hamiltonian must be Hermitian"
    d = h.shape[0]
    eye = np.eye(d, dtype=complex)
    m = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    return Superoperator(matrix=m, kind="generator", hilbert_dim=d)


def lindblad_generator(h, jumps):
    """Lindblad generator with Hamiltonian `h` and `jumps` = [(L, rate), ...].

    drho/dt = -i[H, rho] + sum_j rate_j (L rho L^dag - (L^dag L rho + rho L^dag L)/2)
    """
    gen = hamiltonian_generator(h)
    d = gen.hilbert_dim
    eye = np.eye(d, dtype=complex)
    m = gen.matrix
    for op, rate in jumps:
        if rate < 0:
            raise ValueError(f"negative jump rate {rate}")
        op = np.asarray(op, dtype=complex)
        ldl = op.conj().T @ op
        m = m + rate * (
            np.kron(op.conj(), op)
            - 0.5 * (np.kron(eye, ldl) + np.kron(ldl.T, eye))
        )
    return Superoperator(matrix=m, kind="generator", hilbert_dim=d)


# ---------------------------------------------------------------------------
# model parameters and named scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Rates of the model: lambda (Markovian flip rate per qubit), gamma
    (system-bath coupling per qubit pair), kappa (correction rate)."""

    lam: float = 0.0
    gamma: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        for name in ("lam", "gamma", "kappa"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def r(self):
        """kappa / lambda, the dimensionless correction rate (Markovian)."""
        if self.lam <= 0:
            raise ValueError("r undefined: lambda is zero")
        return self.kappa / self.lam

    @property
    def R(self):
        """kappa / gamma, the dimensionless correction rate (Hamiltonian)."""
        if self.gamma <= 0:
            raise ValueError("R undefined: gamma is zero")
        return self.kappa / self.gamma


def pair_hamiltonian(code, gamma):
    """H = gamma * sum_j X_(system j) X_(bath j) on the doubled register."""
    n = code.system_count
    d = 2 ** (2 * n)
    h = np.zeros((d, d), dtype=complex)
    for j in range(n):
        h += pauli_on("X", j, 2 * n) @ pauli_on("X", n + j, 2 * n)
    return gamma * h


class PairCoupledGenerator:
    """Matrix-free generator for a code with one bath qubit per system qubit.

    rho -> -i[H, rho] + kappa (Phi (x) id - id)(rho)  with
    H = gamma * sum_j X_(system j) X_(bath j) on the 2n-qubit register.

    The recovery is applied through the syndrome lookup tables of the code
    (16 small block copies for the three-qubit code) instead of Kraus
    matrix products, which keeps the 64-dimensional right-hand side cheap.
    """

    kind = "generator"

    def __init__(self, code, gamma, kappa):
        n = code.system_count
        self.code = code
        self.gamma = float(gamma)
        self.kappa = float(kappa)
        self.register = QubitRegister(n, n)
        self.hamiltonian = pair_hamiltonian(code, gamma)
        # (source, source', target, target') index quadruples of the recovery
        ds = 2**n
        self._quads = [
            (s, sp, code.corrected[s], code.corrected[sp])
            for s in range(ds)
            for sp in range(ds)
            if code.syndrome_of[s] == code.syndrome_of[sp]
        ]

    @property
    def hilbert_dim(self):
        return self.register.dim

    @property
    def superop_dim(self):
        return self.register.dim**2

    def apply_correction(self, rho):
        """(Phi (x) id_bath)(rho) via syndrome-block copies."""
        ds = 2**self.code.system_count
        db = self.register.dim // ds
        r4 = np.asarray(rho, dtype=complex).reshape(ds, db, ds, db)
        out = np.zeros_like(r4)
        for s, sp, c, cp in self._quads:
            out[c, :, cp, :] += r4[s, :, sp, :]
        return out.reshape(self.register.dim, self.register.dim)

    def apply(self, rho):
        h = self.hamiltonian
        out = -1j * (h @ rho - rho @ h)
        if self.kappa:
            out = out + self.kappa * (self.apply_correction(rho) - rho)
        return out


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    register: QubitRegister
    noise: str  # "lindblad" or "pair-bath"
    time_unit: str  # "lambda" or "gamma"
    code_factory: object = field(repr=False, default=None)

    def code(self):
        return self.code_factory()


SCENARIOS = {
    "markovian-1q": ScenarioSpec(
        "markovian-1q", QubitRegister(1, 0), "lindblad", "lambda", trivial_code
    ),
    "hamiltonian-1q": ScenarioSpec(
        "hamiltonian-1q", QubitRegister(1, 1), "pair-bath", "gamma", trivial_code
    ),
    "markovian-3q": ScenarioSpec(
        "markovian-3q", QubitRegister(3, 0), "lindblad", "lambda", bitflip3_code
    ),
    "hamiltonian-3q": ScenarioSpec(
        "hamiltonian-3q", QubitRegister(3, 3), "pair-bath", "gamma", bitflip3_code
    ),
}


def scenario_rho0(name):
    """Initial state: logical zero, with any bath qubits maximally mixed."""
    spec = SCENARIOS[name]
    code = spec.code()
    sys0 = projector(basis_ket(code.logical_zero, code.system_count))
    nb = spec.register.bath_count
    if nb == 0:
        return sys0
    return np.kron(sys0, np.eye(2**nb, dtype=complex) / 2**nb)


def total_generator(name, params):
    """Full evolution generator (noise + correction) for a named scenario.

    Returns a dense :class:`Superoperator` for registers of up to four
    qubits, and a matrix-free :class:`PairCoupledGenerator` for the
    six-qubit pair-coupled scenario.
    """
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    spec = SCENARIOS[name]
    code = spec.code()
    reg = spec.register

    if spec.noise == "lindblad":
        n = reg.system_count
        h = np.zeros((reg.dim, reg.dim), dtype=complex)
        jumps = [(pauli_on("X", j, n), params.lam) for j in range(n)]
        gen = lindblad_generator(h, jumps)
        m = gen.matrix + params.kappa * correction_generator(code, reg).matrix
        return Superoperator(m, "generator", reg.dim, kappa=params.kappa, register=reg)

    if name == "hamiltonian-1q":
        h = pair_hamiltonian(code, params.gamma)
        m = hamiltonian_generator(h).matrix
        m = m + params.kappa * correction_generator(code, reg).matrix
        return Superoperator(m, "generator", reg.dim, kappa=params.kappa, register=reg)

    return PairCoupledGenerator(code, params.gamma, params.kappa)
