"""Closed-form solutions and analytic predictions for the continuously
corrected bit-flip models.

Everything here is a pure function of dimensionless products (lambda*t,
gamma*t, r = kappa/lambda, R = kappa/gamma); there is no global unit
system.  Functions accept scalars or numpy arrays for the time argument.

Naming: "markov" refers to the single-qubit trivial code under Lindblad
bit-flip noise, "nonmarkov" to the same code coupled to a bath qubit via
gamma * X (x) X, "markov3q" to the three-qubit repetition code under
independent Lindblad flips, and the "approx" fidelity forms are the
large-R slow-timescale approximations for the pair-coupled three-qubit
model (exact model is in :mod:`cqec.reduced_model`).
"""

import warnings
from dataclasses import dataclass

import numpy as np


class ApproximationWarning(UserWarning):
    """Raised when an asymptotic formula is evaluated outside its regime."""


@dataclass(frozen=True)
class Approximation:
    """Value of an asymptotic formula plus its validity annotation.

    precision: relative error scale of the approximation (here ~ 1/R);
    horizon: dimensionless time (gamma*t) beyond which the form is not
    to be trusted (here ~ R^3, where the neglected corrections to the
    slow eigenvalues accumulate).
    """

    value: np.ndarray
    precision: float
    horizon: float


@dataclass(frozen=True)
class SingleQubitState:
    """Fidelity/coherence pair (alpha, beta) of the single-qubit models.

    beta is the hidden coherence feeding fidelity loss in the Hamiltonian
    model; physical states satisfy |beta| <= sqrt(alpha(1-alpha)).
    """

    alpha: float
    beta: float

    def __post_init__(self):
        bound = np.sqrt(max(self.alpha * (1.0 - self.alpha), 0.0))
        if abs(self.beta) > bound + 1e-9:
            raise ValueError(f"|beta|={abs(self.beta):.3e} exceeds sqrt(a(1-a))={bound:.3e}")


@dataclass(frozen=True)
class Markov3qCoeffs:
    """Mixture weights over 0-, 1-, 2-, 3-qubit error sectors."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for name in "abcd":
            if getattr(self, name) < -1e-10:
                raise ValueError(f"negative weight {name}={getattr(self, name):.3e}")
        s = self.a + self.b + self.c + self.d
        if abs(s - 1.0) > 1e-10:
            raise ValueError(f"weights sum to {s}, not 1")


@dataclass(frozen=True)
class ZenoEstimate:
    """Short-time quadratic-decay summary: 1 - F(t) ~ C t^2.

    dt_z is a chosen time scale and alpha_z = 1 - C dt_z^2 the fidelity
    retained over it.
    """

    c: float
    dt_z: float
    alpha_z: float

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("quadratic decay coefficient must be >= 0")
        if abs(self.alpha_z - (1.0 - self.c * self.dt_z**2)) > 1e-12:
            raise ValueError("alpha_z inconsistent with 1 - C dt_z^2")


# ---------------------------------------------------------------------------
# single qubit
# ---------------------------------------------------------------------------


def alpha_markov_1q(t, lam, kappa):
    """Fidelity of the continuously reset qubit under bit-flip noise.

    alpha(t) = (1 - alpha*) e^{-(kappa+2 lambda) t} + alpha*   with
    alpha* = 1 - 1/(2+r), r = kappa/lambda (alpha(0) = 1).
    """
    if lam < 0 or kappa < 0 or (lam == 0 and kappa == 0):
        raise ValueError("need lambda, kappa >= 0 and not both zero")
    star = (kappa + lam) / (kappa + 2.0 * lam)
    return (1.0 - star) * np.exp(-(kappa + 2.0 * lam) * np.asarray(t)) + star


def alpha_star_markov(r):
    """Equilibrium fidelity 1 - 1/(2+r) of the Markovian single-qubit model."""
    if r < 0:
        raise ValueError("r must be >= 0")
    return 1.0 - 1.0 / (2.0 + r)


def alpha_star_nonmarkov(big_r):
    """Equilibrium fidelity 1 - 2/(4+R^2) of the pair-coupled single qubit."""
    if big_r < 0:
        raise ValueError("R must be >= 0")
    return 1.0 - 2.0 / (4.0 + big_r**2)


def alpha_nonmarkov_1q(t, gamma, kappa):
    """Fidelity of the continuously reset qubit coupled to one bath qubit.

    With D = 4 gamma^2 + kappa^2:

    alpha(t) = (2 gamma^2 + kappa^2)/D
               + e^{-kappa t} [ (kappa gamma / D) sin(2 gamma t)
                                + (2 gamma^2 / D) cos(2 gamma t) ]

    Reduces to cos^2(gamma t) at kappa = 0.
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    t = np.asarray(t)
    d = 4.0 * gamma**2 + kappa**2
    osc = (kappa * gamma / d) * np.sin(2 * gamma * t) + (2 * gamma**2 / d) * np.cos(
        2 * gamma * t
    )
    return (2.0 * gamma**2 + kappa**2) / d + np.exp(-kappa * t) * osc


def beta_nonmarkov_1q(t, gamma, kappa):
    """Hidden-coherence partner of :func:`alpha_nonmarkov_1q`.

    Obtained from beta = (kappa (1-alpha) - dalpha/dt) / (2 gamma):

    beta(t) = (kappa gamma / D)(1 - e^{-kappa t} cos 2 gamma t)
              + (2 gamma^2 / D) e^{-kappa t} sin 2 gamma t
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    t = np.asarray(t)
    d = 4.0 * gamma**2 + kappa**2
    e = np.exp(-kappa * t)
    return (kappa * gamma / d) * (1.0 - e * np.cos(2 * gamma * t)) + (
        2.0 * gamma**2 / d
    ) * e * np.sin(2 * gamma * t)


# ---------------------------------------------------------------------------
# three qubits, Markovian
# ---------------------------------------------------------------------------


def markov3q_exact_leak(t, lam, kappa):
    """Exact weight outside the code space, b(t) + c(t), for the repetition
    code under independent bit flips:

    b + c = (3/(4+r)) (1 - e^{-(4+r) lambda t}),  r = kappa/lambda.
    """
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    rate = 4.0 * lam + kappa
    return (3.0 * lam / rate) * (1.0 - np.exp(-rate * np.asarray(t)))


def markov3q_approx_a(t, lam, r):
    """Large-r approximation of the codeword weight: a ~ (1 + e^{-12 lambda t / r})/2.

    The encoded qubit decays roughly like a bare qubit with flip rate
    6 lambda / r; only meaningful for r >> 1.
    """
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    if r <= 0:
        raise ValueError("approximate form needs r > 0")
    return (1.0 + np.exp(-12.0 * lam * np.asarray(t) / r)) / 2.0


# ---------------------------------------------------------------------------
# three qubits, pair-coupled: slow-timescale fidelity forms and spectrum
# ---------------------------------------------------------------------------


def _check_regime(big_r):
    if big_r < 10:
        warnings.warn(
            f"slow-timescale form evaluated at R={big_r} < 10; precision is O(1/R)",
            ApproximationWarning,
            stacklevel=3,
        )


def fidelity_approx_lowest(t, gamma, big_r):
    """Lowest-order slow fidelity (1 + cos(24 gamma t / R^2))/2.

    Returns an :class:`Approximation` carrying precision ~1/R and the
    dimensionless-time horizon ~R^3 beyond which neglected corrections
    accumulate.
    """
    if gamma <= 0 or big_r <= 0:
        raise ValueError("need gamma > 0 and R > 0")
    _check_regime(big_r)
    value = (1.0 + np.cos(24.0 * gamma * np.asarray(t) / big_r**2)) / 2.0
    return Approximation(value=value, precision=1.0 / big_r, horizon=big_r**3)


def fidelity_approx_damped(t, gamma, big_r):
    """Slow fidelity with the envelope from the induced bit-flip channel:

    (1 + e^{-144 gamma t / R^3} cos(24 gamma t / R^2))/2
    """
    if gamma <= 0 or big_r <= 0:
        raise ValueError("need gamma > 0 and R > 0")
    _check_regime(big_r)
    t = np.asarray(t)
    value = (
        1.0
        + np.exp(-144.0 * gamma * t / big_r**3) * np.cos(24.0 * gamma * t / big_r**2)
    ) / 2.0
    return Approximation(value=value, precision=1.0 / big_r, horizon=big_r**3)


def predicted_spectrum(big_r, gamma=1.0):
    """The 13 predicted eigenvalues of the reduced coefficient matrix.

    Leading forms for large R (kappa = R gamma): one exact zero, two at
    -kappa, fast pairs -kappa +- 2i gamma, -kappa +- 4i gamma,
    -kappa +- i(sqrt(13)+3) gamma, -kappa +- i(sqrt(13)-3) gamma, and the
    slow conjugate pair +-i (24/R^2) gamma - (144/R^3) gamma.
    """
    if big_r <= 0:
        raise ValueError("R must be > 0")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    kappa = big_r * gamma
    s13 = np.sqrt(13.0)
    vals = [0.0, -kappa, -kappa]
    for w in (2.0, 4.0, s13 + 3.0, s13 - 3.0):
        vals.append(-kappa + 1j * w * gamma)
        vals.append(-kappa - 1j * w * gamma)
    slow_re = -144.0 * gamma / big_r**3
    slow_im = 24.0 * gamma / big_r**2
    vals.append(slow_re + 1j * slow_im)
    vals.append(slow_re - 1j * slow_im)
    return np.array(vals, dtype=complex)


# ---------------------------------------------------------------------------
# Zeno regime
# ---------------------------------------------------------------------------


def zeno_coefficient(h, rho_system0, rho_bath0):
    """Quadratic decay coefficient C of the uncorrected fidelity.

    For a system+bath Hamiltonian H and initial state P0 (x) rho_B with
    P0 a pure system projector,

        1 - F(t) = C t^2 + O(t^3),
        C = Tr{H^2 (P0 (x) rho_B)} - Tr{H (P0 (x) 1) H (P0 (x) rho_B)}.
    """
    h = np.asarray(h, dtype=complex)
    if np.max(np.abs(h - h.conj().T)) > 1e-12:
        raise ValueError("Hamiltonian must be Hermitian")
    p0 = np.asarray(rho_system0, dtype=complex)
    if np.max(np.abs(p0 @ p0 - p0)) > 1e-10:
        raise ValueError("initial system state must be a pure projector")
    rho_b = np.asarray(rho_bath0, dtype=complex)
    db = rho_b.shape[0]
    full0 = np.kron(p0, rho_b)
    p0_lift = np.kron(p0, np.eye(db, dtype=complex))
    if full0.shape != h.shape:
        raise ValueError("system (x) bath dimensions do not match H")
    c = np.trace(h @ h @ full0) - np.trace(h @ p0_lift @ h @ full0)
    assert abs(c.imag) < 1e-10
    return float(c.real)


def zeno_equilibrium(c, kappa):
    """Large-kappa equilibrium fidelity estimate 1 - 4C/kappa^2."""
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    return 1.0 - 4.0 * c / kappa**2


def ancilla_rate(g, tau_c):
    """Effective correction rate kappa = g^2 tau_c of an ancilla-mediated
    recovery: per-cycle success probability (g tau_c)^2 spent every tau_c
    (proportionality constant set to 1)."""
    if g <= 0 or tau_c <= 0:
        raise ValueError("need g > 0 and tau_c > 0")
    return g * g * tau_c


def zeno_estimate(h, rho_system0, rho_bath0, dt_z):
    """Bundle the Zeno coefficient with the fidelity retained over dt_z."""
    c = zeno_coefficient(h, rho_system0, rho_bath0)
    return ZenoEstimate(c=c, dt_z=dt_z, alpha_z=1.0 - c * dt_z**2)
