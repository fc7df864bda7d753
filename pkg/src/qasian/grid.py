"""Discretization of the reduced Asian-option PDE.

The pricing problem is posed on a single spatial coordinate eta (the
average-to-underlying ratio) and the reversed time tau1 = T - t.  This
module builds every discrete operator of the scheme: the central time
derivative with Dirichlet ends, the spectral (centered-DFT) space
derivatives, the diffusion and drift terms, the factorized diffusion
pieces A1 * A2, the boundary-driven right-hand side, and the assembled
Kronecker-structured linear system.

Conventions used throughout the package:

* The eta register holds cell-centered nodes eta_x = eta_max * s_x with
  s_x = -1 + delta_hat/2 + x*delta_hat, delta_hat = 2/2^n_eta, in
  ascending order.
* The centered DFT uses half-integer frequency/position indices in
  ascending order; it spans antiperiodic functions exp(i*pi*k*eta/eta_max)
  with half-integer k.
* Time nodes are the interior points tau1_t = (t+1)*delta_tau1 with
  delta_tau1 = T/(2^n_tau1 + 1); the boundary slices tau1 = 0 and
  tau1 = T both carry the initial profile psi0 and are folded into the
  right-hand side.
* The whole linear equation is rescaled by delta_tau1 so that the time
  term has entries +-1/2 and the spatial operators carry a delta_tau1
  prefactor.
"""

from dataclasses import dataclass
import json
import math

import numpy as np

from .errors import DimensionCapError, InfeasibleScaleError, ValidationError

#: Largest total dimension for which dense operators are materialized.
DENSE_CAP = 2 ** 12

KINDS = ("avg_rate_call", "avg_rate_put", "avg_strike_call", "avg_strike_put")


@dataclass(frozen=True)
class MarketParams:
    """Financial inputs of the pricing PDE.

    sigma : volatility (1/sqrt(time))
    r     : risk-free rate (1/time)
    q     : dividend yield (1/time)
    T     : expiry (time)
    K     : strike (price); used only by the payoff/price maps
    eta_max : half-width of the truncated eta domain (dimensionless)
    kind  : payoff family, one of KINDS
    """

    sigma: float
    r: float
    q: float
    T: float
    K: float
    eta_max: float
    kind: str = "avg_rate_call"

    def __post_init__(self):
        if self.sigma <= 0 and self.kind:  # sigma == 0 allowed only for oracles
            if self.sigma < 0:
                raise ValidationError("sigma must be >= 0")
        if self.T <= 0:
            raise ValidationError("T must be > 0")
        if self.eta_max <= 0:
            raise ValidationError("eta_max must be > 0")
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class GridSpec:
    """Qubit counts and lattice spacings of one discretization level."""

    n_eta: int
    n_tau1: int
    delta_eta_hat: float
    delta_eta: float
    delta_tau1: float
    Delta: float
    eps_target: float

    @property
    def N_eta(self):
        return 2 ** self.n_eta

    @property
    def N_tau1(self):
        return 2 ** self.n_tau1

    @property
    def dim(self):
        return self.N_tau1 * self.N_eta


@dataclass(frozen=True)
class OperatorSet:
    """All discrete operators of one system build.

    C_tau1 carries the raw 1/(2*delta_tau1) scale; C_eta1, C_eta2, A1
    have the global delta_tau1 rescaling absorbed, so the assembled
    system is delta_tau1*C_tau1 (x) I + I (x) (C_eta1 + C_eta2).
    """

    C_tau1: np.ndarray
    C_eta1: np.ndarray
    C_eta2: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    rhs_hat: np.ndarray
    norm_b: float


def _check_n_eta(n_eta):
    if n_eta < 2 or 2 ** n_eta % 4 != 0:
        raise ValidationError(
            "n_eta must be >= 2 so the eta point count is divisible by 4 "
            "(keeps payoff kinks off grid nodes)"
        )


def make_grid(params, n_eta, eps_target, scale_c=1.0, band=1.5, c_smooth=1.0,
              n_tau1_cap=24, Delta=None):
    """Choose the smallest feasible time register for a given eta register.

    The target time step is t_star = scale_c * delta_hat^2 * ln(1/eps) /
    sigma^2; a candidate n_tau1 is accepted when delta_tau1 <= band *
    t_star (the smallest such n_tau1 keeps the step within a factor
    ~2*band of the target whenever the target is reachable at all, and
    the one-sided test keeps low-volatility cases feasible, where even
    the coarsest admissible step T/3 sits below the target) and the
    smoothing inequality T*sigma^2*N_eta^2/N_tau1 >= c_smooth*ln(1/eps)
    holds.
    """
    _check_n_eta(n_eta)
    if not 0 < eps_target < 1:
        raise ValidationError("eps_target must lie in (0, 1)")
    log_term = math.log(1.0 / eps_target)
    delta_hat = 2.0 / 2 ** n_eta
    t_star = scale_c * delta_hat ** 2 * log_term / params.sigma ** 2
    if t_star <= 0:
        raise InfeasibleScaleError(
            "degenerate accuracy request: target time step is zero")
    N_eta = 2 ** n_eta
    for n_tau1 in range(1, n_tau1_cap + 1):
        delta_tau1 = params.T / (2 ** n_tau1 + 1)
        ratio = delta_tau1 / t_star
        in_band = ratio <= band
        smooth_ok = (params.T * params.sigma ** 2 * N_eta ** 2 / 2 ** n_tau1
                     >= c_smooth * log_term)
        if in_band and smooth_ok:
            if Delta is None:
                Delta = params.T / 4.0
            return GridSpec(
                n_eta=n_eta,
                n_tau1=n_tau1,
                delta_eta_hat=delta_hat,
                delta_eta=params.eta_max * delta_hat,
                delta_tau1=delta_tau1,
                Delta=Delta,
                eps_target=eps_target,
            )
    raise InfeasibleScaleError(
        f"no n_tau1 <= {n_tau1_cap} satisfies the spacing band and the "
        f"smoothing inequality for n_eta={n_eta}, eps={eps_target}")


def grid_spec_direct(params, n_eta, n_tau1, eps_target=1e-3, Delta=None):
    """Build a GridSpec with an explicitly chosen time register.

    Used by oracles, convergence studies and tests that need to pin both
    register sizes; skips the spacing-band search of make_grid.
    """
    _check_n_eta(n_eta)
    delta_hat = 2.0 / 2 ** n_eta
    if Delta is None:
        Delta = params.T / 4.0
    return GridSpec(
        n_eta=n_eta,
        n_tau1=n_tau1,
        delta_eta_hat=delta_hat,
        delta_eta=params.eta_max * delta_hat,
        delta_tau1=params.T / (2 ** n_tau1 + 1),
        Delta=Delta,
        eps_target=eps_target,
    )


def eta_nodes(spec, params):
    """Physical cell-centered eta nodes, ascending."""
    s = eta_hat_diagonal(spec.n_eta)
    return params.eta_max * s


def tau1_nodes(spec):
    """Interior tau1 nodes (t+1)*delta_tau1, t = 0..N_tau1-1."""
    return spec.delta_tau1 * np.arange(1, spec.N_tau1 + 1)


def build_time_derivative(spec):
    """Central time derivative with zero (Dirichlet) corners.

    (1/(2*delta_tau1)) * tridiag(+1 above, -1 below); antisymmetric.
    """
    N = spec.N_tau1
    D = np.zeros((N, N))
    idx = np.arange(N - 1)
    D[idx, idx + 1] = 1.0
    D[idx + 1, idx] = -1.0
    return D / (2.0 * spec.delta_tau1)


def eta_hat_diagonal(n_eta):
    """Diagonal of the normalized position operator eta/eta_max."""
    delta_hat = 2.0 / 2 ** n_eta
    x = np.arange(2 ** n_eta)
    return -1.0 + delta_hat / 2.0 + x * delta_hat


def build_eta_operator(spec):
    """Normalized position operator and its Z-string decomposition.

    Returns (diagonal matrix, {j: coefficient}) where the decomposition
    means eta_hat = sum_j coeff_j * Z_j, with Z_j acting on qubit j
    (bit j of the node index) as diag(+1, -1) on that bit.
    """
    n = spec.n_eta
    delta_hat = spec.delta_eta_hat
    diag = eta_hat_diagonal(n)
    pauli = {j: -(delta_hat / 2.0) * 2 ** j for j in range(n)}
    return np.diag(diag), pauli


def eta_from_pauli(pauli, n):
    """Reconstruct the diagonal from a Z-string decomposition (check aid)."""
    x = np.arange(2 ** n)
    diag = np.zeros(2 ** n)
    for j, c in pauli.items():
        bits = (x >> j) & 1
        diag += c * (1.0 - 2.0 * bits)
    return diag


def build_centered_dft(n):
    """Centered DFT over half-integer indices, ascending order; unitary."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    N = 2 ** n
    half = np.arange(N) - (N - 1) / 2.0
    phase = np.outer(half, half)
    return np.exp(-2j * np.pi * phase / N) / np.sqrt(N)


def build_spectral_derivative(spec, params):
    """Spectral first-derivative matrix on the eta grid.

    Delta_eta = i*(pi/(delta_hat*eta_max)) * F_c^dag eta_hat F_c, which
    differentiates the antiperiodic waves exp(i*pi*k*eta/eta_max)
    (half-integer k) exactly.  Anti-Hermitian by construction.
    """
    F = build_centered_dft(spec.n_eta)
    eta_hat = eta_hat_diagonal(spec.n_eta)
    scale = 1j * np.pi / (spec.delta_eta_hat * params.eta_max)
    return scale * (F.conj().T @ (eta_hat[:, None] * F))


def build_C_eta1(spec, params):
    """Diffusion operator, delta_tau1 rescaling absorbed.

    C_eta1 = delta_tau1 * (pi^2 sigma^2 / (2 delta_hat^2))
             * eta_hat^2 * F^dag eta_hat^2 F
    This equals -delta_tau1 * (sigma^2 eta^2 / 2) d^2/d eta^2 in the
    spectral discretization, i.e. the diffusion term moved to the
    left-hand side.
    """
    F = build_centered_dft(spec.n_eta)
    eta2 = eta_hat_diagonal(spec.n_eta) ** 2
    inner = F.conj().T @ (eta2[:, None] * F)
    pref = spec.delta_tau1 * np.pi ** 2 * params.sigma ** 2 / (2.0 * spec.delta_eta_hat ** 2)
    return pref * (eta2[:, None] * inner)


def build_C_eta2(spec, params):
    """Drift operator in expanded (r = q safe) form, delta_tau1 absorbed.

    C_eta2 = i * delta_tau1 * (pi/delta_hat)
             * ((r-q)*eta_hat - I/(eta_max*T)) * F^dag eta_hat F
    which is -((1/T) - (r-q)*eta) d/d eta on the spectral grid.
    """
    F = build_centered_dft(spec.n_eta)
    eta_hat = eta_hat_diagonal(spec.n_eta)
    drift = (params.r - params.q) * eta_hat - 1.0 / (params.eta_max * params.T)
    inner = F.conj().T @ (eta_hat[:, None] * F)
    pref = 1j * spec.delta_tau1 * np.pi / spec.delta_eta_hat
    return pref * (drift[:, None] * inner)


def build_A1(spec, params):
    """Diagonal factor A1 = delta_tau1 * pi^2 sigma^2 eta_hat^2 / 2."""
    eta2 = eta_hat_diagonal(spec.n_eta) ** 2
    return np.diag(spec.delta_tau1 * np.pi ** 2 * params.sigma ** 2 * eta2 / 2.0)


def build_A2(spec):
    """Fourier factor A2 = F^dag eta_hat^2 F / delta_hat^2."""
    F = build_centered_dft(spec.n_eta)
    eta2 = eta_hat_diagonal(spec.n_eta) ** 2
    return (F.conj().T @ (eta2[:, None] * F)) / spec.delta_eta_hat ** 2


def triangular(u):
    """Unit triangle max(1 - |u|, 0)."""
    return np.maximum(1.0 - np.abs(u), 0.0)


def psi0(params, eta, kink_shift=0.0):
    """Initial profile psi(eta, 0) for the selected payoff family.

    The average-rate call payoff max(eta, 0) grows to the domain edge;
    it is replaced by the triangular continuation
    (eta_max/2) * triangle(2*eta/eta_max - 1), which matches the payoff
    on [0, eta_max/2], rolls back to zero at eta_max, and keeps all
    three kinks off the cell-centered nodes whenever the point count is
    divisible by 4.  `kink_shift` displaces the triangle apex (used by
    kink-alignment studies); 0 keeps the canonical placement.
    """
    eta = np.asarray(eta, dtype=float)
    k = params.kind
    if k == "avg_rate_call":
        center = params.eta_max / 2.0 + kink_shift
        half = params.eta_max / 2.0
        return half * triangular((eta - center) / half)
    if k == "avg_rate_put":
        return np.maximum(-eta, 0.0)
    if k == "avg_strike_call":
        return np.maximum(1.0 - eta, 0.0)
    if k == "avg_strike_put":
        return np.maximum(eta - 1.0, 0.0)
    raise ValidationError(f"unknown kind {k!r}")


def build_rhs(spec, params, kink_shift=0.0):
    """Boundary-driven right-hand side.

    Returns (rhs_hat, N_b): the unit-norm vector and its pre-normalization
    squared norm.  After the global delta_tau1 rescaling the raw vector
    holds +psi0/2 in the first time block and -psi0/2 in the last.
    """
    p0 = psi0(params, eta_nodes(spec, params), kink_shift=kink_shift)
    b = np.zeros(spec.dim)
    Nx = spec.N_eta
    b[:Nx] = p0 / 2.0
    b[-Nx:] = -p0 / 2.0
    norm_b = float(b @ b)
    if norm_b == 0.0:
        raise ValidationError("initial profile vanishes on every node")
    return b / math.sqrt(norm_b), norm_b


def build_operators(spec, params, kink_shift=0.0):
    """Build the full OperatorSet for one (spec, params) pair."""
    rhs_hat, norm_b = build_rhs(spec, params, kink_shift=kink_shift)
    return OperatorSet(
        C_tau1=build_time_derivative(spec),
        C_eta1=build_C_eta1(spec, params),
        C_eta2=build_C_eta2(spec, params),
        A1=build_A1(spec, params),
        A2=build_A2(spec),
        rhs_hat=rhs_hat,
        norm_b=norm_b,
    )


def assemble_system(spec, params, kink_shift=0.0, dense_cap=DENSE_CAP):
    """Assemble the dense linear system and its A/B split.

    Returns (M, rhs_hat, A, B) with
        M = delta_tau1*C_tau1 (x) I  +  I (x) (C_eta1 + C_eta2)
        A = I (x) A2
        B = delta_tau1*C_tau1 (x) A1^-1  +  I (x) A1^-1 C_eta2
    so that A + B = (I (x) A1^-1) M.
    """
    if spec.dim > dense_cap:
        raise DimensionCapError(
            f"dense dimension {spec.dim} exceeds cap {dense_cap}")
    ops = build_operators(spec, params, kink_shift=kink_shift)
    It = np.eye(spec.N_tau1)
    Ix = np.eye(spec.N_eta)
    Ct = spec.delta_tau1 * ops.C_tau1
    M = (np.kron(Ct, Ix)
         + np.kron(It, ops.C_eta1 + ops.C_eta2))
    a1_inv = 1.0 / np.diag(ops.A1)
    A = np.kron(It, ops.A2)
    B = (np.kron(Ct, np.diag(a1_inv))
         + np.kron(It, a1_inv[:, None] * ops.C_eta2))
    return M, ops.rhs_hat, A, B


# ---------------------------------------------------------------------------
# export helpers

def matrix_to_csv(mat, path):
    """Dense row-major CSV with "re,im" cells."""
    mat = np.asarray(mat, dtype=complex)
    with open(path, "w") as fh:
        for row in mat:
            fh.write(";".join(f"{c.real:.17g},{c.imag:.17g}" for c in row))
            fh.write("\n")


def operator_descriptor(kind, spec):
    """JSON descriptor of a matrix-free operator."""
    factors = {
        "C_tau1": ["tridiag(+1/-1)/(2*delta_tau1)"],
        "C_eta1": ["eta_hat^2", "F_c^dag", "eta_hat^2", "F_c"],
        "C_eta2": ["(r-q)*eta_hat - I/(eta_max*T)", "F_c^dag", "eta_hat", "F_c"],
        "A1": ["diag(delta_tau1*pi^2*sigma^2*eta_hat^2/2)"],
        "A2": ["F_c^dag", "eta_hat^2/delta_hat^2", "F_c"],
    }.get(kind, [])
    return json.dumps({
        "kind": kind,
        "n_eta": spec.n_eta,
        "n_tau1": spec.n_tau1,
        "factors": factors,
    })
