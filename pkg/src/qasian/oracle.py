"""Independent ground truth for the pricing pipeline.

Three unrelated routes to the same numbers:
  * a Crank-Nicolson finite-difference solve of the reduced PDE on a
    fine cell-centered grid,
  * Monte-Carlo simulation of the underlying geometric Brownian motion
    with exact log-normal stepping,
  * brute-force window sums over statevectors (oracle for the
    segmentation estimator).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ValidationError, QasianError
from .grid import psi0


@dataclass(frozen=True)
class PriceQuote:
    """An option price with its statistical error and provenance tag."""

    value: float
    stderr: float
    method: str

    def __post_init__(self):
        if self.stderr < 0:
            raise ValidationError("stderr must be >= 0")


def cn_nodes(params, n_x):
    """Cell-centered eta nodes of the oracle grid (n_x points)."""
    h = 2.0 * params.eta_max / n_x
    return -params.eta_max + h / 2.0 + h * np.arange(n_x)


def crank_nicolson_solve(params, n_x, n_t, kink_shift=0.0):
    """Theta = 1/2 finite-difference solve of the reduced PDE.

    d psi/d tau1 = (sigma^2 eta^2 / 2) psi_etaeta + (1/T - (r-q) eta) psi_eta
    marched from psi(., 0) = psi0 to tau1 = T in n_t steps.  The two edge
    rows are frozen at their initial values (Dirichlet treatment of the
    truncation boundary).  Returns (lattice[(n_t+1), n_x], eta, tau1).
    """
    eta = cn_nodes(params, n_x)
    h = eta[1] - eta[0]
    dt = params.T / n_t
    diff = 0.5 * params.sigma ** 2 * eta ** 2
    drift = 1.0 / params.T - (params.r - params.q) * eta
    lower = diff / h ** 2 - drift / (2 * h)
    center = -2.0 * diff / h ** 2
    upper = diff / h ** 2 + drift / (2 * h)
    L = sp.diags([lower[1:], center, upper[:-1]], offsets=[-1, 0, 1],
                 format="lil")
    L[0, :] = 0.0
    L[-1, :] = 0.0
    L = L.tocsc()
    I = sp.identity(n_x, format="csc")
    lhs = spla.factorized((I - 0.5 * dt * L).tocsc())
    rhs_op = (I + 0.5 * dt * L).tocsr()
    psi = psi0(params, eta, kink_shift=kink_shift)
    lattice = np.empty((n_t + 1, n_x))
    lattice[0] = psi
    norm0 = np.linalg.norm(psi)
    for step in range(1, n_t + 1):
        psi = lhs(rhs_op @ psi)
        if not np.all(np.isfinite(psi)) or np.linalg.norm(psi) > 1e6 * max(norm0, 1.0):
            raise QasianError("finite-difference solution blow-up")
        lattice[step] = psi
    tau1 = dt * np.arange(n_t + 1)
    return lattice, eta, tau1


def cn_interpolate(lattice, eta, tau1, eta_q, tau1_q):
    """Bilinear interpolation of the oracle lattice at query points."""
    from scipy.interpolate import RegularGridInterpolator
    itp = RegularGridInterpolator((tau1, eta), lattice, method="linear",
                                  bounds_error=False, fill_value=None)
    pts = np.column_stack([np.broadcast_to(tau1_q, np.shape(eta_q)).ravel()
                           if np.ndim(eta_q) else [tau1_q],
                           np.atleast_1d(eta_q).ravel()])
    out = itp(pts)
    return out if out.size > 1 else float(out[0])


def _payoff(params, avg, s_T):
    k = params.kind
    if k == "avg_rate_call":
        return np.maximum(avg - params.K, 0.0)
    if k == "avg_rate_put":
        return np.maximum(params.K - avg, 0.0)
    if k == "avg_strike_call":
        return np.maximum(s_T - avg, 0.0)
    if k == "avg_strike_put":
        return np.maximum(avg - s_T, 0.0)
    raise ValidationError(f"unknown kind {k!r}")


def monte_carlo_price(params, S0, n_paths, n_steps, seed=0):
    """Risk-neutral Monte-Carlo price of the arithmetic-average option.

    Exact log-normal GBM stepping (no discretization bias in the path
    marginals); the running average uses the trapezoid rule over the
    sampled path.  Returns mean +- standard error, discounted.
    """
    if n_paths < 1000:
        raise ValidationError("need n_paths >= 1000")
    rng = np.random.default_rng(seed)
    dt = params.T / n_steps
    drift = (params.r - params.q - 0.5 * params.sigma ** 2) * dt
    vol = params.sigma * np.sqrt(dt)
    log_s = np.full(n_paths, np.log(S0))
    # trapezoid accumulation of the time integral of S
    integral = np.zeros(n_paths)
    for _ in range(n_steps):
        prev = np.exp(log_s)
        log_s = log_s + drift + vol * rng.standard_normal(n_paths)
        cur = np.exp(log_s)
        integral += 0.5 * dt * (prev + cur)
    avg = integral / params.T
    payoff = _payoff(params, avg, np.exp(log_s))
    disc = np.exp(-params.r * params.T)
    value = disc * float(np.mean(payoff))
    stderr = disc * float(np.std(payoff, ddof=1) / np.sqrt(n_paths))
    return PriceQuote(value, stderr, "mc")


def closed_form_average_mean(params, S0):
    """E[(1/T) integral_0^T S_u du] under the risk-neutral GBM."""
    mu = params.r - params.q
    if abs(mu) < 1e-14:
        return S0
    return S0 * (np.exp(mu * params.T) - 1.0) / (mu * params.T)


def eta_of(S, I, t, params):
    """Map contract state (S, I, t) to the PDE coordinates (eta, tau1)."""
    if params.kind.startswith("avg_rate"):
        eta = (I - params.K * params.T) / (S * params.T)
    else:
        eta = I / (S * params.T)
    return eta, params.T - t


def price_from_psi(psi_val, S, I, t, params):
    """Contract price from a surface value: V = S e^{-q (T-t)} psi."""
    tau = params.T - t
    return PriceQuote(float(S * np.exp(-params.q * tau) * psi_val), 0.0, "pde")


def brute_prefix_sum(state, x_i, x_f):
    """Direct sum of |amplitude|^2 over the index window [x_i, x_f]."""
    amps = np.asarray(getattr(state, "amplitudes", state))
    if not 0 <= x_i <= x_f < amps.size:
        raise ValidationError("window out of range")
    chunk = amps[x_i:x_f + 1]
    return float(np.real(np.vdot(chunk, chunk)))
