"""Stochastic stability certificates for the corner equilibria.

All checks revolve around the generator of the diffusion applied to the
quadratic Lyapunov function V = (x - x*)^2 / 2:

    LV(x) = (1/C) dD(x, u*, B*) (x - x*) + 0.5 x^2 (1 - x)^2 sigma_x^2.

The drift part is damping (the demand-change sign law), the diffusion part
is destabilizing but bounded by sigma_x^2 / 32.  With the worst-case drift
gain eta1 = (lambda / C) min(B*, 1 - B*), LV <= 0 is guaranteed wherever
|ell(f(x) + g(u*))| |x - x*| exceeds sigma_x^2 / (32 eta1) (boundedness
outside a noise ball) and, for sigma_x^2 <= 2 eta1 theta, on the whole ball
|x - x*| <= min(1, 2 eta1 theta / sigma_x^2) (stability).  The certificates
verify these inequalities pointwise on a fine grid rather than trusting
the derivation.

Only the corner states (x*, u*) in {(1, 0), (0, 1)} qualify: these are the
points where drift and diffusion vanish together.
"""

from __future__ import annotations

import warnings

import numpy as np

from .certificates import StabilityCertificate, failure_intervals
from .equilibria import EXCLUSION_RADIUS
from .model import (
    FlexParams,
    charge_response,
    demand_change,
    demand_deviation,
    logistic_response,
    price_response,
)

_CORNERS = {0.0: 1.0, 1.0: 0.0}  # u* -> x*


def _corner(u_star: float) -> float:
    if u_star not in _CORNERS:
        raise ValueError(
            f"(x*, u*) must be a corner stochastic equilibrium, got u*={u_star}"
        )
    return _CORNERS[u_star]


def _check_b(B_star: float) -> float:
    if not 0.0 <= B_star <= 1.0:
        raise ValueError(f"B_star {B_star} outside [0, 1]")
    return float(B_star)


def lyapunov_rate(params: FlexParams, x, u_star: float, B_star: float):
    """LV(x) for V = (x - x*)^2 / 2 at the corner equilibrium of u*."""
    x_star = _corner(u_star)
    _check_b(B_star)
    xs = np.asarray(x, dtype=float)
    dd = demand_deviation(params, demand_change(params, xs, u_star), B_star)
    val = dd / params.C * (xs - x_star) + 0.5 * (xs * (1.0 - xs)) ** 2 * params.sigma_x**2
    return float(val) if np.ndim(x) == 0 else val


def min_drift_gain(params: FlexParams, B_star: float) -> float:
    """Worst-case drift gain eta1 = (lambda / C) min(B*, 1 - B*)."""
    b = _check_b(B_star)
    return params.lam / params.C * min(b, 1.0 - b)


def _sample(x_star: float, grid_n: int) -> np.ndarray:
    xs = np.linspace(0.0, 1.0, grid_n)
    return xs[np.abs(xs - x_star) > EXCLUSION_RADIUS]


def certify_bounded(
    params: FlexParams,
    u_star: float,
    B_star: float,
    grid_n: int = 2001,
) -> StabilityCertificate:
    """Noise-ball boundedness certificate at the corner equilibrium of u*.

    Checks LV(x) <= 0 at every grid point where the damping condition
    |ell(f(x) + g(u*))| |x - x*| >= sigma_x^2 / (32 eta1) holds.  B* at 0
    or 1 gives eta1 = 0 and an empty condition region; that degenerate
    certificate is flagged and does not pass.
    """
    x_star = _corner(u_star)
    b = _check_b(B_star)
    eta1 = min_drift_gain(params, b)
    if eta1 == 0.0:
        return StabilityCertificate(
            claim="stoch-bounded",
            params_hash=params.params_hash(),
            region=(x_star, x_star),
            threshold=np.inf,
            margin=np.inf,
            passed=False,
            degenerate=True,
        )
    threshold = params.sigma_x**2 / (32.0 * eta1)
    xs = _sample(x_star, grid_n)
    g = price_response(params, u_star)
    damping = np.abs(logistic_response(params, charge_response(params, xs) + g)) * np.abs(
        xs - x_star
    )
    xs = xs[damping >= threshold]
    if xs.size == 0:
        return StabilityCertificate(
            claim="stoch-bounded",
            params_hash=params.params_hash(),
            region=(x_star, x_star),
            threshold=threshold,
            margin=-np.inf,
            passed=True,
            degenerate=True,
        )
    lv = lyapunov_rate(params, xs, u_star, b)
    margin = float(np.max(lv))
    return StabilityCertificate(
        claim="stoch-bounded",
        params_hash=params.params_hash(),
        region=(float(xs[0]), float(xs[-1])),
        threshold=threshold,
        margin=margin,
        passed=bool(margin <= 0.0),
        failures=failure_intervals(xs, lv > 0.0),
    )


def stable_radius(params: FlexParams, B_star: float, theta: float) -> float:
    """Certified radius min(1, 2 eta1 theta / sigma_x^2); 1 when sigma_x = 0."""
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must be in (0, 1), got {theta}")
    eta1 = min_drift_gain(params, B_star)
    if params.sigma_x == 0.0:
        return 1.0
    return min(1.0, 2.0 * eta1 * theta / params.sigma_x**2)


def certify_stable(
    params: FlexParams,
    u_star: float,
    B_star: float,
    theta: float = 0.5,
    grid_n: int = 2001,
) -> StabilityCertificate:
    """Stability certificate on the ball |x - x*| <= stable_radius.

    The reported threshold is the certified radius.  A radius smaller than
    the grid exclusion gives an empty punctured ball; that certificate
    passes vacuously and is flagged degenerate (theta -> 0 limit).  B* at 0
    or 1 gives eta1 = 0: degenerate and failed.
    """
    x_star = _corner(u_star)
    b = _check_b(B_star)
    eta1 = min_drift_gain(params, b)
    if eta1 == 0.0:
        return StabilityCertificate(
            claim="stoch-stable",
            params_hash=params.params_hash(),
            region=(x_star, x_star),
            threshold=0.0,
            margin=np.inf,
            passed=False,
            degenerate=True,
        )
    r = stable_radius(params, b, theta)
    xs = _sample(x_star, grid_n)
    xs = xs[np.abs(xs - x_star) <= r]
    if xs.size == 0:
        return StabilityCertificate(
            claim="stoch-stable",
            params_hash=params.params_hash(),
            region=(x_star, x_star),
            threshold=r,
            margin=-np.inf,
            passed=True,
            degenerate=True,
        )
    lv = lyapunov_rate(params, xs, u_star, b)
    margin = float(np.max(lv))
    lo = max(0.0, x_star - r)
    hi = min(1.0, x_star + r)
    return StabilityCertificate(
        claim="stoch-stable",
        params_hash=params.params_hash(),
        region=(lo, hi),
        threshold=r,
        margin=margin,
        passed=bool(margin <= 0.0),
        failures=failure_intervals(xs, lv > 0.0),
    )


def max_stable_noise(
    params: FlexParams,
    u_star: float,
    B_star: float,
    target_radius: float = 1.0,
    theta: float = 0.5,
    cap: float = 1e6,
    grid_n: int = 2001,
) -> float:
    """Largest sigma_x whose stability certificate covers ``target_radius``.

    The radius formula alone caps sigma_x at sqrt(2 eta1 theta / target);
    if the certificate also passes there, that bound is returned exactly
    (target_radius = 1 gives sqrt(2 eta1 theta)).  Otherwise the pointwise
    LV check binds and the boundary is bisected.  A formula bound beyond
    ``cap`` is reported as the cap with a warning.
    """
    if not 0.0 < target_radius <= 1.0:
        raise ValueError(f"target_radius must be in (0, 1], got {target_radius}")
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must be in (0, 1), got {theta}")
    _corner(u_star)
    eta1 = min_drift_gain(params, _check_b(B_star))
    if eta1 == 0.0:
        raise ValueError("eta1 = 0 at B_star in {0, 1}: no certifiable noise level")

    def passes(sigma: float) -> bool:
        p = params.with_sigma(sigma)
        cert = certify_stable(p, u_star, B_star, theta=theta, grid_n=grid_n)
        return cert.passed and stable_radius(p, B_star, theta) >= target_radius - 1e-12

    sigma_formula = float(np.sqrt(2.0 * eta1 * theta / target_radius))
    if sigma_formula >= cap:
        if passes(cap):
            warnings.warn(
                f"sigma_max exceeds the search cap {cap}; returning the cap",
                stacklevel=2,
            )
            return cap
        sigma_formula = cap
    if passes(sigma_formula):
        return sigma_formula
    lo, hi = 0.0, sigma_formula
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-9 * max(hi, 1.0):
            break
    return lo
