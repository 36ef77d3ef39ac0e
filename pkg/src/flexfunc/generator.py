"""Finite-volume generator of the state diffusion and distribution tools.

The SDE dX = a(x) dt + b(x) dW on [0, 1] is discretized into a
continuous-time birth-death chain on uniform cells using exponential
fitting (Chang-Cooper / Scharfetter-Gummel weights): with interface drift
``v``, interface diffusion ``D = b^2 / 2`` and Peclet number ``w = v h / D``
the jump rates are

    up   = (D / h^2) * B(-w),     down = (D / h^2) * B(w),

where B(z) = z / (exp(z) - 1).  This reproduces the local Gibbs ratio
exp(v h / D) exactly, degrades to pure upwinding as D -> 0, and gives
zero-flux (conservative) boundaries because no rates leave the domain.
Rows of the rate matrix sum to zero by construction.

Distributions are represented as densities at cell centers; multiply by
the cell width to get probabilities.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import FlexParams, diffusion, drift


@dataclass(frozen=True)
class StateGrid:
    """Uniform cell grid on [0, 1]."""

    n_cells: int

    def __post_init__(self) -> None:
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError(f"n_cells must be an integer >= 2, got {self.n_cells}")

    @property
    def width(self) -> float:
        return 1.0 / self.n_cells

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_cells + 1)

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.width

    def cell_of(self, x: float) -> int:
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"x {x} outside [0, 1]")
        return min(self.n_cells - 1, int(x * self.n_cells))


def _bernoulli(z: np.ndarray) -> np.ndarray:
    """B(z) = z / (exp(z) - 1), stable for any float z."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-8
    out[small] = 1.0 - 0.5 * z[small]
    big = z > 700.0
    out[big] = 0.0
    neg_big = z < -700.0
    out[neg_big] = -z[neg_big]
    rest = ~(small | big | neg_big)
    out[rest] = z[rest] / np.expm1(z[rest])
    return out


@dataclass(frozen=True)
class GeneratorMatrix:
    """Tridiagonal rate matrix of the state chain (rows sum to zero).

    ``up[i]`` is the rate i -> i+1 (up[-1] = 0) and ``down[i]`` the rate
    i -> i-1 (down[0] = 0).
    """

    grid: StateGrid
    up: np.ndarray
    down: np.ndarray

    def __post_init__(self) -> None:
        n = self.grid.n_cells
        if self.up.shape != (n,) or self.down.shape != (n,):
            raise ValueError("up/down must have one entry per cell")
        if self.up[-1] != 0.0 or self.down[0] != 0.0:
            raise ValueError("boundary rates must vanish (zero-flux)")
        if np.any(self.up < 0.0) or np.any(self.down < 0.0):
            raise ValueError("rates must be nonnegative")

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells

    @property
    def diag(self) -> np.ndarray:
        return -(self.up + self.down)

    @property
    def sub(self) -> np.ndarray:
        """Entries G[i, i-1], i = 1..n-1."""
        return self.down[1:]

    @property
    def sup(self) -> np.ndarray:
        """Entries G[i, i+1], i = 0..n-2."""
        return self.up[:-1]

    def dense(self) -> np.ndarray:
        n = self.n_cells
        g = np.zeros((n, n))
        idx = np.arange(n)
        g[idx, idx] = self.diag
        g[idx[1:], idx[:-1]] = self.sub
        g[idx[:-1], idx[1:]] = self.sup
        return g

    def connected(self) -> bool:
        return bool(np.all((self.up[:-1] > 0.0) | (self.down[1:] > 0.0)))


def build_generator(
    params: FlexParams,
    u: float,
    B: float,
    n_cells: int = 200,
) -> GeneratorMatrix:
    """Rate matrix for constant price u and baseline B."""
    if n_cells < 16:
        raise ValueError(f"grid too coarse: n_cells must be >= 16, got {n_cells}")
    for name, val in (("u", u), ("B", B)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name} {val} outside [0, 1]")
    grid = StateGrid(n_cells)
    h = grid.width
    x_if = grid.edges[1:-1]
    v = np.asarray(drift(params, x_if, u, B))
    d = 0.5 * np.asarray(diffusion(params, x_if)) ** 2
    up_if = np.empty_like(v)
    dn_if = np.empty_like(v)
    diffusive = d > 0.0
    w = np.zeros_like(v)
    w[diffusive] = v[diffusive] * h / d[diffusive]
    scale = d[diffusive] / h**2
    up_if[diffusive] = scale * _bernoulli(-w[diffusive])
    dn_if[diffusive] = scale * _bernoulli(w[diffusive])
    adv = ~diffusive
    up_if[adv] = np.maximum(v[adv], 0.0) / h
    dn_if[adv] = np.maximum(-v[adv], 0.0) / h
    up = np.append(up_if, 0.0)
    down = np.insert(dn_if, 0, 0.0)
    return GeneratorMatrix(grid=grid, up=up, down=down)


def point_mass_pdf(grid: StateGrid, x0: float) -> np.ndarray:
    """Density of a point mass placed in the cell containing x0."""
    pdf = np.zeros(grid.n_cells)
    pdf[grid.cell_of(x0)] = 1.0 / grid.width
    return pdf


def _thomas(sub: np.ndarray, diag: np.ndarray, sup: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a tridiagonal system by the Thomas algorithm (no pivoting)."""
    n = len(diag)
    c = np.empty(n - 1)
    d = np.empty(n)
    piv = diag[0]
    if piv == 0.0:
        raise ZeroDivisionError("zero pivot in tridiagonal solve")
    c[0] = sup[0] / piv
    d[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - sub[i - 1] * c[i - 1]
        if piv == 0.0:
            raise ZeroDivisionError("zero pivot in tridiagonal solve")
        if i < n - 1:
            c[i] = sup[i] / piv
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        d[i] -= c[i] * d[i + 1]
    return d


@dataclass(frozen=True)
class DistributionSeries:
    """Cell-center densities at a sequence of times."""

    times: np.ndarray
    grid: StateGrid
    pdfs: np.ndarray  # (n_times, n_cells)

    def cdfs(self) -> np.ndarray:
        return np.cumsum(self.pdfs * self.grid.width, axis=1)

    def to_csv(self, path, value_label: str = "pdf") -> None:
        xs = self.grid.centers
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"t,x,{value_label}\n")
            for t, row in zip(self.times, self.pdfs):
                for x, p in zip(xs, row):
                    fh.write(f"{float(t)!r},{float(x)!r},{float(p)!r}\n")


def evolve_pdf(
    gen: GeneratorMatrix,
    pdf0: np.ndarray,
    times,
    dt: float | None = None,
) -> DistributionSeries:
    """Transient densities at the requested times from initial density pdf0.

    Implicit one-step time stepping: (I - dt G^T) p_{new} = p.  The system
    matrix is an M-matrix, so every step conserves mass exactly (columns of
    G^T sum to zero) and preserves nonnegativity for any step size; the
    stationary density is its exact fixed point.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("times must be a nonempty 1-D sequence")
    if np.any(np.diff(times) < 0.0) or times[0] < 0.0:
        raise ValueError("times must be nondecreasing and nonnegative")
    pdf0 = np.asarray(pdf0, dtype=float)
    if pdf0.shape != (gen.n_cells,):
        raise ValueError("pdf0 must have one density per cell")
    if np.any(pdf0 < 0.0):
        raise ValueError("pdf0 must be nonnegative")
    h = gen.grid.width
    mass = pdf0.sum() * h
    if abs(mass - 1.0) > 1e-9:
        raise ValueError(f"pdf0 must integrate to 1, got {mass!r}")
    if dt is None:
        span = float(times[-1])
        dt = span / 1000.0 if span > 0.0 else 1.0
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")

    # bands of A = I - dt*G^T:  sub_A = -dt*up[:-1], sup_A = -dt*down[1:]
    sub_a = -dt * gen.up[:-1]
    sup_a = -dt * gen.down[1:]
    diag_a = 1.0 - dt * gen.diag

    p = pdf0 * h  # probabilities
    t_now = 0.0
    out = np.empty((len(times), gen.n_cells))
    for j, t in enumerate(times):
        span = t - t_now
        if span > 0.0:
            n_sub = max(1, int(np.ceil(span / dt - 1e-12)))
            step = span / n_sub
            if abs(step - dt) > 1e-12 * max(1.0, dt):
                sj = -step * gen.up[:-1]
                pj = -step * gen.down[1:]
                dj = 1.0 - step * gen.diag
            else:
                sj, pj, dj = sub_a, sup_a, diag_a
            for _ in range(n_sub):
                p = _thomas(sj, dj, pj, p)
            t_now = t
        out[j] = p / h
    return DistributionSeries(times=times, grid=gen.grid, pdfs=out)


def cdf_series(
    gen: GeneratorMatrix,
    pdf0: np.ndarray,
    times,
    dt: float | None = None,
) -> DistributionSeries:
    """Like :func:`evolve_pdf` but rows hold cumulative probabilities."""
    series = evolve_pdf(gen, pdf0, times, dt=dt)
    return DistributionSeries(times=series.times, grid=series.grid, pdfs=series.cdfs())


def stationary_pdf(gen: GeneratorMatrix) -> np.ndarray:
    """Stationary density of the chain.

    For a connected chain the zero-net-flux recursion
    pi_{i+1} = pi_i * up_i / down_{i+1} is exact (detailed balance holds for
    any one-dimensional birth-death chain); it is evaluated in log space.
    A disconnected chain (pure drift, sigma_x = 0) has its mass trapped in
    absorbing cells; that degenerate distribution is returned with a warning.
    """
    n = gen.n_cells
    h = gen.grid.width
    if not gen.connected():
        absorbing = np.flatnonzero((gen.up == 0.0) & (gen.down == 0.0))
        if len(absorbing) == 0:
            raise ValueError("disconnected chain without absorbing cells")
        warnings.warn(
            "chain is disconnected (pure drift); returning absorbing-cell mass",
            stacklevel=2,
        )
        pdf = np.zeros(n)
        pdf[absorbing] = 1.0 / (len(absorbing) * h)
        return pdf
    logpi = _log_stationary(gen)
    pi = np.exp(logpi)
    pi /= pi.sum()
    return pi / h


def stationary_moments(gen: GeneratorMatrix) -> tuple[float, float]:
    """Mean and variance of the stationary density."""
    pdf = stationary_pdf(gen)
    x = gen.grid.centers
    w = pdf * gen.grid.width
    mean = float(np.dot(w, x))
    var = float(np.dot(w, (x - mean) ** 2))
    return mean, var


def _log_stationary(gen: GeneratorMatrix) -> np.ndarray:
    """Log stationary weights from the zero-net-flux recursion.

    Jump rates can underflow to exactly zero in the far tails (huge Peclet
    numbers); those log-ratios are clamped to +-4000 which leaves the
    stationary weights there at exactly zero after exponentiation while
    keeping the cumulative sum free of inf - inf artifacts.
    """
    with np.errstate(divide="ignore"):
        steps = np.log(gen.up[:-1]) - np.log(gen.down[1:])
    steps = np.clip(steps, -4000.0, 4000.0)
    logpi = np.concatenate(([0.0], np.cumsum(steps)))
    return logpi - logpi.max()


def _sturm_count(diag: np.ndarray, off: np.ndarray, sigma: float) -> int:
    """Number of eigenvalues of the symmetric tridiagonal matrix below sigma."""
    count = 0
    d = diag[0] - sigma
    if d == 0.0:
        d = -1e-300
    if d < 0.0:
        count += 1
    for i in range(1, len(diag)):
        d = diag[i] - sigma - off[i - 1] ** 2 / d
        if d == 0.0:
            d = -1e-300
        if d < 0.0:
            count += 1
    return count


def spectral_gap(gen: GeneratorMatrix, mode: str = "slowest", tol: float = 1e-8) -> float:
    """Nonzero eigenvalue of the generator governing relaxation.

    ``slowest`` (default) returns the least-negative nonzero eigenvalue,
    ``fastest`` the most negative one.  The chain is reversible, so the
    generator is symmetrized by the stationary measure into a tridiagonal
    matrix with off-diagonal sqrt(up_i * down_{i+1}); a Sturm-sequence
    bisection brackets the wanted eigenvalue and shifted inverse iteration
    with the known zero-mode deflated polishes it to relative tolerance.
    """
    if mode not in ("slowest", "fastest"):
        raise ValueError(f"mode must be 'slowest' or 'fastest', got {mode!r}")
    if not gen.connected():
        raise ValueError("spectral gap undefined for a disconnected chain")
    n = gen.n_cells
    if n < 2:
        raise ValueError("need at least two cells")
    diag = gen.diag.copy()
    off = np.sqrt(gen.up[:-1] * gen.down[1:])

    # Gershgorin lower bound
    rad = np.zeros(n)
    rad[:-1] += off
    rad[1:] += off
    lo_bound = float(np.min(diag - rad))
    # wanted eigenvalue in ascending order (0 is the n-th)
    want = n - 1 if mode == "slowest" else 1
    lo, hi = lo_bound, 0.0
    scale = max(abs(lo_bound), 1.0)
    while hi - lo > 1e-10 * scale:
        mid = 0.5 * (lo + hi)
        if _sturm_count(diag, off, mid) >= want:
            hi = mid
        else:
            lo = mid
    lam = 0.5 * (lo + hi)

    # deflate the exact zero mode: sqrt of the stationary measure
    q = np.exp(0.5 * _log_stationary(gen))
    q /= np.linalg.norm(q)

    rng_local = np.random.Generator(np.random.Philox(key=np.array([7, 11], dtype=np.uint64)))
    v = rng_local.standard_normal(n)
    v -= q * (q @ v)
    v /= np.linalg.norm(v)
    shift = lam
    prev = np.inf
    for _ in range(60):
        try:
            w = _thomas(off, diag - shift, off, v)
        except ZeroDivisionError:
            shift += 1e-12 * scale
            continue
        w -= q * (q @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0 or not np.isfinite(norm):
            shift += 1e-10 * scale
            continue
        v = w / norm
        rq = float(v @ (diag * v) + 2.0 * np.dot(off, v[:-1] * v[1:]))
        if abs(rq - prev) <= tol * max(abs(rq), 1e-30):
            return rq
        prev = rq
    return prev if np.isfinite(prev) else lam


def write_stationary_csv(path, grid: StateGrid, pdf: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,pdf\n")
        for x, p in zip(grid.centers, pdf):
            fh.write(f"{float(x)!r},{float(p)!r}\n")
