"""Monotone spline basis (M-splines and their running integrals, I-splines).

M-splines of order ``k`` are nonnegative piecewise polynomials that each
integrate to one over a clamped knot vector on [0, 1].  The I-spline family
is obtained by integrating them from the left endpoint, which yields smooth
nondecreasing functions rising from 0 to 1.  A nonpositive combination of
I-splines plus an intercept is the natural parameterization of a monotone
decreasing response curve, which is how the price-response curve ``g`` is
built elsewhere in this package.

I-splines are evaluated in closed form through the telescoping sum over
order ``k+1`` M-splines (Ramsay 1988, with the corrected index bounds), not
by numeric quadrature.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field


def _mspline(i: int, order: int, x: float, knots: tuple[float, ...]) -> float:
    """Value of the 1-based ``i``-th M-spline of ``order`` on ``knots`` at ``x``.

    Uses the standard recursion; zero-width intervals contribute nothing.
    ``x == 1`` is evaluated as a left limit so the density is defined on the
    closed interval.
    """
    ti = knots[i - 1]
    tik = knots[i + order - 1]
    if order == 1:
        if ti <= x < tik:
            return 1.0 / (tik - ti)
        # left-continuity at the right endpoint of the domain
        if x == knots[-1] and ti < x <= tik:
            return 1.0 / (tik - ti)
        return 0.0
    if tik == ti:
        return 0.0
    inside = ti <= x <= tik if x == knots[-1] else ti <= x < tik
    if not inside:
        return 0.0
    a = (x - ti) * _mspline(i, order - 1, x, knots)
    b = (tik - x) * _mspline(i + 1, order - 1, x, knots)
    return order * (a + b) / ((order - 1) * (tik - ti))


@dataclass(frozen=True)
class ISplineBasis:
    """Clamped I-spline basis on [0, 1].

    Parameters
    ----------
    order : int
        Polynomial order of the underlying M-splines (3 gives piecewise
        quadratic densities and piecewise cubic I-splines).
    interior_knots : tuple of float
        Strictly increasing mesh points inside (0, 1).  The full knot vector
        repeats 0 and 1 ``order`` times at the ends.

    With ``q`` mesh points (interior knots plus both endpoints) the family
    contains ``q - 2 + order`` basis functions, e.g. order 3 with interior
    knots {0.2, 0.4, 0.6, 0.8} gives 7.
    """

    order: int = 3
    interior_knots: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8)
    # derived, filled in __post_init__
    knots: tuple[float, ...] = field(init=False, repr=False)
    basis_count: int = field(init=False)

    def __post_init__(self) -> None:
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"order must be a positive integer, got {self.order}")
        interior = tuple(float(t) for t in self.interior_knots)
        for t in interior:
            if not 0.0 < t < 1.0:
                raise ValueError(f"interior knot {t} outside (0, 1)")
        if any(b < a for a, b in zip(interior, interior[1:])):
            raise ValueError("interior knots must be nondecreasing")
        object.__setattr__(self, "interior_knots", interior)
        object.__setattr__(
            self, "knots", (0.0,) * self.order + interior + (1.0,) * self.order
        )
        object.__setattr__(self, "basis_count", len(interior) + self.order)

    # knot vector for the order+1 M-spline family used by the I-spline formula
    @property
    def _iknots(self) -> tuple[float, ...]:
        k1 = self.order + 1
        return (0.0,) * k1 + self.interior_knots + (1.0,) * k1

    def _check_args(self, i: int, u: float) -> None:
        if not 1 <= i <= self.basis_count:
            raise ValueError(
                f"basis index {i} outside 1..{self.basis_count}"
            )
        if not 0.0 <= u <= 1.0:
            raise ValueError(f"argument {u} outside [0, 1]")

    def mspline_eval(self, i: int, u: float) -> float:
        """Density value of the ``i``-th (1-based) M-spline at ``u``."""
        self._check_args(i, u)
        return _mspline(i, self.order, float(u), self.knots)

    def ispline_eval(self, i: int, u: float) -> float:
        """Integrated value of the ``i``-th basis function at ``u``.

        Exact closed form: with ``T`` the order ``k+1`` knot vector and ``j``
        the 1-based index with ``T_j <= u < T_{j+1}``,

            I_i(u) = sum_{m=i+1}^{j} (T_{m+k+1} - T_m) M_m(u | k+1) / (k+1)

        and I_i(u) is exactly 0 below the support and exactly 1 above it.
        """
        self._check_args(i, u)
        k = self.order
        knots = self._iknots
        u = float(u)
        j = bisect_right(knots, u)
        if i > j:
            return 0.0
        if i < j - k:
            return 1.0
        total = 0.0
        for m in range(i + 1, j + 1):
            width = knots[m + k] - knots[m - 1]
            if width == 0.0:
                continue
            total += width * _mspline(m, k + 1, u, knots) / (k + 1)
        return total

    def basis_row(self, u: float) -> list[float]:
        """All I-spline values at ``u`` as a length ``basis_count`` list."""
        return [self.ispline_eval(i, u) for i in range(1, self.basis_count + 1)]

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "knots": list(self.knots),
            "basis_count": self.basis_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ISplineBasis":
        allowed = {"order", "knots", "interior_knots", "basis_count"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown basis keys: {sorted(unknown)}")
        order = data.get("order", 3)
        if "knots" in data:
            knots = [float(t) for t in data["knots"]]
            head, tail = knots[:order], knots[-order:]
            if head != [0.0] * order or tail != [1.0] * order:
                raise ValueError("knot vector must be clamped ([0]*order ... [1]*order)")
            interior = tuple(knots[order:-order])
        else:
            interior = tuple(float(t) for t in data.get("interior_knots", (0.2, 0.4, 0.6, 0.8)))
        basis = cls(order=order, interior_knots=interior)
        if "basis_count" in data and int(data["basis_count"]) != basis.basis_count:
            raise ValueError(
                f"basis_count {data['basis_count']} inconsistent with knots "
                f"(expected {basis.basis_count})"
            )
        return basis
