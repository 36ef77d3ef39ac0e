"""Grid-checked stability certificates and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class StabilityCertificate:
    """Result of a grid check of a Lyapunov-type inequality.

    ``claim`` is one of ``det-asymptotic`` (deterministic asymptotic
    stability), ``stoch-bounded`` (stochastic boundedness outside a noise
    ball) or ``stoch-stable`` (stochastic stability inside a radius).
    ``margin`` is the worst (largest) value of the checked quantity over the
    sampled region, so the certificate passes iff margin <= 0.  ``region``
    is the sampled x-interval.  ``degenerate`` marks a vacuous pass on an
    empty sampled region.  ``failures`` lists x-intervals where the
    inequality failed, empty when the certificate passes.
    """

    claim: str
    params_hash: str
    region: tuple[float, float]
    threshold: float
    margin: float
    passed: bool
    degenerate: bool = False
    failures: tuple[tuple[float, float], ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "claim": self.claim,
            "params_hash": self.params_hash,
            "region": [self.region[0], self.region[1]],
            "threshold": self.threshold,
            "margin": self.margin,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"


def failure_intervals(xs, bad) -> tuple[tuple[float, float], ...]:
    """Group a boolean failure mask over sorted sample points into intervals."""
    out: list[tuple[float, float]] = []
    start = None
    prev = None
    for x, flag in zip(xs, bad):
        if flag:
            if start is None:
                start = x
            prev = x
        elif start is not None:
            out.append((float(start), float(prev)))
            start = None
    if start is not None:
        out.append((float(start), float(prev)))
    return tuple(out)
