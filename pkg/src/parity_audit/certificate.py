"""The audit currency: a checked instance of one inequality."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

LOWER = "lower"
UPPER = "upper"


@dataclass(frozen=True)
class BoundCertificate:
    """One evaluated inequality.

    ``direction == "lower"`` certifies ``lhs >= rhs`` and ``margin = lhs - rhs``;
    ``direction == "upper"`` certifies ``lhs <= rhs`` and ``margin = rhs - lhs``.

    When a conditional bound's assumptions are not met the certificate is
    *vacuous*: ``holds`` is reported true, ``assumptions_satisfied`` is false and
    ``details["inequality_holds"]`` records the raw comparison.
    """

    bound_name: str
    lhs: float
    rhs: float
    direction: str
    holds: bool
    margin: float
    assumptions: dict[str, bool] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def assumptions_satisfied(self) -> bool:
        return all(self.assumptions.values())

    @property
    def vacuous(self) -> bool:
        return not self.assumptions_satisfied

    @property
    def failed(self) -> bool:
        """A genuine violation: assumptions met and the inequality is false."""
        return not self.holds

    def to_dict(self) -> dict[str, Any]:
        return {
            "bound_name": self.bound_name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "direction": self.direction,
            "margin": self.margin,
            "holds": self.holds,
            "assumptions": dict(self.assumptions),
            "details": dict(self.details),
        }


def from_dict(d: dict[str, Any]) -> BoundCertificate:
    """Rebuild a certificate from :meth:`BoundCertificate.to_dict` output."""

    def num(v):
        return float(v) if v is not None else float("nan")

    details = {k: v for k, v in d.get("details", {}).items() if k != "inequality_holds"}
    return certify(d["bound_name"], num(d["lhs"]), num(d["rhs"]), d.get("direction", LOWER),
                   assumptions=d.get("assumptions"), details=details)


def certify(
    name: str,
    lhs: float,
    rhs: float,
    direction: str = LOWER,
    *,
    slack: float = 1e-9,
    assumptions: dict[str, bool] | None = None,
    details: dict[str, Any] | None = None,
) -> BoundCertificate:
    if direction not in (LOWER, UPPER):
        raise ValueError(f"unknown direction {direction!r}")
    lhs = float(lhs)
    rhs = float(rhs)
    if lhs == rhs:
        margin = 0.0  # also covers inf == inf
    else:
        margin = lhs - rhs if direction == LOWER else rhs - lhs
    inequality = margin >= -slack
    assumptions = {k: bool(v) for k, v in (assumptions or {}).items()}
    details = dict(details or {})
    satisfied = all(assumptions.values())
    if not satisfied:
        details["inequality_holds"] = inequality
    return BoundCertificate(
        bound_name=name,
        lhs=lhs,
        rhs=rhs,
        direction=direction,
        holds=inequality or not satisfied,
        margin=margin,
        assumptions=assumptions,
        details=details,
    )
