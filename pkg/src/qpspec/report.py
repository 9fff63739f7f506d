from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


@dataclass
class CheckReport:
    """Outcome of a verifier: findings are data, never exceptions.

    ``worst_margin`` is (allowed - observed) at the worst item, so a negative
    value means a violation; ``offender`` names that item.
    """

    name: str
    passed: bool
    worst_margin: float = math.inf
    offender: Any = None
    findings: list[str] = field(default_factory=list)
    values: dict[str, Any] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [
            f"check: {self.name}",
            f"passed: {self.passed}",
            f"worst_margin: {self.worst_margin!r}",
            f"offender: {self.offender}",
        ]
        for key, value in self.values.items():
            out.append(f"{key}: {value!r}" if isinstance(value, float) else f"{key}: {value}")
        out.extend(f"finding: {s}" for s in self.findings)
        return out

    def __str__(self):
        return "\n".join(self.lines())
