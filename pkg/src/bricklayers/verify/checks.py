from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class CheckResult:
    """Outcome of one suite.  ``verdict`` must follow from ``statistic`` and
    ``threshold`` alone, with the comparison named by ``rule``."""

    suite: str
    statistic: float
    threshold: float | list[float]
    rule: str
    verdict: str
    replicas: int
    seeds: list[int]
    runtime: float
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def rederive(self) -> str:
        """Recompute the verdict from the recorded numbers."""
        s, th = self.statistic, self.threshold
        if self.verdict == INCONCLUSIVE:
            return INCONCLUSIVE
        ok = {
            "<": lambda: s < th,
            "<=": lambda: s <= th,
            ">": lambda: s > th,
            ">=": lambda: s >= th,
            "==": lambda: s == th,
            "in": lambda: th[0] <= s <= th[1],
        }[self.rule]()
        return PASS if ok else FAIL

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item"):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def summary_table(results: list[CheckResult]) -> str:
    rows = [("suite", "verdict", "statistic", "rule", "threshold", "replicas", "seconds")]
    for r in results:
        th = r.threshold if not isinstance(r.threshold, (list, tuple)) else \
            "[" + ", ".join(f"{v:.6g}" for v in r.threshold) + "]"
        rows.append((r.suite, r.verdict, f"{r.statistic:.6g}", r.rule,
                     th if isinstance(th, str) else f"{th:.6g}", str(r.replicas), f"{r.runtime:.2f}"))
    widths = [max(len(str(row[k])) for row in rows) for k in range(len(rows[0]))]
    return "\n".join("  ".join(str(c).ljust(w) for c, w in zip(row, widths)) for row in rows)
