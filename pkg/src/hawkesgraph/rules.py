"""Derangement scoring rules: thresholds mapping measurements to risk scores.

Each measurement belongs to exactly one derangement group and carries a
one-sided (``>1.3``, ``<98``) or two-sided union (``<98 or >106``) abnormality
predicate plus a risk score; scores within a group sum to 1 (±0.01), so the
per-group sum of abnormal members' scores is a normalized severity.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources

from .errors import ConfigError

_SIDE_RE = re.compile(r"^\s*([<>])\s*(-?\d+(?:\.\d+)?)\s*$")


def _parse_rule(text: str):
    """Parse ``>x``, ``<x`` or ``<x or >y`` into a list of (op, threshold)."""
    sides = []
    for part in re.split(r"\s+or\s+", text.strip()):
        m = _SIDE_RE.match(part)
        if m is None:
            raise ConfigError(f"cannot parse abnormality rule {text!r}")
        sides.append((m.group(1), float(m.group(2))))
    return sides


@dataclass(frozen=True)
class SadRule:
    sad_name: str
    measurement: str          # human-readable measurement name
    column: str               # column name in the input files
    rule: str                 # predicate source text
    risk_score: float

    def abnormal(self, value: float) -> bool:
        """True when ``value`` is present and breaks the threshold(s)."""
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return False
        for op, thr in _parse_rule(self.rule):
            if op == ">" and value > thr:
                return True
            if op == "<" and value < thr:
                return True
        return False


def parse_rules(text: str) -> list[SadRule]:
    """Parse a tab-delimited rule table (comment lines start with '#')."""
    rules = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) != 5:
            raise ConfigError(f"rule line {lineno}: expected 5 columns, got {len(parts)}")
        group, measurement, column, rule, score = parts
        rules.append(SadRule(group, measurement, column, rule, float(score)))
    validate_rules(rules)
    return rules


def validate_rules(rules: list[SadRule]) -> None:
    seen: dict[str, str] = {}
    sums: dict[str, float] = {}
    for r in rules:
        if not 0.0 <= r.risk_score <= 1.0:
            raise ConfigError(f"risk score out of [0,1] for {r.column}")
        if r.column in seen:
            raise ConfigError(f"measurement {r.column} appears in two groups"
                              f" ({seen[r.column]} and {r.sad_name})")
        seen[r.column] = r.sad_name
        _parse_rule(r.rule)
        sums[r.sad_name] = sums.get(r.sad_name, 0.0) + r.risk_score
    for group, total in sums.items():
        if abs(total - 1.0) > 0.01:
            raise ConfigError(f"risk scores in group {group!r} sum to {total:.3f}, not 1")


def default_rules() -> list[SadRule]:
    text = resources.files("hawkesgraph.resources").joinpath("sad_rules.tsv").read_text()
    return parse_rules(text)


def load_rules(path) -> list[SadRule]:
    with open(path, encoding="utf-8") as fh:
        return parse_rules(fh.read())


def group_order(rules: list[SadRule]) -> list[str]:
    """Group names in first-appearance order (table order)."""
    out: list[str] = []
    for r in rules:
        if r.sad_name not in out:
            out.append(r.sad_name)
    return out
