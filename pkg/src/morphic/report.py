"""Check reports shared by every verification routine and the CLI."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .expr import NONZERO, NUMERIC_ZERO, SYMBOLIC_ZERO, ZeroVerdict

PASS = "Pass"
FAIL = "Fail"
_OK = {SYMBOLIC_ZERO, NUMERIC_ZERO, PASS}


def _clean(x):
    if isinstance(x, float):
        return float(f"{x:.12g}")
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    return x


@dataclass
class Entry:
    name: str
    tier: str
    residual: float = 0.0
    witness: object = None
    certificate: str = "Symbolic"
    detail: str = ""
    group: str = ""

    @property
    def passed(self) -> bool:
        return self.tier in _OK

    @classmethod
    def from_verdict(cls, name: str, verdict: ZeroVerdict, **kw) -> "Entry":
        return cls(name, verdict.tier, verdict.residual, verdict.witness, **kw)

    def to_dict(self) -> dict:
        return _clean({
            "name": self.name,
            "group": self.group,
            "tier": self.tier,
            "passed": self.passed,
            "residual": self.residual,
            "witness": list(self.witness) if isinstance(self.witness, tuple) else self.witness,
            "certificate": self.certificate,
            "detail": self.detail,
        })


@dataclass
class Report:
    """Ordered list of check entries with an overall verdict."""

    title: str
    entries: list = field(default_factory=list)
    certificate: str = "Symbolic"
    notes: list = field(default_factory=list)
    wall_time: float | None = None
    command: str = ""

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def add(self, entry: Entry) -> Entry:
        self.entries.append(entry)
        return entry

    def check(self, name: str, verdict: ZeroVerdict, **kw) -> Entry:
        kw.setdefault("certificate", self.certificate)
        return self.add(Entry.from_verdict(name, verdict, **kw))

    def fail(self, name: str, detail: str, witness=None, group: str = "") -> Entry:
        return self.add(Entry(name, FAIL, float("inf"), witness, self.certificate, detail, group))

    def ok(self, name: str, detail: str = "", group: str = "") -> Entry:
        return self.add(Entry(name, PASS, 0.0, None, self.certificate, detail, group))

    def extend(self, other: "Report", group: str | None = None) -> None:
        for e in other.entries:
            if group is not None and not e.group:
                e.group = group
            self.entries.append(e)
        self.notes.extend(n for n in other.notes if n not in self.notes)

    def first_failure(self) -> Entry | None:
        return next((e for e in self.entries if not e.passed), None)

    def find(self, prefix: str) -> list:
        return [e for e in self.entries if e.name.startswith(prefix)]

    @property
    def max_residual(self) -> float:
        return max((e.residual for e in self.entries), default=0.0)

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "command": self.command,
            "title": self.title,
            "passed": self.passed,
            "certificate": self.certificate,
            "notes": list(self.notes),
            "entries": [e.to_dict() for e in self.entries],
        }
        if timing and self.wall_time is not None:
            out["wall_time"] = round(self.wall_time, 6)
        return out

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True) + "\n"

    def format(self) -> str:
        head = f"== {self.command}: {self.title}" if self.command else f"== {self.title}"
        lines = [head, f"   certificate: {self.certificate}"]
        lines += [f"   note: {n}" for n in self.notes]
        group = None
        for e in self.entries:
            if e.group and e.group != group:
                lines.append(f"   [{e.group}]")
                group = e.group
            mark = "ok  " if e.passed else "FAIL"
            extra = f" residual={e.residual:.3g}" if e.residual and e.residual != float("inf") else ""
            if e.witness is not None:
                w = e.witness
                if isinstance(w, tuple) and all(isinstance(v, float) for v in w):
                    w = "(" + ", ".join(f"{v:.6g}" for v in w) + ")"
                extra += f" witness={w}"
            if e.detail:
                extra += f" -- {e.detail}"
            lines.append(f"   {mark} {e.name}: {e.tier}{extra}")
        verdict = "PASS" if self.passed else "FAIL"
        timing = f" in {self.wall_time:.3f}s" if self.wall_time is not None else ""
        lines.append(f"   => {verdict}{timing}")
        return "\n".join(lines)

    def __str__(self):
        return self.format()


__all__ = ["Entry", "Report", "PASS", "FAIL", "SYMBOLIC_ZERO", "NUMERIC_ZERO", "NONZERO"]
