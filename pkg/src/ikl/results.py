"""Check outcomes shared by dynamics, diagnostics and the harness."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any


class Status(str, enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    FLAGGED = "Flagged"
    NOT_APPLICABLE = "NotApplicable"


@dataclass
class CheckResult:
    name: str
    status: Status
    measured: dict[str, Any] = field(default_factory=dict)
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.status is Status.PASS

    def to_dict(self) -> dict[str, Any]:
        return {"status": self.status.value, "measured": self.measured, "message": self.message}


def verdict(name: str, ok: bool, message: str = "", **measured: Any) -> CheckResult:
    return CheckResult(name, Status.PASS if ok else Status.FAIL, measured, message)
