"""Expansion job records: one per pipeline run, persisted for polling."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from scenarioforge.schema import Stage, utc_now


class JobStatus(str, Enum):
    QUEUED = "queued"
    RUNNING = "running"
    # Generation succeeded and at least one scenario now awaits review.
    AWAITING_REVIEW = "awaiting_review"
    # Derived terminal: everything the job produced has since been reviewed.
    COMPLETED = "completed"
    FAILED = "failed"


TERMINAL_JOB_STATUSES = frozenset(
    {JobStatus.AWAITING_REVIEW, JobStatus.COMPLETED, JobStatus.FAILED})


@dataclass(frozen=True)
class ExpansionJob:
    """A single expansion run over one use case at one stage."""

    id: str
    use_case_id: str
    stage: Stage
    status: JobStatus
    target_count: int | None = None
    attempts: int = 0
    backend_id: str = ""
    detail: str = ""
    scenario_ids: tuple[str, ...] = ()
    created_at: str = ""
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "scenario_ids", tuple(self.scenario_ids))
        if not self.created_at:
            object.__setattr__(self, "created_at", utc_now())
        object.__setattr__(self, "extra", dict(self.extra))
