"""Exception taxonomy shared across the package.

Every error a caller is expected to branch on lives here. CLI exit codes and
service HTTP statuses map from these classes, so raising the right type is
part of the public contract.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from scenarioforge.schema import Finding


class ScenarioForgeError(Exception):
    """Base class for all package errors."""


class ParseError(ScenarioForgeError):
    """Malformed document encoding. Carries position context when known."""

    def __init__(self, reason: str, *, path: str = "$", line: int | None = None,
                 column: int | None = None):
        self.reason = reason
        self.path = path
        self.line = line
        self.column = column
        where = path
        if line is not None:
            where = f"{path} (line {line}, column {column})"
        super().__init__(f"{reason} at {where}")


class ValidationRefused(ScenarioForgeError):
    """An operation was refused because its input fails schema validation."""

    def __init__(self, message: str, findings: Sequence["Finding"] = ()):
        self.findings = list(findings)
        if self.findings:
            detail = "; ".join(f"{f.field}: {f.message}" for f in self.findings)
            message = f"{message}: {detail}"
        super().__init__(message)


class TaxonomyError(ScenarioForgeError):
    """Risk taxonomy file is unusable (empty, duplicate ids, bad fields)."""


class TemplateError(ScenarioForgeError):
    """Prompt template body does not match its stage's placeholder contract."""


class PromptRenderError(ScenarioForgeError):
    """A required placeholder value was not supplied at render time."""


class MalformedOutputError(ScenarioForgeError):
    """Backend output could not be parsed into stage-shaped content.

    Keeps the raw text so failed generations stay inspectable in logs and
    audit details.
    """

    def __init__(self, message: str, raw_text: str = "", missing: str | None = None):
        self.raw_text = raw_text
        self.missing = missing
        super().__init__(message)


class BackendError(ScenarioForgeError):
    """Base for generation backend failures."""

    retryable = False


class UnknownBackendError(BackendError):
    """backend_id is not registered."""


class BackendUnreachableError(BackendError):
    retryable = True


class BackendTimeoutError(BackendError):
    retryable = True


class BackendStatusError(BackendError):
    """Backend answered with a non-success status."""

    def __init__(self, message: str, status_code: int | None = None):
        self.status_code = status_code
        # 5xx is usually transient, 4xx is a caller bug
        self.retryable = status_code is None or status_code >= 500
        super().__init__(message)


class GenerationFailedError(ScenarioForgeError):
    """A pipeline job exhausted its retries without usable output."""

    def __init__(self, message: str, attempts: int = 0):
        self.attempts = attempts
        super().__init__(message)


class StageOrderError(ScenarioForgeError):
    """Operation violates the stage gate (previous stage not approved)."""


class ReviewStateError(ScenarioForgeError):
    """Review submitted for a stage that is not pending review."""


class ConflictError(ScenarioForgeError):
    """Optimistic-concurrency conflict: expected revision is stale."""

    def __init__(self, message: str, current_revision: int | None = None):
        self.current_revision = current_revision
        super().__init__(message)


class UnknownDocumentError(ScenarioForgeError):
    """No document with the given id exists in the store."""


class StoreLockedError(ScenarioForgeError):
    """Another process holds the store writer lock."""


class StoreReadOnlyError(ScenarioForgeError):
    """Write attempted through a store handle opened read-only."""
