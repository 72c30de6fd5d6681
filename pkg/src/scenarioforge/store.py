"""Versioned file store with an append-only audit log.

Layout under a store root::

    use_cases/   scenarios/   assessments/   jobs/
    taxonomy/    rubric/      templates/
    audit.log    backends.json   store.lock

Each document lives in one file: a small envelope ``{"revision": N, "doc":
{...}}`` whose inner ``doc`` is the canonical encoding. Writes append an
audit line, then temp-write and atomically rename the document file; the
rename is the commit point. On writer open, a torn or uncommitted audit tail
is rolled back, so the store always reloads to the last committed revision.

One writer per store root (flock on ``store.lock``); readers are unlimited.
"""

from __future__ import annotations

import fcntl
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator

from scenarioforge import canonical
from scenarioforge.errors import (
    ConflictError,
    ParseError,
    StoreLockedError,
    StoreReadOnlyError,
    UnknownDocumentError,
)
from scenarioforge.schema import Scenario, Stage, StageState, utc_now

KIND_DIRS: dict[str, str] = {
    "use_case_worksheet": "use_cases",
    "scenario": "scenarios",
    "rubric_assessment": "assessments",
    "expansion_job": "jobs",
}

AUDIT_FILENAME = "audit.log"
LOCK_FILENAME = "store.lock"
BACKENDS_FILENAME = "backends.json"
TAXONOMY_FILENAME = "default.json"
RUBRIC_FILENAME = "default.json"

# Interrupt points exercised by the crash-safety harness, in write order.
CRASH_POINTS = (
    "before_audit", "mid_audit", "after_audit",
    "after_temp_write", "after_rename",
)


class CrashPoint(Exception):
    """Raised by a crash hook to simulate a process kill mid-write."""


@dataclass(frozen=True)
class AuditEvent:
    """One audit line. ``revision`` is set for document mutations and lets
    recovery detect an audit line whose write never committed."""

    seq: int
    timestamp: str
    actor: str
    action: str
    subject_id: str
    stage: str | None = None
    revision: int | None = None
    detail: str = ""

    def to_line(self) -> str:
        record = {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "actor": self.actor,
            "action": self.action,
            "subject_id": self.subject_id,
            "stage": self.stage,
            "revision": self.revision,
            "detail": self.detail,
        }
        return json.dumps(record, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> "AuditEvent":
        record = json.loads(line)
        return cls(
            seq=record["seq"],
            timestamp=record["timestamp"],
            actor=record["actor"],
            action=record["action"],
            subject_id=record["subject_id"],
            stage=record.get("stage"),
            revision=record.get("revision"),
            detail=record.get("detail", ""),
        )


@dataclass(frozen=True)
class StoredDocument:
    doc: canonical.Document
    revision: int
    kind: str


@dataclass
class _IndexEntry:
    kind: str
    revision: int
    path: Path
    use_case_id: str | None = None
    title_casefold: str | None = None
    name: str | None = None
    # scenario-only: stage -> (state, pending_since timestamp)
    stage_info: dict[Stage, tuple[StageState, str]] = field(default_factory=dict)
    rejected: bool = False


def _scenario_stage_info(s: Scenario) -> dict[Stage, tuple[StageState, str]]:
    info: dict[Stage, tuple[StageState, str]] = {}
    for stage in Stage.ordered():
        since = ""
        for rev in s.revisions:
            if rev.stage is stage:
                since = rev.timestamp
        info[stage] = (s.stage_state(stage), since)
    return info


class Store:
    """Single-writer document store; see module docstring for the protocol."""

    def __init__(self, root: str | Path, *, create: bool = False,
                 read_only: bool = False, durability: str = "full"):
        if durability not in ("full", "relaxed"):
            raise ValueError(f"unknown durability mode {durability!r}")
        self.root = Path(root)
        self.read_only = read_only
        self.durability = durability
        self.mutation_count = 0
        self.crash_hook: Callable[[str], None] | None = None
        self._mutex = threading.Lock()
        self._lock_fd: int | None = None
        self._index: dict[str, _IndexEntry] = {}
        self._next_seq = 1

        if create:
            self._create_layout()
        if not self.root.is_dir():
            raise UnknownDocumentError(f"store root does not exist: {self.root}")
        if not (self.root / AUDIT_FILENAME).exists() and not create:
            raise UnknownDocumentError(
                f"{self.root} is not a store (no {AUDIT_FILENAME}); "
                f"run 'init' first")
        if not read_only:
            self._acquire_lock()
            self._recover()
        self._load_index()

    # -- lifecycle ---------------------------------------------------------

    def _create_layout(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        for sub in (*KIND_DIRS.values(), "taxonomy", "rubric", "templates"):
            (self.root / sub).mkdir(exist_ok=True)
        audit = self.root / AUDIT_FILENAME
        if not audit.exists():
            audit.touch()

    def _acquire_lock(self) -> None:
        lock_path = self.root / LOCK_FILENAME
        fd = os.open(lock_path, os.O_RDWR | os.O_CREAT, 0o644)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            os.close(fd)
            raise StoreLockedError(
                f"another process holds the writer lock on {self.root}") from None
        self._lock_fd = fd

    def close(self) -> None:
        if self._lock_fd is not None:
            fcntl.flock(self._lock_fd, fcntl.LOCK_UN)
            os.close(self._lock_fd)
            self._lock_fd = None

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- recovery ----------------------------------------------------------

    def _recover(self) -> None:
        """Roll back a torn or uncommitted audit tail; drop temp files."""
        for kind_dir in KIND_DIRS.values():
            directory = self.root / kind_dir
            if directory.is_dir():
                for tmp in directory.glob(".*.tmp"):
                    tmp.unlink()
        audit_path = self.root / AUDIT_FILENAME
        if not audit_path.exists():
            audit_path.touch()
            return
        raw = audit_path.read_bytes()
        if not raw:
            return
        keep = len(raw)
        lines = raw.split(b"\n")
        # A complete log ends with a newline, so the final split chunk is
        # empty; anything else is a torn line.
        tail = lines.pop()
        events: list[AuditEvent] = []
        for line in lines:
            events.append(AuditEvent.from_line(line.decode("utf-8")))
        if tail:
            keep -= len(tail)
        if events:
            last = events[-1]
            if last.revision is not None and not self._committed(last):
                keep -= len(lines[-1]) + 1
                events.pop()
        if keep < len(raw):
            with open(audit_path, "r+b") as f:
                f.truncate(keep)
        self._next_seq = events[-1].seq + 1 if events else 1

    def _committed(self, event: AuditEvent) -> bool:
        """Does the stored document reflect this audit event's write?"""
        for kind_dir in KIND_DIRS.values():
            path = self.root / kind_dir / f"{event.subject_id}.json"
            if path.exists():
                envelope = json.loads(path.read_text(encoding="utf-8"))
                return envelope.get("revision", 0) >= (event.revision or 0)
        return False

    # -- index -------------------------------------------------------------

    def _load_index(self) -> None:
        self._index.clear()
        max_seq = 0
        for kind, kind_dir in KIND_DIRS.items():
            directory = self.root / kind_dir
            if not directory.is_dir():
                continue
            for path in sorted(directory.glob("*.json")):
                stored = self._read_envelope(path)
                self._index[self._doc_id(stored.doc)] = self._entry_for(
                    stored.doc, stored.revision, path)
        if self.read_only:
            audit_path = self.root / AUDIT_FILENAME
            if audit_path.exists():
                for event in self.audit_events():
                    max_seq = max(max_seq, event.seq)
                self._next_seq = max_seq + 1

    @staticmethod
    def _doc_id(doc: canonical.Document) -> str:
        return doc.id  # every document kind carries an id

    def _entry_for(self, doc: canonical.Document, revision: int,
                   path: Path) -> _IndexEntry:
        kind = canonical.kind_of(doc)
        entry = _IndexEntry(kind=kind, revision=revision, path=path)
        if kind == "scenario":
            entry.use_case_id = doc.use_case_id
            entry.title_casefold = doc.title.casefold()
            entry.stage_info = _scenario_stage_info(doc)
            entry.rejected = doc.is_rejected
        elif kind == "use_case_worksheet":
            entry.name = doc.name
        elif kind == "expansion_job":
            entry.use_case_id = doc.use_case_id
        elif kind == "rubric_assessment":
            entry.use_case_id = None
        return entry

    def _read_envelope(self, path: Path) -> StoredDocument:
        try:
            envelope = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ParseError(f"corrupt store file {path.name}: {e.msg}",
                             line=e.lineno, column=e.colno) from e
        if not isinstance(envelope, dict) or "doc" not in envelope:
            raise ParseError(f"corrupt store file {path.name}: no document envelope")
        doc = canonical.parse_obj(envelope["doc"], canonical.STRICT)
        return StoredDocument(doc=doc, revision=int(envelope.get("revision", 1)),
                              kind=canonical.kind_of(doc))

    # -- paths -------------------------------------------------------------

    def _doc_path(self, kind: str, doc_id: str) -> Path:
        return self.root / KIND_DIRS[kind] / f"{doc_id}.json"

    @property
    def taxonomy_path(self) -> Path:
        return self.root / "taxonomy" / TAXONOMY_FILENAME

    @property
    def rubric_path(self) -> Path:
        return self.root / "rubric" / RUBRIC_FILENAME

    @property
    def templates_dir(self) -> Path:
        return self.root / "templates"

    @property
    def backends_path(self) -> Path:
        return self.root / BACKENDS_FILENAME

    @property
    def audit_path(self) -> Path:
        return self.root / AUDIT_FILENAME

    # -- write path ----------------------------------------------------------

    def _hook(self, point: str) -> None:
        if self.crash_hook is not None:
            self.crash_hook(point)

    def _fsync(self, fd: int) -> None:
        if self.durability == "full":
            os.fsync(fd)

    def _append_audit(self, event: AuditEvent) -> None:
        line = (event.to_line() + "\n").encode("utf-8")
        with open(self.audit_path, "ab") as f:
            if self.crash_hook is not None:
                # Give the harness a chance to tear the line mid-write.
                try:
                    self._hook("mid_audit")
                except CrashPoint:
                    f.write(line[: max(1, len(line) // 2)])
                    f.flush()
                    self._fsync(f.fileno())
                    raise
            f.write(line)
            f.flush()
            self._fsync(f.fileno())

    def put(self, doc: canonical.Document, expected_revision: int, *,
            actor: str, action: str, stage: Stage | None = None,
            detail: str = "") -> int:
        """Durably write ``doc`` if ``expected_revision`` is current.

        Returns the new revision. The audit event is appended atomically with
        the write: audit line first, then temp-file + rename as the commit.
        """
        if self.read_only:
            raise StoreReadOnlyError("store opened read-only")
        kind = canonical.kind_of(doc)
        if kind not in KIND_DIRS:
            raise ValueError(f"documents of kind {kind!r} are not stored "
                             f"(config documents live in their own files)")
        doc_id = self._doc_id(doc)
        if not doc_id or "/" in doc_id or doc_id.startswith("."):
            raise ValueError(f"unusable document id: {doc_id!r}")
        with self._mutex:
            entry = self._index.get(doc_id)
            current = entry.revision if entry else 0
            if entry and entry.kind != kind:
                raise ConflictError(
                    f"id '{doc_id}' already holds a {entry.kind} document")
            if expected_revision != current:
                raise ConflictError(
                    f"revision conflict on '{doc_id}': expected "
                    f"{expected_revision}, current {current}",
                    current_revision=current)
            new_revision = current + 1
            event = AuditEvent(
                seq=self._next_seq,
                timestamp=utc_now(),
                actor=actor,
                action=action,
                subject_id=doc_id,
                stage=stage.value if stage else None,
                revision=new_revision,
                detail=detail,
            )
            path = self._doc_path(kind, doc_id)
            envelope = {"revision": new_revision,
                        "doc": canonical.doc_to_dict(doc)}
            data = (json.dumps(envelope, ensure_ascii=False, indent=2) + "\n"
                    ).encode("utf-8")

            self._hook("before_audit")
            self._append_audit(event)
            self._hook("after_audit")

            tmp = path.parent / f".{doc_id}.json.tmp"
            fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o644)
            try:
                os.write(fd, data)
                self._fsync(fd)
            finally:
                os.close(fd)
            self._hook("after_temp_write")

            os.replace(tmp, path)  # commit point
            self._hook("after_rename")
            if self.durability == "full":
                dir_fd = os.open(path.parent, os.O_RDONLY)
                try:
                    os.fsync(dir_fd)
                finally:
                    os.close(dir_fd)

            self._next_seq += 1
            self._index[doc_id] = self._entry_for(doc, new_revision, path)
            self.mutation_count += 1
            return new_revision

    # -- read path -----------------------------------------------------------

    def exists(self, doc_id: str) -> bool:
        return doc_id in self._index

    def get(self, doc_id: str) -> StoredDocument:
        entry = self._index.get(doc_id)
        if entry is None:
            raise UnknownDocumentError(f"unknown document id: {doc_id}")
        return self._read_envelope(entry.path)

    def revision_of(self, doc_id: str) -> int:
        entry = self._index.get(doc_id)
        if entry is None:
            raise UnknownDocumentError(f"unknown document id: {doc_id}")
        return entry.revision

    def list(self, kind: str, *, use_case_id: str | None = None,
             include_rejected: bool = True) -> list[str]:
        """Sorted ids of documents of ``kind``, optionally filtered."""
        if kind not in KIND_DIRS:
            raise ValueError(f"unknown document kind {kind!r}")
        out = []
        for doc_id, entry in self._index.items():
            if entry.kind != kind:
                continue
            if use_case_id is not None and entry.use_case_id != use_case_id:
                continue
            if not include_rejected and entry.rejected:
                continue
            out.append(doc_id)
        return sorted(out)

    def iter_docs(self, kind: str, *, use_case_id: str | None = None,
                  include_rejected: bool = True) -> Iterator[StoredDocument]:
        for doc_id in self.list(kind, use_case_id=use_case_id,
                                include_rejected=include_rejected):
            yield self.get(doc_id)

    def scenario_titles(self, use_case_id: str,
                        exclude: str | None = None) -> set[str]:
        """Casefolded titles of a use case's scenarios (for uniqueness checks)."""
        return {
            entry.title_casefold
            for doc_id, entry in self._index.items()
            if entry.kind == "scenario" and entry.use_case_id == use_case_id
            and doc_id != exclude and entry.title_casefold is not None
        }

    def count(self, kind: str, *, use_case_id: str | None = None) -> int:
        return len(self.list(kind, use_case_id=use_case_id))

    def pending_reviews(self, *, stage: Stage | None = None,
                        use_case_id: str | None = None) -> list[dict[str, Any]]:
        """Scenarios with a stage pending review, oldest first."""
        queue: list[dict[str, Any]] = []
        for doc_id, entry in self._index.items():
            if entry.kind != "scenario":
                continue
            if use_case_id is not None and entry.use_case_id != use_case_id:
                continue
            for st, (state, since) in entry.stage_info.items():
                if state is not StageState.PENDING_REVIEW:
                    continue
                if stage is not None and st is not stage:
                    continue
                queue.append({
                    "scenario_id": doc_id,
                    "use_case_id": entry.use_case_id,
                    "stage": st.value,
                    "pending_since": since,
                })
        queue.sort(key=lambda item: (item["pending_since"], item["scenario_id"],
                                     item["stage"]))
        return queue

    # -- audit ---------------------------------------------------------------

    def audit_events(self) -> Iterator[AuditEvent]:
        if not self.audit_path.exists():
            return
        with open(self.audit_path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    yield AuditEvent.from_line(line)

    def audit_event_count(self, mutating_only: bool = True) -> int:
        return sum(
            1 for event in self.audit_events()
            if not mutating_only or event.revision is not None)

    # -- id allocation ---------------------------------------------------------

    def allocate_scenario_id(self, use_case_id: str) -> str:
        base = use_case_id[3:] if use_case_id.startswith("uc-") else use_case_id
        n = self.count("scenario", use_case_id=use_case_id) + 1
        while True:
            candidate = f"sc-{base}-{n:03d}"
            if candidate not in self._index:
                return candidate
            n += 1

    def allocate_job_id(self) -> str:
        n = self.count("expansion_job") + 1
        while True:
            candidate = f"job-{n:05d}"
            if candidate not in self._index:
                return candidate
            n += 1

    def allocate_assessment_id(self, scenario_id: str) -> str:
        n = sum(1 for _id, e in self._index.items()
                if e.kind == "rubric_assessment"
                and _id.startswith(f"as-{scenario_id}-")) + 1
        while True:
            candidate = f"as-{scenario_id}-{n:03d}"
            if candidate not in self._index:
                return candidate
            n += 1
