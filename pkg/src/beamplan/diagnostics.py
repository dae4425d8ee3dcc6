"""Diagnostics emitted by tracing, design-rule lints and collision checks.

Codes are a stable contract:

==================  ========  ==============================================
code                severity  meaning
==================  ========  ==============================================
trace.dangling      error     element queued on a beam index that never
                              materialized or was never reached
trace.constraint    error     placement constraint unreachable / behind beam
trace.optics        error     interaction without a physical solution
trace.miss          error     beam runs edge-on to its queued element
trace.loop          error     interaction budget exhausted (optical loop)
trace.depth         warning   splitter generations exceeded ``max_depth``
beam.clip           warning   beam strikes a queued element outside its
                              clear aperture
rule.height         warning   optical centers on one plate at several heights
rule.grid           warning   beam not along a table grid direction
rule.branching      warning   main beam branches to both sides on one plate
rule.handoff        warning   beam leaving one plate enters another off its
                              entry lines
collide.footprint   error     two element footprints overlap
collide.beam        error     beam passes through a footprint it does not
                              interact with
collide.edge        warning   footprint crosses the usable plate outline
collide.plate       error     two plates overlap on the table
layout.bounds       error     plate instance extends beyond the table
layout.reference    error     unknown template, optic type, role or component
==================  ========  ==============================================
"""

from __future__ import annotations

from dataclasses import dataclass

SEVERITIES = ("error", "warning")


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    subject: str = ""

    def __post_init__(self) -> None:
        if self.severity not in SEVERITIES:
            raise ValueError(f"bad severity {self.severity!r}")

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def sort_key(self) -> tuple:
        return (SEVERITIES.index(self.severity), self.code, self.subject, self.message)

    def format(self) -> str:
        subject = self.subject.replace(" ", "_") or "-"
        return f"{self.severity} {self.code} {subject} {self.message}"

    def tagged(self, prefix: str) -> Diagnostic:
        subject = f"{prefix}/{self.subject}" if self.subject else prefix
        return Diagnostic(self.severity, self.code, self.message, subject)


def error(code: str, message: str, subject: str = "") -> Diagnostic:
    return Diagnostic("error", code, message, subject)


def warning(code: str, message: str, subject: str = "") -> Diagnostic:
    return Diagnostic("warning", code, message, subject)


def sort_diagnostics(diags) -> tuple[Diagnostic, ...]:
    return tuple(sorted(set(diags), key=Diagnostic.sort_key))


def has_errors(diags) -> bool:
    return any(d.is_error for d in diags)
