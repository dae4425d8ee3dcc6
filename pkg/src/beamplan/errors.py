"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class BeamplanError(Exception):
    """Base class for all errors raised by beamplan."""


class CatalogError(BeamplanError):
    """Catalog loading, lookup or role resolution failed."""


class TurnError(BeamplanError):
    """A turn names a direction pair no fold mirror can realize."""


class ConstraintError(BeamplanError):
    """A placement constraint cannot be met on its beam.

    ``kind`` is ``"unreachable"`` when the beam runs parallel to the
    requested coordinate line and ``"behind"`` when the line lies behind it.
    """

    def __init__(self, message: str, kind: str = "unreachable", element: str | None = None):
        super().__init__(message)
        self.kind = kind
        self.element = element


class OpticsError(BeamplanError):
    """An optical interaction has no physical solution."""


class LittrowError(OpticsError):
    """No Littrow angle exists for the requested grating order."""


class PlacementError(BeamplanError):
    """Invalid baseplate construction (bounds, duplicate names, drills)."""


class MeshError(BeamplanError):
    """Malformed or degenerate mesh input or output."""


class ParseError(BeamplanError):
    """Layout document syntax error with a source position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
        self.bare_message = message


class CompileError(BeamplanError):
    """Compilation produced error diagnostics."""

    def __init__(self, message: str, diagnostics=()):
        super().__init__(message)
        self.diagnostics = tuple(diagnostics)
