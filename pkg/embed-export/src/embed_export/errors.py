"""Error taxonomy for the export tools.

Every anticipated failure raises an ExportError subclass with an actionable
message.  The command line maps ExportError to exit code 1 and anything else
to exit code 2, matching the convention of the consuming toolchain.
"""


class ExportError(Exception):
    """Base class for all anticipated export failures."""


class SequenceError(ExportError):
    """A protein sequence is empty or contains invalid residue codes."""


class MoleculeError(ExportError):
    """A molecule structure string could not be parsed."""


class PocketError(ExportError):
    """Pocket selection input is malformed or selects nothing."""


class ManifestError(ExportError):
    """A dataset description cannot be assembled into a manifest."""
