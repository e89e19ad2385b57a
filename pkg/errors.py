"""
Kinetic Fokker-Planck Harness - Errors Module

Exception hierarchy shared by the solver, the audits and the command line.
"""

from typing import Optional


class KineticError(Exception):
    """Base class for every error raised by the harness."""


class GridError(KineticError, ValueError):
    """Invalid grid specification or a field that does not match its grid."""


class ScenarioError(KineticError, ValueError):
    """Invalid scenario configuration.

    Args:
        message: Human readable description
        key_path: Dotted path of the offending key (e.g. ``boundary.theta``)
    """

    def __init__(self, message: str, key_path: Optional[str] = None):
        self.key_path = key_path
        prefix = f"{key_path}: " if key_path else ""
        super().__init__(prefix + message)


class BoundaryError(KineticError, ValueError):
    """Invalid boundary data (reflection coefficient, negative inflow)."""


class CFLError(KineticError, ValueError):
    """Time step violates the transport stability bound."""


class ModelError(KineticError, ValueError):
    """Invalid or incompletely declared collision-frequency model."""


class SolverError(KineticError, RuntimeError):
    """Failure inside a substep: linear solve, negativity or corrupted state.

    Args:
        message: Human readable description
        t: Simulation time at which the failure happened, when known
    """

    def __init__(self, message: str, t: Optional[float] = None):
        self.t = t
        suffix = f" (t={t:.17g})" if t is not None else ""
        super().__init__(message + suffix)


class SnapshotError(KineticError, ValueError):
    """Snapshot file whose header or payload does not match expectations."""


class LedgerError(KineticError, ValueError):
    """Ledger CSV that cannot be re-audited."""
