"""Strong-converse capacity bounds for bidirectional quantum channels.

Numerical toolkit computing SDP upper bounds on the PPT-assisted quantum
capacity and the LOCC-assisted secret-key capacity of two-party quantum
channels, plus private-reading bounds for wiretap memory cells.
"""

__version__ = "0.1.0"

from . import operators, solver  # noqa: F401
