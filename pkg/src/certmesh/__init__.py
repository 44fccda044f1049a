"""Multi-path, trust-weighted certificate exchange for mobile ad hoc networks."""

__version__ = "0.1.0"
