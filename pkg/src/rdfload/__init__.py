"""Bulk-load benchmark harness for RDF stores, with an embedded reference store."""

__version__ = "0.1.0"

from rdfload._accel import BACKEND  # noqa: E402
from rdfload.terms import Term, TermKind, Triple  # noqa: E402

__all__ = ["BACKEND", "Term", "TermKind", "Triple", "__version__"]
