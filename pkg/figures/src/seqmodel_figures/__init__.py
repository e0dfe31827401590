"""Figure rendering for seqmodel aggregate CSVs."""

__version__ = "0.1.0"
