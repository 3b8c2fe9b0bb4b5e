"""hoint: cost-counting evaluation for a small functional language,
size-level interpretations certifying step bounds, and a bounded-loop
imperative pipeline that compiles down to the functional core."""

__version__ = "0.1.0"
