"""Exact finite-stage computations for Villadsen-type inductive systems.

Modules: ``dimension_system`` (multiplicities, order units, pullbacks),
``partition_scheme`` (connecting-map seeds and intertwiners),
``measures``/``observables``/``trace_tower`` (traces on the finite stages),
``poulsen_density`` (certified approximation by extreme traces),
``af_intertwining`` (AF-Villadsen comparison) and ``config``/``cli``.
"""

__version__ = "0.1.0"
