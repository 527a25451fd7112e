"""Uniformity metrology for etched nanopillar arrays.

Top-view SEM area statistics, AFM height analysis, pillar design arithmetic
and a synthetic scene generator with exact ground truth.
"""

__version__ = "0.1.0"
