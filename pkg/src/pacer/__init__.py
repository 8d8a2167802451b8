"""Preference-conditioned terrain costmaps.

Procedurally generated terrain worlds stand in for aerial imagery so the
whole pipeline is reproducible from seeds: dataset generation, staged
training of the costmap network, A* planning over stitched cost fields, and
the alignment checks that tie generated costs back to the hidden preference
ordering.
"""

__version__ = "0.1.0"
