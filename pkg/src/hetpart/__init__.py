"""hetpart: partitioning graphs and meshes onto compute systems whose
processing units differ in speed and memory capacity.

The pipeline has two stages: first compute per-block target sizes that are
speed-proportional but never exceed any unit's memory (``target_weights``),
then hand those sizes to a geometric partitioner (``sfc``, ``rcb``,
``kmeans``) and optionally improve the cut with multilevel pairwise FM
refinement (``refine``). ``metrics`` evaluates results, ``generators``
builds synthetic inputs, and ``cli`` ties everything together.
"""

__version__ = "0.1.0"

__all__ = [
    "cli",
    "errors",
    "generators",
    "graph",
    "kmeans",
    "metrics",
    "rcb",
    "refine",
    "rng",
    "sfc",
    "target_weights",
    "topology",
]
