"""Level-2 rough-path lifts of regenerative processes.

Submodules: :mod:`path_lift` (lifts and Chen algebra), :mod:`variation`
(p-variation norms), :mod:`regen` (generators and block statistics),
:mod:`limits` (estimators and Monte Carlo checks), :mod:`renewal`
(discrete renewal theory) and :mod:`cli` (batch runner).
"""

__version__ = "0.1.0"
