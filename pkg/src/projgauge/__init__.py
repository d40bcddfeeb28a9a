"""Heat-kernel lattice gauge measures on U(1), SU(2) and SU(3).

Modules: group_core (groups, characters, Lie algebra), heat_kernel (dual
series and theta forms), hida_calculus (norms, metric, S-transform), lattice
(refinement and coarsening), measures (sampling and consistency checks),
strata (orbit-type classification), suite and cli (verification harness).
"""
from .group_core import GroupElement, GroupKind, RepLabel
from .heat_kernel import heat_kernel, log_heat_kernel

__all__ = ["GroupElement", "GroupKind", "RepLabel", "heat_kernel", "log_heat_kernel"]
