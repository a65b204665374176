from ._horolab import (
    Group,
    HorolabError,
    block_graph,
    busemann_patch,
    find_period,
    perron,
    run,
    spherical_average,
    transversal,
)

__all__ = [
    "Group",
    "HorolabError",
    "block_graph",
    "busemann_patch",
    "find_period",
    "perron",
    "run",
    "spherical_average",
    "transversal",
]
