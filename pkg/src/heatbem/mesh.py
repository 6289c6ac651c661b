"""Space-time boundary meshes on the two lateral sides {a, b} x (0, T).

A mesh is two sorted breakpoint arrays, one per side; elements are the
consecutive intervals.  Storing breakpoints (rather than element tuples) makes
the partition property structural: elements can never overlap or leave gaps,
and refinement by midpoint bisection never moves existing nodes.

Element indexing is stable: all left-side elements in increasing time first,
then all right-side elements in increasing time.  This fixes matrix layout;
any other consistent order would give permutation-similar matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

__all__ = [
    "Side",
    "BoundaryElement",
    "BoundaryMesh",
    "uniform_mesh",
    "refine_uniform",
    "refine_adaptive",
    "quasi_uniformity_constant",
    "dumps",
    "loads",
]


class Side(Enum):
    LEFT = "L"
    RIGHT = "R"

    @property
    def outward_normal(self) -> float:
        return -1.0 if self is Side.LEFT else 1.0


@dataclass(frozen=True)
class BoundaryElement:
    """One time segment on one side of the space-time boundary."""

    side: Side
    t_begin: float
    t_end: float
    index: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.t_begin < self.t_end):
            raise ValueError(
                f"element needs 0 <= t_begin < t_end, got [{self.t_begin}, {self.t_end}]"
            )

    @property
    def size(self) -> float:
        return self.t_end - self.t_begin


def _check_breaks(breaks: np.ndarray, horizon: float, side: str) -> None:
    if breaks.ndim != 1 or len(breaks) < 2:
        raise ValueError(f"{side} side needs at least one element")
    if breaks[0] != 0.0 or breaks[-1] != horizon:
        raise ValueError(f"{side} breakpoints must span [0, {horizon}] exactly")
    if np.any(np.diff(breaks) <= 0.0):
        raise ValueError(f"{side} breakpoints must be strictly increasing")


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Decomposition of {a, b} x (0, T) into boundary elements."""

    horizon: float
    interval: tuple[float, float]
    left_breaks: np.ndarray
    right_breaks: np.ndarray
    level: int = 0

    def __post_init__(self) -> None:
        a, b = self.interval
        if not (a < b and self.horizon > 0.0):
            raise ValueError("need a < b and T > 0")
        object.__setattr__(self, "left_breaks", np.asarray(self.left_breaks, float))
        object.__setattr__(self, "right_breaks", np.asarray(self.right_breaks, float))
        _check_breaks(self.left_breaks, self.horizon, "left")
        _check_breaks(self.right_breaks, self.horizon, "right")

    @property
    def n_left(self) -> int:
        return len(self.left_breaks) - 1

    @property
    def n_right(self) -> int:
        return len(self.right_breaks) - 1

    @property
    def n_elements(self) -> int:
        return self.n_left + self.n_right

    @cached_property
    def t_begin_all(self) -> np.ndarray:
        return np.concatenate([self.left_breaks[:-1], self.right_breaks[:-1]])

    @cached_property
    def t_end_all(self) -> np.ndarray:
        return np.concatenate([self.left_breaks[1:], self.right_breaks[1:]])

    @cached_property
    def element_sizes(self) -> np.ndarray:
        return self.t_end_all - self.t_begin_all

    @cached_property
    def x_all(self) -> np.ndarray:
        a, b = self.interval
        return np.concatenate(
            [np.full(self.n_left, a), np.full(self.n_right, b)]
        )

    @cached_property
    def normal_all(self) -> np.ndarray:
        return np.concatenate(
            [np.full(self.n_left, -1.0), np.full(self.n_right, 1.0)]
        )

    @property
    def h_max(self) -> float:
        return float(self.element_sizes.max())

    @property
    def h_min(self) -> float:
        return float(self.element_sizes.min())

    def side_of(self, index: int) -> Side:
        return Side.LEFT if index < self.n_left else Side.RIGHT

    def elements(self) -> list[BoundaryElement]:
        out = []
        for i in range(self.n_elements):
            out.append(
                BoundaryElement(
                    side=self.side_of(i),
                    t_begin=float(self.t_begin_all[i]),
                    t_end=float(self.t_end_all[i]),
                    index=i,
                )
            )
        return out


def uniform_mesh(
    horizon: float, level: int, interval: tuple[float, float] = (0.0, 1.0)
) -> BoundaryMesh:
    """Uniform mesh with 2**level elements per side (N = 2**(level+1) total).

    Built by repeated midpoint bisection of [0, T] so that refine_uniform of a
    coarser uniform mesh reproduces this one bitwise.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    breaks = np.array([0.0, float(horizon)])
    for _ in range(level):
        breaks = _bisect_all(breaks)
    return BoundaryMesh(
        horizon=float(horizon),
        interval=(float(interval[0]), float(interval[1])),
        left_breaks=breaks,
        right_breaks=breaks.copy(),
        level=level,
    )


def _bisect_all(breaks: np.ndarray) -> np.ndarray:
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    out = np.empty(2 * len(breaks) - 1)
    out[0::2] = breaks
    out[1::2] = mids
    return out


def _bisect_marked(breaks: np.ndarray, marked: set[int]) -> np.ndarray:
    if not marked:
        return breaks.copy()
    pieces = [breaks[:1]]
    for i in range(len(breaks) - 1):
        if i in marked:
            pieces.append(np.array([0.5 * (breaks[i] + breaks[i + 1])]))
        pieces.append(breaks[i + 1 : i + 2])
    return np.concatenate(pieces)


def refine_uniform(mesh: BoundaryMesh) -> BoundaryMesh:
    """Bisect every element; N doubles, existing nodes are kept bitwise."""
    return BoundaryMesh(
        horizon=mesh.horizon,
        interval=mesh.interval,
        left_breaks=_bisect_all(mesh.left_breaks),
        right_breaks=_bisect_all(mesh.right_breaks),
        level=mesh.level + 1,
    )


def refine_adaptive(
    mesh: BoundaryMesh, indicators, theta: float = 0.5
) -> BoundaryMesh:
    """Maximum-strategy marking: bisect every element with eta >= theta * max(eta).

    All-zero indicators refine the single largest element so the refinement
    loop always makes progress.
    """
    eta = np.asarray(indicators, dtype=float)
    if eta.shape != (mesh.n_elements,):
        raise ValueError(
            f"need one indicator per element ({mesh.n_elements}), got shape {eta.shape}"
        )
    if np.any(eta < 0.0):
        raise ValueError("indicators must be nonnegative")
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must be in (0, 1]")

    eta_max = eta.max()
    if eta_max == 0.0:
        marked = {int(np.argmax(mesh.element_sizes))}
    else:
        marked = set(np.flatnonzero(eta >= theta * eta_max).tolist())

    nl = mesh.n_left
    marked_left = {i for i in marked if i < nl}
    marked_right = {i - nl for i in marked if i >= nl}
    return BoundaryMesh(
        horizon=mesh.horizon,
        interval=mesh.interval,
        left_breaks=_bisect_marked(mesh.left_breaks, marked_left),
        right_breaks=_bisect_marked(mesh.right_breaks, marked_right),
        level=mesh.level + 1,
    )


def quasi_uniformity_constant(mesh: BoundaryMesh) -> float:
    """Largest size ratio between node-sharing neighbours on the same side.

    Sides are geometrically disconnected, so adjacency never crosses sides.
    A single-element side contributes the neutral ratio 1.
    """
    worst = 1.0
    for breaks in (mesh.left_breaks, mesh.right_breaks):
        sizes = np.diff(breaks)
        if len(sizes) < 2:
            continue
        ratios = sizes[1:] / sizes[:-1]
        worst = max(worst, float(np.max(ratios)), float(np.max(1.0 / ratios)))
    return worst


def dumps(mesh: BoundaryMesh) -> str:
    """One line per element: ``side t_begin t_end`` with 17 significant digits."""
    lines = []
    for el in mesh.elements():
        lines.append(f"{el.side.value} {el.t_begin:.17g} {el.t_end:.17g}")
    return "\n".join(lines) + "\n"


def loads(
    text: str, interval: tuple[float, float] = (0.0, 1.0), level: int = 0
) -> BoundaryMesh:
    """Parse the ``dumps`` format back into a mesh."""
    per_side: dict[str, list[tuple[float, float]]] = {"L": [], "R": []}
    for raw in text.splitlines():
        raw = raw.strip()
        if not raw:
            continue
        tag, t0, t1 = raw.split()
        per_side[tag].append((float(t0), float(t1)))
    breaks = {}
    horizon = 0.0
    for tag, elems in per_side.items():
        elems.sort()
        if not elems:
            raise ValueError(f"side {tag} has no elements")
        pts = [elems[0][0]]
        for t0, t1 in elems:
            if t0 != pts[-1]:
                raise ValueError(f"side {tag} elements do not tile: gap at {t0}")
            pts.append(t1)
        breaks[tag] = np.array(pts)
        horizon = max(horizon, pts[-1])
    return BoundaryMesh(
        horizon=horizon,
        interval=interval,
        left_breaks=breaks["L"],
        right_breaks=breaks["R"],
        level=level,
    )
