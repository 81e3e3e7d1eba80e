"""
Grouping of fixed points that represent the same stationary state.

Fixed points found from different starts are nodes of an
:class:`objectgraph.ObjectGraph`; two nodes are joined (in both
directions) when their W_p distance is within the merge
tolerance. Clusters are the connected components.
"""
import dataclasses
from typing import Dict, List, Optional, Tuple

import numpy as np
from objectgraph import ObjectGraph

from ._measures import EmpiricalMeasure, wasserstein


@dataclasses.dataclass(frozen=True)
class Proximity:
    """
    Edge attribute: the two fixed points are within *merge_tol*.

    Attributes:
      distance
        W_p distance between the fixed points

      estimator
        Estimator that produced *distance*
    """

    distance: float
    estimator: str


@dataclasses.dataclass(eq=False)
class FixedPointNode:
    """
    A fixed point found by one Picard run.

    Attributes:
      start_id
        Index of the start the run began from

      measure
        The fixed point estimate

      converged
        Whether the run met its stopping rule
    """

    start_id: int
    measure: EmpiricalMeasure
    converged: bool

    @property
    def identifier(self) -> str:
        """
        Graph identifier for use with
        :class:`objectgraph.ObjectGraph`.
        """
        return f"start-{self.start_id}"

    @property
    def mean(self) -> np.ndarray:
        return self.measure.mean()


class FixedPointGraph(ObjectGraph[FixedPointNode, Proximity]):
    """
    Proximity graph of fixed points.

    Args:
      merge_tol: Fixed points closer than this are the same state

      p: Wasserstein order used for the distances
    """

    merge_tol: float
    p: float
    _order: List[FixedPointNode]
    _distances: Dict[Tuple[int, int], float]

    def __init__(self, merge_tol: float, p: float):
        super().__init__()
        self.merge_tol = merge_tol
        self.p = p
        self._order = []
        self._distances = {}

    def add_fixed_point(self, node: FixedPointNode) -> None:
        """
        Add *node* and connect it to every known fixed point
        within the merge tolerance.
        """
        self.add_node(node)
        self.add_root(node)
        for other in self._order:
            estimate = wasserstein(node.measure, other.measure, self.p)
            self._distances[(node.start_id, other.start_id)] = estimate.value
            self._distances[(other.start_id, node.start_id)] = estimate.value
            if estimate.value <= self.merge_tol:
                info = Proximity(estimate.value, estimate.estimator)
                self.add_edge(node, other, info)
                self.add_edge(other, node, info)
        self._order.append(node)

    def fixed_points(self) -> List[FixedPointNode]:
        return list(self._order)

    def distance(self, first: int, second: int) -> Optional[float]:
        if first == second:
            return 0.0
        return self._distances.get((first, second))

    def distance_matrix(self) -> np.ndarray:
        """
        Pairwise distances in insertion order.
        """
        ids = [node.start_id for node in self._order]
        matrix = np.zeros((len(ids), len(ids)))
        for i, first in enumerate(ids):
            for j, second in enumerate(ids):
                if i != j:
                    matrix[i, j] = self._distances[(first, second)]
        return matrix

    def clusters(self) -> List[List[FixedPointNode]]:
        """
        Connected components, each in insertion order.
        """
        seen = set()
        result = []
        for node in self._order:
            if node.identifier in seen:
                continue
            members = {
                member.identifier
                for member in self.iter_graph(node=node)
                if isinstance(member, FixedPointNode)
            }
            seen.update(members)
            result.append([item for item in self._order if item.identifier in members])
        return result
