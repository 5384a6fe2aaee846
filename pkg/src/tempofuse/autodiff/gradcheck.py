"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tempofuse.autodiff.graph import Graph, Node, Parameter


@dataclass
class GradCheckReport:
    passed: bool
    max_error: float
    worst_index: tuple[int, ...]
    analytic: float
    numeric: float
    checked: int

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (f"{status}: max error {self.max_error:.3e} at {self.worst_index} "
                f"(analytic {self.analytic:.6e}, numeric {self.numeric:.6e}, "
                f"{self.checked} elements)")


def element_error(analytic: float, numeric: float, floor: float = 1e-6) -> tuple[float, bool]:
    """Error between two derivative estimates and whether it is relative.

    Below ``floor`` in magnitude the comparison is absolute.
    """
    scale = max(abs(analytic), abs(numeric))
    diff = abs(analytic - numeric)
    if scale < floor:
        return diff, False
    return diff / scale, True


def grad_check(graph: Graph, loss: Node, parameter: Parameter | Node,
               tolerance: float = 1e-4, *, step: float = 1e-5, abs_tolerance: float = 1e-8,
               max_elements: int | None = None,
               rng: np.random.Generator | None = None) -> GradCheckReport:
    """Compare ``graph.backward`` against central differences for one parameter.

    The loss is re-evaluated by replaying the recorded tape with the perturbed
    parameter value, so the check never mutates the model.  With
    ``max_elements`` a random subset of entries is checked.  Failures are
    reported, not raised.
    """
    node = graph.node_of(parameter) if isinstance(parameter, Parameter) else parameter
    if graph.grads is None or len(graph.grads) != len(graph.nodes):
        graph.backward(loss)
    g = graph.grads[node.id]
    analytic_grad = np.zeros_like(node.value) if g is None else g

    flat_count = node.value.size
    if max_elements is not None and max_elements < flat_count:
        rng = rng or np.random.default_rng(0)
        picks = rng.choice(flat_count, size=max_elements, replace=False)
    else:
        picks = np.arange(flat_count)

    base = node.value
    worst = None
    passed = True
    for flat in picks:
        idx = np.unravel_index(int(flat), base.shape)
        bumped = base.copy()
        bumped[idx] = base[idx] + step
        plus = graph.replay(loss, {node.id: bumped})[0]
        bumped[idx] = base[idx] - step
        minus = graph.replay(loss, {node.id: bumped})[0]
        numeric = (plus - minus) / (2 * step)
        analytic = float(analytic_grad[idx])
        err, relative = element_error(analytic, numeric)
        ok = err <= (tolerance if relative else abs_tolerance)
        passed &= ok
        # rank failures first, then by size of the error
        rank = err / (tolerance if relative else abs_tolerance)
        if worst is None or rank > worst[0]:
            worst = (rank, tuple(int(i) for i in idx), analytic, numeric, err)
    _, index, analytic, numeric, err = worst
    return GradCheckReport(passed, err, index, analytic, numeric, len(picks))


def check_all(graph: Graph, loss: Node, tolerance: float = 1e-4, **kwargs) -> dict[str, GradCheckReport]:
    """Run :func:`grad_check` for every parameter bound into ``graph``."""
    graph.backward(loss)
    reports = {}
    for i, parameter in enumerate(graph.parameters):
        key = parameter.name or f"param{i}"
        reports[key] = grad_check(graph, loss, parameter, tolerance, **kwargs)
    return reports
