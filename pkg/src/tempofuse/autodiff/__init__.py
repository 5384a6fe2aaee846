from tempofuse.autodiff.graph import OPS, Graph, Node, Parameter
from tempofuse.autodiff.gradcheck import GradCheckReport, check_all, grad_check

__all__ = ["OPS", "Graph", "Node", "Parameter", "GradCheckReport", "grad_check", "check_all"]
