"""Interventional semantics, identification and estimand evaluation."""
from .estimand import Constant, Expr, Product, Prob, Quotient, Sum, free_variables, parse, simplify, to_text
from .evaluate import PluginResult, SparseJoint, eval_estimand_exact, eval_estimand_plugin
from .identify import NotIdentifiable, c_components, identify, identify_query
from .query import (
    broadcast_to,
    interventional_query,
    interventional_table,
    mad,
    plugin_table,
    renormalize_over,
)
