"""Recursive evaluation of protocol trees into delivery-time / Werner curves."""

import warnings
from dataclasses import dataclass

import numpy as np

from .compound import compound_direct, compound_fourier, compound_swap
from .kernels import attempt_from_selection, selection_kernels_direct
from .protocol import Backend, Kind, Strategy, validate_protocol
from .separable import selection_kernels_separable
from .errors import ConfigError, UnsupportedCombinationError
from .states import AttemptKernels, LinkState

__all__ = [
    "COVERAGE_WARNING",
    "NodeTrace",
    "cutoff_attempt_kernels",
    "eval_gen",
    "eval_protocol",
    "evaluate_unit",
]

#: eval_protocol warns when less probability mass than this is covered.
COVERAGE_WARNING = 0.99


@dataclass(frozen=True, eq=False)
class NodeTrace:
    """Intermediate results of one evaluated unit (collected on request)."""

    node: object
    inputs: tuple
    selection: object
    kernels: AttemptKernels
    output: LinkState


def eval_gen(cfg, node=None):
    """Elementary link: geometric delivery time, constant Werner parameter."""
    hw = cfg.hardware
    p = hw.p_gen if node is None or node.p_gen is None else node.p_gen
    w0 = hw.w0 if node is None or node.w0 is None else node.w0
    t = np.arange(cfg.ttr + 1)
    pmf = np.zeros(cfg.ttr + 1)
    pmf[1:] = p * (1.0 - p) ** (t[1:] - 1)
    werner = np.where(pmf > 0.0, w0, 0.0)
    return LinkState(pmf, werner)


def _selection(A, B, unit, spec, cfg):
    if Backend(cfg.backend) is Backend.FAST:
        return selection_kernels_separable(A, B, unit, spec, cfg.hardware)
    return selection_kernels_direct(A, B, unit, spec, cfg.hardware)


def cutoff_attempt_kernels(A, B, spec, inner, cfg):
    """Kernels of one SWAP/DIST attempt whose inputs are filtered by a cut-off.

    Draws of input pairs are repeated until one passes; the compounded
    ``ps``/``pf`` describe the passing draw followed by success or failure of
    the ``inner`` unit, and ``ws_num`` the corresponding Werner numerator.
    """
    if spec is not None and spec.strategy is Strategy.FIDELITY and Backend(cfg.backend) is Backend.FAST:
        raise UnsupportedCombinationError("fidelity cut-off is not supported by the fast backend")
    sel = _selection(A, B, inner, spec, cfg)
    return attempt_from_selection(sel, cfg.backend, cfg.padding_factor)


def _compound(kernels, cfg):
    if Backend(cfg.backend) is Backend.DIRECT:
        return compound_direct(kernels)
    return compound_fourier(kernels, cfg.padding_factor)


def evaluate_unit(node, A, B, cfg):
    """Output link of one SWAP/DIST node from its two input links.

    Returns ``(LinkState, SelectionKernels, AttemptKernels)``.
    """
    spec = node.cutoff
    sel = _selection(A, B, node.kind, spec, cfg)
    if spec is None:
        kernels = sel.as_attempt()
        if node.kind is Kind.SWAP:
            p = cfg.hardware.p_swap
            m = sel.pass_succ + sel.pass_fail
            out = compound_swap(m, sel.ws_num / p, p, cfg.backend, cfg.padding_factor)
        else:
            out = _compound(kernels, cfg)
        return out, sel, kernels
    kernels = attempt_from_selection(sel, cfg.backend, cfg.padding_factor)
    return _compound(kernels, cfg), sel, kernels


def eval_protocol(root, cfg, trace=None, warn=True):
    """Evaluate a whole protocol tree bottom-up.

    Structurally identical subtrees are evaluated once (they describe i.i.d.
    links). If ``trace`` is a list, a :class:`NodeTrace` is appended for
    every evaluated SWAP/DIST unit. The covered mass of the result is
    ``result.covered_mass``; a warning is issued below ``COVERAGE_WARNING``.
    """
    problems = validate_protocol(root)
    problems += cfg.violations()
    if problems:
        raise ConfigError(problems[0])
    if Backend(cfg.backend) is Backend.FAST:
        for node in root.iter_nodes():
            if node.cutoff is not None and node.cutoff.strategy is Strategy.FIDELITY:
                raise UnsupportedCombinationError(
                    "fidelity cut-off is not supported by the fast backend")

    memo = {}

    def visit(node):
        if node in memo:
            return memo[node]
        if node.kind is Kind.GEN:
            out = eval_gen(cfg, node)
        else:
            A = visit(node.left)
            B = visit(node.right)
            out, sel, kernels = evaluate_unit(node, A, B, cfg)
            if trace is not None:
                trace.append(NodeTrace(node, (A, B), sel, kernels, out))
        memo[node] = out
        return out

    result = visit(root)
    if warn and result.covered_mass < COVERAGE_WARNING:
        warnings.warn(
            f"truncation at ttr={cfg.ttr} covers only {100 * result.covered_mass:.2f}% "
            "of the delivery-time distribution", RuntimeWarning, stacklevel=2)
    return result
