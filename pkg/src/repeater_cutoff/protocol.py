"""Protocol trees, hardware parameters, cut-off specs and the JSON config format."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace

from .errors import ConfigError

__all__ = [
    "Backend",
    "CutoffSpec",
    "EvalConfig",
    "HardwareParams",
    "Kind",
    "ProtocolNode",
    "Strategy",
    "build_nested_chain",
    "dist",
    "gen",
    "load_config",
    "parse_config",
    "serialize_config",
    "swap",
    "validate_protocol",
]

SCHEMA_VERSION = 1


class Kind(str, enum.Enum):
    GEN = "gen"
    SWAP = "swap"
    DIST = "dist"


class Strategy(str, enum.Enum):
    DIF_TIME = "dif_time"
    MAX_TIME = "max_time"
    FIDELITY = "fidelity"


class Backend(str, enum.Enum):
    DIRECT = "direct"
    FOURIER = "fourier"
    FAST = "fast"


@dataclass(frozen=True)
class HardwareParams:
    """Elementary-link and memory parameters.

    ``t_coh`` is in units of one elementary generation attempt; ``math.inf``
    disables memory decoherence.
    """

    p_gen: float
    p_swap: float
    w0: float
    t_coh: float = math.inf

    def violations(self):
        out = []
        if not 0.0 < self.p_gen <= 1.0:
            out.append(f"hardware.p_gen={self.p_gen} outside (0, 1]")
        if not 0.0 < self.p_swap <= 1.0:
            out.append(f"hardware.p_swap={self.p_swap} outside (0, 1]")
        if not 0.0 <= self.w0 <= 1.0:
            out.append(f"hardware.w0={self.w0} outside [0, 1]")
        if not self.t_coh > 0.0:
            out.append(f"hardware.t_coh={self.t_coh} must be positive")
        return out


@dataclass(frozen=True)
class CutoffSpec:
    strategy: Strategy
    tau: float | None = None
    w_cut: float | None = None

    @classmethod
    def dif_time(cls, tau):
        return cls(Strategy.DIF_TIME, tau=tau)

    @classmethod
    def max_time(cls, tau):
        return cls(Strategy.MAX_TIME, tau=tau)

    @classmethod
    def fidelity(cls, w_cut):
        return cls(Strategy.FIDELITY, w_cut=w_cut)

    @property
    def threshold(self):
        return self.w_cut if self.strategy is Strategy.FIDELITY else self.tau

    def violations(self, where="cutoff"):
        out = []
        if self.strategy is Strategy.FIDELITY:
            if self.tau is not None:
                out.append(f"{where}: fidelity cut-off takes w_cut, not tau")
            if self.w_cut is None:
                out.append(f"{where}: fidelity cut-off needs w_cut")
            elif not 0.0 <= self.w_cut <= 1.0:
                out.append(f"{where}.w_cut={self.w_cut} outside [0, 1]")
        else:
            if self.w_cut is not None:
                out.append(f"{where}: {self.strategy.value} cut-off takes tau, not w_cut")
            if self.tau is None:
                out.append(f"{where}: {self.strategy.value} cut-off needs tau")
            elif not (self.tau == math.inf or float(self.tau).is_integer()) or self.tau < 0:
                out.append(f"{where}.tau={self.tau} must be a non-negative integer")
            elif self.strategy is Strategy.MAX_TIME and self.tau < 1:
                # every attempt lasts at least one step, so nothing ever passes
                out.append(f"{where}.tau={self.tau}: max_time cut-off needs tau >= 1")
        return out


@dataclass(frozen=True)
class ProtocolNode:
    """One node of a protocol tree.

    GEN leaves may override ``p_gen``/``w0`` of the global hardware; SWAP and
    DIST nodes carry two children and an optional cut-off that selects their
    input links.
    """

    kind: Kind
    left: ProtocolNode | None = None
    right: ProtocolNode | None = None
    cutoff: CutoffSpec | None = None
    p_gen: float | None = None
    w0: float | None = None

    @property
    def is_leaf(self):
        return self.kind is Kind.GEN

    def span(self):
        """Number of elementary segments covered by this node."""
        if self.kind is Kind.GEN:
            return 1
        left = self.left.span() if self.left is not None else 0
        right = self.right.span() if self.right is not None else 0
        if self.kind is Kind.DIST:
            return max(left, right)
        return left + right

    def iter_nodes(self):
        """Post-order traversal."""
        for child in (self.left, self.right):
            if child is not None:
                yield from child.iter_nodes()
        yield self

    def count(self, kind=None):
        return sum(1 for n in self.iter_nodes() if kind is None or n.kind is kind)

    def depth(self):
        if self.is_leaf:
            return 0
        return 1 + max(c.depth() for c in (self.left, self.right) if c is not None)


def gen(p_gen=None, w0=None):
    return ProtocolNode(Kind.GEN, p_gen=p_gen, w0=w0)


def swap(left, right, cutoff=None):
    return ProtocolNode(Kind.SWAP, left, right, cutoff)


def dist(left, right, cutoff=None):
    return ProtocolNode(Kind.DIST, left, right, cutoff)


@dataclass(frozen=True)
class EvalConfig:
    hardware: HardwareParams
    ttr: int
    backend: Backend = Backend.FAST
    padding_factor: int = 3

    def violations(self):
        out = list(self.hardware.violations())
        if not (isinstance(self.ttr, int) and self.ttr >= 1):
            out.append(f"eval.ttr={self.ttr} must be a positive integer")
        if not (isinstance(self.padding_factor, int) and self.padding_factor >= 2):
            out.append(f"eval.padding_factor={self.padding_factor} must be an integer >= 2")
        return out

    def with_(self, **changes):
        return replace(self, **changes)


def validate_protocol(node, path="protocol"):
    """Return a list of human-readable violations; empty iff the tree is valid."""
    out = []
    if not isinstance(node, ProtocolNode):
        return [f"{path}: not a protocol node"]
    if node.kind is Kind.GEN:
        if node.left is not None or node.right is not None:
            out.append(f"{path}: gen node cannot have children")
        if node.cutoff is not None:
            out.append(f"{path}: cut-off attached to a gen node")
        if node.p_gen is not None and not 0.0 < node.p_gen <= 1.0:
            out.append(f"{path}.p_gen={node.p_gen} outside (0, 1]")
        if node.w0 is not None and not 0.0 <= node.w0 <= 1.0:
            out.append(f"{path}.w0={node.w0} outside [0, 1]")
        return out
    if node.p_gen is not None or node.w0 is not None:
        out.append(f"{path}: hardware overrides are only allowed on gen nodes")
    if node.left is None or node.right is None:
        out.append(f"{path}: {node.kind.value} node needs exactly two children")
    if node.cutoff is not None:
        out.extend(node.cutoff.violations(f"{path}.cutoff"))
    for name in ("left", "right"):
        child = getattr(node, name)
        if child is not None:
            out.extend(validate_protocol(child, f"{path}.{name}"))
    if node.kind is Kind.DIST and node.left is not None and node.right is not None:
        if node.left.span() != node.right.span():
            out.append(
                f"{path}: dist inputs span {node.left.span()} and {node.right.span()} "
                "segments; both links must connect the same node pair")
    return out


def build_nested_chain(levels, cutoffs=()):
    """Balanced swap tree over ``2**levels`` segments.

    ``cutoffs`` is empty (no cut-off), a single spec used on every level, or
    one spec per nesting level ordered from the lowest (shortest links) up.
    """
    if levels < 0:
        raise ConfigError(f"levels={levels} must be >= 0", field="levels")
    cutoffs = list(cutoffs)
    if len(cutoffs) not in {0, 1, levels}:
        raise ConfigError(
            f"got {len(cutoffs)} cut-offs for {levels} levels; expected 0, 1 or {levels}",
            field="cutoffs")
    if len(cutoffs) == 1:
        cutoffs = cutoffs * levels
    node = gen()
    for level in range(levels):
        spec = cutoffs[level] if cutoffs else None
        node = swap(node, node, spec)
    return node


# -- JSON ------------------------------------------------------------------


def _check_keys(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object", field=where)
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}", field=f"{where}.{unknown[0]}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ConfigError(f"{where}: missing key(s) {missing}", field=f"{where}.{missing[0]}")


def _number(value, where, *, integer=False, allow_inf=False):
    if allow_inf and (value is None or value in ("inf", "Infinity")):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}", field=where)
    if allow_inf and value == math.inf:
        return math.inf
    if not math.isfinite(value):
        raise ConfigError(f"{where} must be finite", field=where)
    if integer:
        if not float(value).is_integer():
            raise ConfigError(f"{where} must be an integer, got {value!r}", field=where)
        return int(value)
    return float(value)


def _strategy(value, where):
    try:
        return Strategy(value)
    except ValueError:
        raise ConfigError(
            f"{where}: unknown strategy {value!r}; expected one of "
            f"{[s.value for s in Strategy]}", field=where) from None


def _cutoff_from_json(obj, where):
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object or null", field=where)
    strategy = _strategy(obj.get("strategy"), f"{where}.strategy")
    if strategy is Strategy.FIDELITY:
        _check_keys(obj, {"strategy", "w_cut"}, where, required=("w_cut",))
        spec = CutoffSpec.fidelity(_number(obj["w_cut"], f"{where}.w_cut"))
    else:
        _check_keys(obj, {"strategy", "tau"}, where, required=("tau",))
        tau = _number(obj["tau"], f"{where}.tau", integer=True, allow_inf=True)
        spec = CutoffSpec(strategy, tau=tau)
    problems = spec.violations(where)
    if problems:
        raise ConfigError(problems[0], field=where)
    return spec


def _cutoff_to_json(spec):
    if spec is None:
        return None
    if spec.strategy is Strategy.FIDELITY:
        return {"strategy": spec.strategy.value, "w_cut": spec.w_cut}
    tau = None if spec.tau == math.inf else int(spec.tau)
    return {"strategy": spec.strategy.value, "tau": tau}


def _node_from_json(obj, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object", field=where)
    if "nested_swap" in obj:
        _check_keys(obj, {"nested_swap"}, where)
        return _nested_from_json(obj["nested_swap"], f"{where}.nested_swap")
    kind = obj.get("type")
    if kind == "gen":
        if "cutoff" in obj and obj["cutoff"] is not None:
            raise ConfigError(f"{where}: cut-off attached to a gen node", field=f"{where}.cutoff")
        _check_keys(obj, {"type", "cutoff", "p_gen", "w0"}, where)
        node = gen(
            p_gen=_number(obj["p_gen"], f"{where}.p_gen") if "p_gen" in obj else None,
            w0=_number(obj["w0"], f"{where}.w0") if "w0" in obj else None,
        )
    elif kind in ("swap", "dist"):
        _check_keys(obj, {"type", "cutoff", "left", "right"}, where, required=("left", "right"))
        node = ProtocolNode(
            Kind(kind),
            _node_from_json(obj["left"], f"{where}.left"),
            _node_from_json(obj["right"], f"{where}.right"),
            _cutoff_from_json(obj.get("cutoff"), f"{where}.cutoff"),
        )
    else:
        raise ConfigError(f"{where}.type must be 'gen', 'swap' or 'dist', got {kind!r}",
                          field=f"{where}.type")
    return node


def _nested_from_json(obj, where):
    _check_keys(obj, {"levels", "strategy", "cutoffs"}, where, required=("levels",))
    levels = _number(obj["levels"], f"{where}.levels", integer=True)
    values = obj.get("cutoffs", [])
    if not isinstance(values, list):
        raise ConfigError(f"{where}.cutoffs must be a list", field=f"{where}.cutoffs")
    specs = []
    if values:
        strategy = _strategy(obj.get("strategy"), f"{where}.strategy")
        for i, v in enumerate(values):
            key = "w_cut" if strategy is Strategy.FIDELITY else "tau"
            specs.append(_cutoff_from_json({"strategy": strategy.value, key: v},
                                           f"{where}.cutoffs[{i}]"))
    return build_nested_chain(levels, specs)


def node_to_json(node):
    if node.kind is Kind.GEN:
        out = {"type": "gen"}
        if node.p_gen is not None:
            out["p_gen"] = node.p_gen
        if node.w0 is not None:
            out["w0"] = node.w0
        return out
    return {
        "type": node.kind.value,
        "cutoff": _cutoff_to_json(node.cutoff),
        "left": node_to_json(node.left),
        "right": node_to_json(node.right),
    }


def parse_config(text):
    """Parse and validate a JSON config document (bytes or str).

    Returns ``(protocol_root, EvalConfig)``. Raises :class:`ConfigError`
    carrying line/column for syntax errors and the offending field for
    semantic ones.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"config is not valid UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                          line=exc.lineno, column=exc.colno) from None

    _check_keys(doc, {"version", "hardware", "eval", "protocol", "nested_swap"}, "config",
                required=("version", "hardware", "eval"))
    if doc["version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config version {doc['version']!r}", field="version")

    hw = doc["hardware"]
    _check_keys(hw, {"p_gen", "p_swap", "w0", "t_coh"}, "hardware",
                required=("p_gen", "p_swap", "w0"))
    hardware = HardwareParams(
        p_gen=_number(hw["p_gen"], "hardware.p_gen"),
        p_swap=_number(hw["p_swap"], "hardware.p_swap"),
        w0=_number(hw["w0"], "hardware.w0"),
        t_coh=_number(hw.get("t_coh"), "hardware.t_coh", allow_inf=True),
    )

    ev = doc["eval"]
    _check_keys(ev, {"ttr", "backend", "padding_factor"}, "eval", required=("ttr",))
    try:
        backend = Backend(ev.get("backend", "fast"))
    except ValueError:
        raise ConfigError(f"eval.backend must be one of {[b.value for b in Backend]}",
                          field="eval.backend") from None
    cfg = EvalConfig(
        hardware=hardware,
        ttr=_number(ev["ttr"], "eval.ttr", integer=True),
        backend=backend,
        padding_factor=_number(ev.get("padding_factor", 3), "eval.padding_factor", integer=True),
    )
    problems = cfg.violations()
    if problems:
        raise ConfigError(problems[0], field=problems[0].split("=")[0].split(" ")[0])

    if ("protocol" in doc) == ("nested_swap" in doc):
        raise ConfigError("config needs exactly one of 'protocol' or 'nested_swap'",
                          field="protocol")
    if "protocol" in doc:
        root = _node_from_json(doc["protocol"], "protocol")
    else:
        root = _nested_from_json(doc["nested_swap"], "nested_swap")
    problems = validate_protocol(root)
    if problems:
        raise ConfigError(problems[0], field=problems[0].split(":")[0])
    return root, cfg


def load_config(path):
    with open(path, "rb") as fh:
        return parse_config(fh.read())


def config_to_dict(root, cfg):
    hw = cfg.hardware
    return {
        "version": SCHEMA_VERSION,
        "hardware": {
            "p_gen": hw.p_gen,
            "p_swap": hw.p_swap,
            "w0": hw.w0,
            "t_coh": None if hw.t_coh == math.inf else hw.t_coh,
        },
        "eval": {
            "ttr": cfg.ttr,
            "backend": cfg.backend.value,
            "padding_factor": cfg.padding_factor,
        },
        "protocol": node_to_json(root),
    }


def serialize_config(root, cfg):
    return json.dumps(config_to_dict(root, cfg), indent=2, sort_keys=True)
