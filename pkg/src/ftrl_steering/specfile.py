"""Game-spec files: a small YAML grammar for games, learners and run defaults.

A spec has up to three sections::

    game:
      builtin: rps            # or an explicit game, see below
      epsilon: 0.5
    learners:
      regularizer: neg_entropy   # one name for everyone, or a list per learner
    analysis:
      dt: 0.001
      seed: 42

An explicit game lists ``learner_actions``, ``controller_actions`` and one
``payoff_tensors`` entry per learner, each with a declared ``shape`` and
nested ``values``.  ``builtin``/``epsilon``/``params`` may also appear at
the top level as a shorthand for a one-line builtin spec.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .game import BUILTINS, FiniteGame, GameError, make_builtin
from .mirror import REGULARIZERS, RegularizerBundle


class SpecError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<spec>"):
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")
        self.line = line


@dataclass
class AnalysisDefaults:
    dt: float = 1e-3
    seed: int = 42
    lattice: int = 50
    horizon: float = 12.0
    horizon_count: int = 45
    starts: int = 3
    grid: int = 20
    samples: int = 100
    depth: int = 2
    margin: float = 0.1
    probe_points: int = 20
    probe_horizon: float = 50.0
    trials: int = 100
    tau: float = 0.1
    steer_lattice: int = 10
    max_segments: int = 500
    record_every: int = 10


_INT_FIELDS = {f.name for f in dataclasses.fields(AnalysisDefaults) if f.type in ("int", int)}
_GAME_KEYS = {"builtin", "epsilon", "params", "learner_actions", "controller_actions",
              "payoff_tensors", "labels", "name"}
_TOP_KEYS = {"game", "learners", "analysis", "builtin", "epsilon", "params"}


# -- YAML with line numbers -------------------------------------------------------


class _Doc:
    """Plain Python values plus the source line of every node, keyed by path."""

    def __init__(self, text: str, source: str):
        self.source = source
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise SpecError(f"YAML parse error: {exc}", mark.line + 1 if mark else None, source)
        self.lines: dict[tuple, int] = {}
        self.data = {} if node is None else self._build(node, ())

    def _build(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            out = {}
            for knode, vnode in node.value:
                key = knode.value
                if key in out:
                    raise SpecError(f"duplicate key {key!r}", knode.start_mark.line + 1, self.source)
                out[key] = self._build(vnode, path + (key,))
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self._build(v, path + (i,)) for i, v in enumerate(node.value)]
        return _scalar(node)

    def line(self, path) -> int | None:
        path = tuple(path)
        while path not in self.lines and path:
            path = path[:-1]
        return self.lines.get(path)

    def error(self, message: str, path=()) -> SpecError:
        label = ".".join(str(p) for p in path)
        return SpecError(f"{label}: {message}" if label else message, self.line(path), self.source)


def _scalar(node):
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


def _number(doc: _Doc, value, path, integer: bool = False):
    if isinstance(value, bool):
        raise doc.error(f"expected a number, got {value!r}", path)
    try:
        out = float(value)  # YAML 1.1 reads 1e-3 as a string; accept it
    except (TypeError, ValueError):
        raise doc.error(f"expected a number, got {value!r}", path) from None
    if integer:
        if out != int(out):
            raise doc.error(f"expected an integer, got {value!r}", path)
        return int(out)
    return out


def _check_keys(doc: _Doc, section: dict, allowed: set, path):
    if not isinstance(section, dict):
        raise doc.error("expected a mapping", path)
    for key in section:
        if key not in allowed:
            raise doc.error(f"unknown key {key!r} (allowed: {', '.join(sorted(allowed))})", path + (key,))


# -- parsing ----------------------------------------------------------------------------


def _parse_game(doc: _Doc, sec: dict, path) -> FiniteGame:
    _check_keys(doc, sec, _GAME_KEYS, path)
    if "builtin" in sec:
        extra = set(sec) - {"builtin", "epsilon", "params"}
        if extra:
            raise doc.error(f"builtin games take no {sorted(extra)}", path)
        name = sec["builtin"]
        if name not in BUILTINS:
            raise doc.error(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}", path + ("builtin",))
        if "epsilon" in sec and "params" in sec:
            raise doc.error("give either epsilon or params, not both", path)
        if "epsilon" in sec:
            params = [_number(doc, sec["epsilon"], path + ("epsilon",))]
        else:
            raw = sec.get("params", [])
            if not isinstance(raw, list):
                raise doc.error("params must be a list", path + ("params",))
            params = [_number(doc, v, path + ("params", i)) for i, v in enumerate(raw)]
        try:
            return make_builtin(name, params)
        except (GameError, ValueError) as exc:
            raise doc.error(str(exc), path) from None

    for key in ("learner_actions", "controller_actions", "payoff_tensors"):
        if key not in sec:
            raise doc.error(f"missing {key!r}", path)
    la = sec["learner_actions"]
    if not isinstance(la, list) or not la:
        raise doc.error("learner_actions must be a non-empty list", path + ("learner_actions",))
    la = [_number(doc, v, path + ("learner_actions", i), True) for i, v in enumerate(la)]
    m = _number(doc, sec["controller_actions"], path + ("controller_actions",), True)
    tensors_raw = sec["payoff_tensors"]
    if not isinstance(tensors_raw, list) or len(tensors_raw) != len(la):
        raise doc.error(f"need one payoff tensor per learner ({len(la)})", path + ("payoff_tensors",))
    tensors = []
    for i, t in enumerate(tensors_raw):
        tp = path + ("payoff_tensors", i)
        _check_keys(doc, t, {"shape", "values"}, tp)
        if "shape" not in t or "values" not in t:
            raise doc.error("each payoff tensor needs 'shape' and 'values'", tp)
        shape = tuple(_number(doc, v, tp + ("shape", j), True) for j, v in enumerate(t["shape"]))
        expected = (la[i], m) + tuple(n for j, n in enumerate(la) if j != i)
        if shape != expected:
            raise doc.error(f"declared shape {list(shape)} but learner {i} needs {list(expected)}", tp + ("shape",))
        try:
            arr = np.array(t["values"], dtype=float)
        except (TypeError, ValueError):
            raise doc.error("values must be a rectangular nested list of numbers", tp + ("values",)) from None
        if arr.shape != shape:
            raise doc.error(f"values have shape {list(arr.shape)}, declared {list(shape)}", tp + ("values",))
        tensors.append(arr)
    labels = sec.get("labels")
    try:
        return FiniteGame(tuple(la), m, tuple(tensors), labels=labels, name=str(sec.get("name", "custom")))
    except (GameError, ValueError, TypeError) as exc:
        raise doc.error(str(exc), path) from None


def _parse_learners(doc: _Doc, sec, game: FiniteGame) -> RegularizerBundle:
    path = ("learners",)
    if sec is None:
        return RegularizerBundle.uniform(game)
    _check_keys(doc, sec, {"regularizer", "regularizers"}, path)
    if "regularizer" in sec and "regularizers" in sec:
        raise doc.error("give either regularizer or regularizers", path)
    kinds = sec.get("regularizers", sec.get("regularizer", "neg_entropy"))
    if isinstance(kinds, str):
        kinds = [kinds] * game.num_learners
    if not isinstance(kinds, list) or len(kinds) != game.num_learners:
        raise doc.error(f"need {game.num_learners} regularizer names", path)
    for i, k in enumerate(kinds):
        if k not in REGULARIZERS:
            key = "regularizers" if "regularizers" in sec else "regularizer"
            raise doc.error(f"unknown regularizer {k!r}; choose from {sorted(REGULARIZERS)}", path + (key, i))
    return RegularizerBundle.from_kinds(game, kinds)


def _parse_analysis(doc: _Doc, sec) -> AnalysisDefaults:
    path = ("analysis",)
    if sec is None:
        return AnalysisDefaults()
    names = {f.name for f in dataclasses.fields(AnalysisDefaults)}
    _check_keys(doc, sec, names, path)
    vals = {k: _number(doc, v, path + (k,), k in _INT_FIELDS) for k, v in sec.items()}
    for k, v in vals.items():
        if v < 0 or (v == 0 and k in {"dt", "lattice", "horizon_count", "grid", "tau", "record_every"}):
            raise doc.error(f"{k} must be positive", path + (k,))
    return AnalysisDefaults(**vals)


def parse_spec_text(text: str, source: str = "<spec>"):
    """``(game, bundle, defaults)`` from spec text."""
    doc = _Doc(text, source)
    data = doc.data
    if not isinstance(data, dict):
        raise doc.error("a spec must be a mapping")
    _check_keys(doc, data, _TOP_KEYS, ())
    if "game" in data:
        if set(data) & {"builtin", "epsilon", "params"}:
            raise doc.error("builtin shorthand conflicts with the game section")
        game = _parse_game(doc, data["game"], ("game",))
    elif "builtin" in data:
        short = {k: data[k] for k in ("builtin", "epsilon", "params") if k in data}
        game = _parse_game(doc, short, ())
    else:
        raise doc.error("missing the game section")
    bundle = _parse_learners(doc, data.get("learners"), game)
    return game, bundle, _parse_analysis(doc, data.get("analysis"))


def parse_spec(path):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read spec: {exc.strerror}", None, str(p)) from None
    return parse_spec_text(text, str(p))


# -- emission ----------------------------------------------------------------------------


def spec_dict(game: FiniteGame, bundle: RegularizerBundle | None = None, defaults: AnalysisDefaults | None = None) -> dict:
    tensors = [
        {"shape": list(t.shape), "values": t.tolist()} for t in game.payoff_tensors
    ]
    gsec = {
        "name": game.name,
        "learner_actions": list(game.learner_actions),
        "controller_actions": game.controller_actions,
        "payoff_tensors": tensors,
    }
    if game.labels is not None:
        gsec["labels"] = game.labels
    out = {"game": gsec}
    kinds = list(bundle.kinds) if bundle is not None else ["neg_entropy"] * game.num_learners
    out["learners"] = {"regularizers": kinds}
    if defaults is not None:
        out["analysis"] = dataclasses.asdict(defaults)
    return out


def dump_spec(game: FiniteGame, bundle: RegularizerBundle | None = None, defaults: AnalysisDefaults | None = None) -> str:
    """Spec text with explicit tensors; values are written at full precision."""
    return yaml.safe_dump(spec_dict(game, bundle, defaults), sort_keys=False, default_flow_style=None)
