import numpy as np
import pytest

from ftrl_steering.game import brockett, make_builtin, modified_rps, regulated_matching_pennies, rps
from ftrl_steering.mirror import RegularizerBundle
from ftrl_steering.specfile import AnalysisDefaults, SpecError, dump_spec, parse_spec, parse_spec_text

MODIFIED_EXPLICIT = """\
game:
  name: modified_rps
  learner_actions: [3]
  controller_actions: 3
  payoff_tensors:
    - shape: [3, 3]
      values:
        - [0, -1, 1]
        - [1, 0, -1]
        - [-1, 1, 3]
"""


def test_builtin_shorthand():
    game, b, d = parse_spec_text("builtin: rps\nepsilon: 0.5\n")
    assert game == rps(0.5)
    assert b.kinds == ("neg_entropy",)
    assert d == AnalysisDefaults()


def test_sections():
    text = """\
game:
  builtin: brockett
learners:
  regularizers: [neg_entropy, squared_norm, neg_entropy]
analysis:
  dt: 1e-3
  seed: 7
  lattice: 20
"""
    game, b, d = parse_spec_text(text)
    assert game == brockett()
    assert b.kinds == ("neg_entropy", "squared_norm", "neg_entropy")
    assert d.dt == 1e-3 and d.seed == 7 and d.lattice == 20 and isinstance(d.seed, int)


def test_explicit_tensor_equals_builtin():
    game, _, _ = parse_spec_text(MODIFIED_EXPLICIT)
    assert game == modified_rps()
    np.testing.assert_array_equal(game.payoff_tensors[0], make_builtin("modified_rps").payoff_tensors[0])


def test_shape_error_names_section():
    bad = MODIFIED_EXPLICIT.replace("        - [-1, 1, 3]\n", "")
    with pytest.raises(SpecError) as info:
        parse_spec_text(bad, "bad.yaml")
    msg = str(info.value)
    assert "payoff_tensors" in msg and "bad.yaml:" in msg and "[2, 3]" in msg


def test_declared_shape_mismatch():
    bad = MODIFIED_EXPLICIT.replace("shape: [3, 3]", "shape: [3, 2]")
    with pytest.raises(SpecError) as info:
        parse_spec_text(bad)
    assert "shape" in str(info.value) and info.value.line == 6


@pytest.mark.parametrize(
    "text,fragment,line",
    [
        ("builtin: rps\nepsilon: 1.5\n", "epsilon", None),
        ("game:\n  builtin: rps\n  colour: red\n", "unknown key 'colour'", 3),
        ("builtin: rps\nlearners:\n  regularizer: tsallis\n", "unknown regularizer", 3),
        ("builtin: nope\n", "unknown builtin", 1),
        ("learners:\n  regularizer: neg_entropy\n", "missing the game section", None),
        ("builtin: rps\nanalysis:\n  dt: -1\n", "dt must be positive", 3),
        ("builtin: rps\nanalysis:\n  seed: 1.5\n", "integer", 3),
        ("builtin: rps\nanalysis:\n  speed: 1\n", "unknown key 'speed'", 3),
        ("builtin: rps\nbuiltin: rps\n", "duplicate key", 2),
        ("game: [1, 2\n", "YAML parse error", None),
        ("builtin: brockett\nlearners:\n  regularizers: [neg_entropy]\n", "need 3 regularizer", 3),
    ],
)
def test_errors(text, fragment, line):
    with pytest.raises(SpecError) as info:
        parse_spec_text(text)
    assert fragment in str(info.value)
    if line is not None:
        assert info.value.line == line


@pytest.mark.parametrize("game", [rps(-0.25), modified_rps(), brockett(), regulated_matching_pennies()])
def test_round_trip(game):
    b = RegularizerBundle.from_kinds(game, ["squared_norm"] * game.num_learners)
    d = AnalysisDefaults(seed=9, dt=5e-4)
    again, b2, d2 = parse_spec_text(dump_spec(game, b, d))
    assert again == game
    for t1, t2 in zip(game.payoff_tensors, again.payoff_tensors):
        np.testing.assert_array_equal(t1, t2)
    assert b2.kinds == b.kinds and d2 == d


def test_full_precision_round_trip(rng):
    from ftrl_steering.game import FiniteGame

    g = FiniteGame((2, 3), 2, (rng.normal(size=(2, 2, 3)), rng.normal(size=(3, 2, 2))))
    again, _, _ = parse_spec_text(dump_spec(g))
    for t1, t2 in zip(g.payoff_tensors, again.payoff_tensors):
        np.testing.assert_array_equal(t1, t2)


def test_parse_file(tmp_path):
    p = tmp_path / "g.yaml"
    p.write_text(MODIFIED_EXPLICIT)
    assert parse_spec(p)[0] == modified_rps()
    with pytest.raises(SpecError):
        parse_spec(tmp_path / "missing.yaml")
