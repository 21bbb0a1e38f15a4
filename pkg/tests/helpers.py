"""Small shared utilities for the test modules."""

import numpy as np

from ftrl_steering.mirror import RegularizerBundle


def bundle(game, kind="neg_entropy"):
    return RegularizerBundle.uniform(game, kind)


def random_profile(game, rng, floor=1e-3):
    while True:
        x = np.concatenate([rng.dirichlet(np.ones(n)) for n in game.learner_actions])
        if x.min() > floor:
            return x


FULL_SWEEP = dict(density=50, horizon=12.0, horizon_count=45)
SWEEP_SEED = 42


def sweep_starts(game, seed=SWEEP_SEED, count=3):
    from ftrl_steering.controllability import sample_interior

    return sample_interior(game, count, np.random.default_rng(seed))


_SWEEPS = {}


def full_sweep(name, kind):
    """Full-size constant-control sweep from three seeded starts, computed once per session."""
    from ftrl_steering.game import make_builtin
    from ftrl_steering.reachability import attainable_cloud

    key = (name if isinstance(name, str) else (name[0], tuple(name[1])), kind)
    if key not in _SWEEPS:
        game = make_builtin(*name) if isinstance(name, tuple) else make_builtin(name)
        b = bundle(game, kind)
        _SWEEPS[key] = (game, b, attainable_cloud(game, b, sweep_starts(game), **FULL_SWEEP))
    return _SWEEPS[key]
