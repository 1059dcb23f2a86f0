"""Built-in scenarios, in the same schema as TOML config files."""

from .config import ConfigError, ScenarioConfig

_SYMMETRIC_PAIR = [[-1.0, 1.0], [1.0, -1.0]]

PRESETS = {
    "two_state": dict(
        model="ctmc", q=_SYMMETRIC_PAIR, labels=[1, 2], kappa=[1.0, 1.0], mu=[[1, 1.0]],
    ),
    # walk on Z truncated to -200..200, uniform killing, reborn at 0
    "ssrw_uniform": dict(
        model="ctmc", generator="ssrw", truncation=200, kappa=1.0, mu=[[0, 1.0]],
    ),
    # killing only on {1, 2, 3}: killing is certain but E[tau] is infinite on Z
    "finite_kill_set": dict(
        model="ctmc", generator="ssrw", truncation=100, kappa_default=0.0,
        kappa_states=[[1, 0.5], [2, 1.0], [3, 2.0]], mu=[[0, 1.0]],
        tv_exit_tol=0.015, expect_infinite_mean=True,
    ),
    "qsd_constant": dict(
        model="ctmc", q=_SYMMETRIC_PAIR, labels=[1, 2], kappa=[1.5, 1.5], mu="qsd",
        n_kills=10_000,
    ),
    "qsd_two_state": dict(
        model="ctmc", q=_SYMMETRIC_PAIR, labels=[1, 2], kappa=[2.0, 0.0], mu="qsd",
        n_kills=10_000,
    ),
    "qsd_random5": dict(
        model="ctmc", generator="random", n_states=5, generator_seed=7,
        kappa=[0.5, 1.0, 0.2, 2.0, 0.8], mu="qsd", n_kills=10_000,
    ),
    "mixture_path3": dict(
        model="ctmc", generator="path", n_states=3, kappa=[1.0, 2.0, 3.0], mu="qsd",
        epsilon=1.0, n_kills=10_000,
    ),
    "ray_constant": dict(model="ray", kappa_pieces=[[0.0, [1.0]]]),
    "ray_linear": dict(model="ray", kappa_pieces=[[0.0, [0.0, 1.0]]]),
    # 0.5 on [0, 1), then x - 0.5 (continuous at 1)
    "ray_piecewise": dict(model="ray", kappa_pieces=[[0.0, [0.5]], [1.0, [-0.5, 1.0]]]),
}


def preset(name: str, **overrides) -> ScenarioConfig:
    try:
        data = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return ScenarioConfig.from_dict({"name": name, **data, **overrides})
