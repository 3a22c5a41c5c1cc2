"""Built-in model instances used by the validation suite and the docs.

One representative per tail regime plus a three-state exponential case
and a constant-coefficient control:

* ``A``     -- heavy-tailed: one repulsive state, critical moment 1/2.
* ``B``     -- two-state degenerate exponential-like case (closed-form
  stationary Laplace transform).
* ``C3``    -- three-state exponential-like case with a 2x2 tilted
  sub-chain; critical Laplace abscissa exactly 1.
* ``const`` -- constant coefficients (plain OU), Gaussian-like.
* ``gauss`` -- two distinct positive drifts, for sandwich bounds with a
  strict gap.
"""

from .model import ModelSpec, build_model


def model_a() -> ModelSpec:
    return build_model(
        2, [[-1.0, 1.0], [1.0, -1.0]], [-1.0, 2.0], [1.0, 1.0]
    )


def model_b() -> ModelSpec:
    return build_model(
        2, [[-1.0, 1.0], [1.0, -1.0]], [2.0, 0.0], [1.0, 1.0]
    )


def model_c3() -> ModelSpec:
    generator = [
        [-1.0, 1.0, 0.0],
        [0.5, -1.0, 0.5],
        [0.5, 0.5, -1.0],
    ]
    return build_model(3, generator, [1.0, 0.0, 0.0], [1.0, 1.0, 1.0])


def model_const(drift=1.0, sigma=1.0, rate=1.0) -> ModelSpec:
    generator = [[-rate, rate], [rate, -rate]]
    return build_model(2, generator, [drift, drift], [sigma, sigma])


def model_gauss() -> ModelSpec:
    return build_model(
        2, [[-1.0, 1.0], [1.0, -1.0]], [1.0, 2.0], [1.0, 1.0]
    )


BUILTIN_MODELS = {
    "A": model_a,
    "B": model_b,
    "C3": model_c3,
    "const": model_const,
    "gauss": model_gauss,
}


def get_builtin(name: str) -> ModelSpec:
    try:
        return BUILTIN_MODELS[name]()
    except KeyError:
        raise KeyError(
            f"unknown built-in model {name!r}; available: {sorted(BUILTIN_MODELS)}"
        ) from None
