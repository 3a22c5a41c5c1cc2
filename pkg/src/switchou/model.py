"""Model definition for an Ornstein-Uhlenbeck diffusion with Markov switching.

A model is the pair of a continuous-time Markov chain on ``{0, ..., d-1}``
(given by its generator matrix) and per-state diffusion coefficients:

    dY_t = -drift(X_t) * Y_t dt + sigma(X_t) dB_t.

``build_model`` validates every structural invariant at construction time;
all downstream modules assume a validated :class:`ModelSpec` and never
re-check. Chain-level quantities (jump rates, embedded chain, invariant
measure) are always derived from the generator, never stored independently.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ModelFileError, ModelValidationError, SingularSolveError

ROW_SUM_TOL = 1e-12
STOCHASTIC_TOL = 1e-12
INVARIANT_RESIDUAL_TOL = 1e-10
DRIFT_SNAP_TOL = 1e-14


@dataclass(frozen=True)
class ModelSpec:
    """A validated switched-OU model instance.

    Attributes
    ----------
    d : int
        Number of chain states (at least 2).
    generator : (d, d) ndarray
        Transition-rate matrix: nonnegative off-diagonal, zero row sums,
        strictly negative diagonal.
    drift : (d,) ndarray
        Per-state mean-reversion rate of Y (any sign; negative is
        repulsive). Entries with magnitude below ``DRIFT_SNAP_TOL`` are
        snapped to exactly 0 at construction.
    sigma : (d,) ndarray
        Per-state volatility, strictly positive.
    """

    d: int
    generator: np.ndarray
    drift: np.ndarray
    sigma: np.ndarray

    @property
    def drift_min(self) -> float:
        return float(self.drift.min())

    @property
    def drift_max(self) -> float:
        return float(self.drift.max())


@dataclass(frozen=True)
class ChainQuantities:
    """Quantities derived from the generator of the switching chain.

    Attributes
    ----------
    jump_rates : (d,) ndarray
        Rate of leaving each state, ``-generator[x, x]``.
    embedded : (d, d) ndarray
        Row-stochastic jump-chain matrix with zero diagonal.
    invariant : (d,) ndarray
        Invariant probability measure of the chain (left null vector of
        the generator, normalized to sum to 1).
    """

    jump_rates: np.ndarray
    embedded: np.ndarray
    invariant: np.ndarray


def _as_float_array(value, name, violations):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        violations.append(f"{name} is not numeric")
        return None
    if not np.all(np.isfinite(arr)):
        violations.append(f"{name} contains non-finite entries")
        return None
    return arr


def build_model(d, generator, drift, sigma) -> ModelSpec:
    """Validate raw inputs and assemble a :class:`ModelSpec`.

    Collects *every* violated invariant before raising, so a single error
    message reports all problems at once.

    Raises
    ------
    ModelValidationError
        If any invariant fails: non-square generator, negative
        off-diagonal entry, nonzero row sum, non-positive sigma, zero
        jump rate, or a reducible chain.
    """
    violations = []
    d = int(d)
    if d < 2:
        violations.append(f"d must be at least 2, got {d}")

    gen = _as_float_array(generator, "generator", violations)
    lam = _as_float_array(drift, "drift", violations)
    sig = _as_float_array(sigma, "sigma", violations)

    if gen is not None and gen.shape != (d, d):
        violations.append(f"generator is not {d}x{d} (shape {gen.shape})")
        gen = None
    if lam is not None and lam.shape != (d,):
        violations.append(f"drift does not have length {d} (shape {lam.shape})")
        lam = None
    if sig is not None and sig.shape != (d,):
        violations.append(f"sigma does not have length {d} (shape {sig.shape})")
        sig = None

    if gen is not None:
        off = gen.copy()
        np.fill_diagonal(off, 0.0)
        for x, xt in zip(*np.nonzero(off < 0)):
            violations.append(
                f"generator[{x}][{xt}] = {gen[x, xt]:g} is a negative off-diagonal entry"
            )
        row_sums = gen.sum(axis=1)
        for x in np.nonzero(np.abs(row_sums) > ROW_SUM_TOL)[0]:
            violations.append(f"generator row {x} sums to {row_sums[x]:g}, expected 0")
        for x in np.nonzero(np.diag(gen) >= 0)[0]:
            violations.append(f"state {x} has zero jump rate (generator[{x}][{x}] >= 0)")
        if not violations and not _is_irreducible(gen):
            violations.append("embedded chain is not irreducible")

    if sig is not None:
        for x in np.nonzero(sig <= 0)[0]:
            violations.append(f"sigma[{x}] = {sig[x]:g} is not strictly positive")

    if violations:
        raise ModelValidationError(violations)

    lam = lam.copy()
    tiny = (lam != 0.0) & (np.abs(lam) < DRIFT_SNAP_TOL)
    if np.any(tiny):
        warnings.warn(
            f"drift entries {np.nonzero(tiny)[0].tolist()} below {DRIFT_SNAP_TOL:g} "
            "snapped to 0; the tail regime is discontinuous at 0",
            stacklevel=2,
        )
        lam[tiny] = 0.0

    gen = gen.copy()
    for arr in (gen, lam, sig):
        arr.setflags(write=False)
    return ModelSpec(d=d, generator=gen, drift=lam, sigma=sig)


def _is_irreducible(generator) -> bool:
    # Strong connectivity of the directed graph of positive off-diagonals;
    # on a finite state space irreducible implies recurrent.
    adj = (generator > 0).astype(np.int8)
    np.fill_diagonal(adj, 0)
    n_comp, _ = connected_components(adj, directed=True, connection="strong")
    return n_comp == 1


def chain_quantities(model: ModelSpec) -> ChainQuantities:
    """Derive jump rates, embedded chain, and invariant measure.

    The invariant measure solves ``mu @ generator = 0`` by a dense linear
    solve on the transposed system with one equation replaced by the
    normalization constraint.

    Raises
    ------
    SingularSolveError
        If the solve fails or leaves a residual above
        ``INVARIANT_RESIDUAL_TOL``.
    """
    gen = model.generator
    rates = -np.diag(gen).copy()
    embedded = gen / rates[:, None]
    np.fill_diagonal(embedded, 0.0)

    system = gen.T.copy()
    system[-1, :] = 1.0
    rhs = np.zeros(model.d)
    rhs[-1] = 1.0
    try:
        mu = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSolveError(f"invariant-measure solve failed: {exc}") from exc

    residual = float(np.abs(mu @ gen).max())
    if residual > INVARIANT_RESIDUAL_TOL or mu.min() < -INVARIANT_RESIDUAL_TOL:
        raise SingularSolveError(
            f"invariant-measure solve left residual {residual:g} "
            "(generator rank-deficient beyond its one-dimensional kernel)"
        )
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    for arr in (rates, embedded, mu):
        arr.setflags(write=False)
    return ChainQuantities(jump_rates=rates, embedded=embedded, invariant=mu)


def ergodicity_margin(model: ModelSpec) -> float:
    """Mean drift under the invariant measure of the chain.

    The diffusion is ergodic (admits a stationary law) iff this is > 0.
    """
    mu = chain_quantities(model).invariant
    return float(model.drift @ mu)


_SCHEMA_FIELDS = {"d", "generator", "lambda", "sigma"}


def model_from_dict(doc: dict) -> ModelSpec:
    """Build a model from a parsed JSON document.

    Expected fields: ``d`` (integer), ``generator`` (array of ``d``
    rows), ``lambda`` (array of length ``d``), ``sigma`` (array of
    length ``d``). Any schema violation raises :class:`ModelFileError`
    naming the offending field.
    """
    if not isinstance(doc, dict):
        raise ModelFileError("top-level document must be a JSON object")
    missing = _SCHEMA_FIELDS - doc.keys()
    if missing:
        raise ModelFileError(f"missing required field(s): {', '.join(sorted(missing))}")
    unknown = doc.keys() - _SCHEMA_FIELDS
    if unknown:
        raise ModelFileError(f"unknown field(s): {', '.join(sorted(unknown))}")
    if not isinstance(doc["d"], int) or isinstance(doc["d"], bool):
        raise ModelFileError("field 'd': expected an integer")
    for name in ("generator", "lambda", "sigma"):
        if not isinstance(doc[name], list):
            raise ModelFileError(f"field '{name}': expected an array")
    if not all(isinstance(row, list) for row in doc["generator"]):
        raise ModelFileError("field 'generator': expected an array of arrays (row-major)")
    try:
        return build_model(doc["d"], doc["generator"], doc["lambda"], doc["sigma"])
    except ModelValidationError as exc:
        raise ModelFileError(str(exc)) from exc


def load_model(path) -> ModelSpec:
    """Read and validate a model JSON file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(
            f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return model_from_dict(doc)


def model_to_dict(model: ModelSpec) -> dict:
    """Serialize a model to the JSON document schema."""
    return {
        "d": model.d,
        "generator": model.generator.tolist(),
        "lambda": model.drift.tolist(),
        "sigma": model.sigma.tolist(),
    }
