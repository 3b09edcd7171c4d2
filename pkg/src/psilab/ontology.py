"""Hidden-variable (ontological) models over finite lambda spaces.

A model carries a discretized space of ontic states, one preparation density
per quantum state label, and a response model that is either universal
(outcome probabilities depend on lambda only) or contextual (additionally
conditioned on the prepared state and the measurement setting).  Integrals
over lambda become weighted sums, so every prediction and every support
check is an exact finite computation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

NORMALIZATION_TOL = 1e-10
RESPONSE_TOL = 1e-12
# Support cutoff, relative to the maximum density of the distribution.
SUPPORT_EPS_FACTOR = 1e-12


class OntologyError(ValueError):
    pass


class SpaceMismatch(OntologyError):
    pass


class UnknownLabel(KeyError):
    pass


class PsiClass(Enum):
    PSI_ONTIC = "psi-ontic"
    PSI_EPISTEMIC = "psi-epistemic"


@dataclass(frozen=True)
class LambdaSpace:
    """Finite ordered set of ontic states with positive cell weights."""

    weights: np.ndarray
    coords: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.size < 1:
            raise OntologyError("lambda space needs at least one point")
        if np.any(w <= 0.0):
            raise OntologyError("cell weights must be strictly positive")
        object.__setattr__(self, "weights", w)
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            if c.shape != w.shape:
                raise OntologyError("coords and weights must have equal length")
            object.__setattr__(self, "coords", c)

    @property
    def size(self) -> int:
        return int(self.weights.size)


@dataclass(frozen=True)
class PreparationDensity:
    """Probability density over a lambda space for one prepared state."""

    space: LambdaSpace
    label: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.space.weights.shape:
            raise SpaceMismatch("density length does not match lambda space")
        if np.any(v < 0.0):
            raise OntologyError(f"negative density for preparation {self.label!r}")
        total = float(np.sum(v * self.space.weights))
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise OntologyError(
                f"density for {self.label!r} integrates to {total!r}, expected 1"
            )
        object.__setattr__(self, "values", v)


def uniform_density(space: LambdaSpace, label: str, cells) -> PreparationDensity:
    """Uniform density supported on the given cell indices."""
    cells = np.asarray(cells, dtype=int)
    v = np.zeros(space.size)
    total = float(np.sum(space.weights[cells]))
    v[cells] = 1.0 / total
    return PreparationDensity(space, label, v)


def delta_density(space: LambdaSpace, label: str, cell: int) -> PreparationDensity:
    v = np.zeros(space.size)
    v[cell] = 1.0 / float(space.weights[cell])
    return PreparationDensity(space, label, v)


def _check_response_table(table: np.ndarray, what: str):
    if np.any(table < -RESPONSE_TOL) or np.any(table > 1.0 + RESPONSE_TOL):
        raise OntologyError(f"{what}: entries outside [0, 1]")
    sums = np.sum(table, axis=0)
    if np.max(np.abs(sums - 1.0)) > RESPONSE_TOL:
        raise OntologyError(f"{what}: outcome probabilities do not sum to 1")


@dataclass(frozen=True)
class UniversalResponse:
    """Preparation-independent response: one table over outcomes x lambda^arity."""

    outcomes: tuple[str, ...]
    table: np.ndarray
    context: str = "default"

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.shape[0] != len(self.outcomes):
            raise OntologyError("response table first axis must index outcomes")
        _check_response_table(t, "universal response")
        object.__setattr__(self, "table", t)

    @property
    def arity(self) -> int:
        return self.table.ndim - 1


@dataclass(frozen=True)
class ContextualResponse:
    """Response conditioned on the prepared state and the measurement setting.

    ``tables`` maps (preparation label, context label) to an
    (outcomes, lambda) probability table.
    """

    outcomes: tuple[str, ...]
    tables: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        checked = {}
        for key, t in self.tables.items():
            t = np.asarray(t, dtype=float)
            if t.ndim != 2 or t.shape[0] != len(self.outcomes):
                raise OntologyError(f"bad table shape for {key}")
            _check_response_table(t, f"contextual response {key}")
            checked[key] = t
        object.__setattr__(self, "tables", checked)


@dataclass(frozen=True)
class OntModel:
    space: LambdaSpace
    preparations: dict[str, PreparationDensity]
    response: UniversalResponse | ContextualResponse
    product_arity: int = 1

    def __post_init__(self):
        for label, dens in self.preparations.items():
            if dens.space is not self.space and not np.array_equal(
                dens.space.weights, self.space.weights
            ):
                raise SpaceMismatch(f"density {label!r} lives on a different space")
        if isinstance(self.response, ContextualResponse):
            for prep, _ctx in self.response.tables:
                if prep not in self.preparations:
                    raise UnknownLabel(prep)
            if self.product_arity != 1:
                raise OntologyError("contextual responses are single-system only")
        else:
            if self.response.arity != self.product_arity:
                raise OntologyError(
                    f"response arity {self.response.arity} != "
                    f"product arity {self.product_arity}"
                )
            for t_dim in self.response.table.shape[1:]:
                if t_dim != self.space.size:
                    raise SpaceMismatch("response table does not match lambda space")

    @property
    def prep_labels(self) -> tuple[str, ...]:
        return tuple(self.preparations)

    def density(self, label: str) -> PreparationDensity:
        try:
            return self.preparations[label]
        except KeyError:
            raise UnknownLabel(label) from None


def predict(model: OntModel, prep_label: str, context: str, outcome: str) -> float:
    """Outcome probability: weighted lambda sum of response times density."""
    dens = model.density(prep_label)
    rho_w = dens.values * model.space.weights
    resp = model.response
    try:
        idx = resp.outcomes.index(outcome)
    except ValueError:
        raise UnknownLabel(outcome) from None
    if isinstance(resp, ContextualResponse):
        key = (prep_label, context)
        if key not in resp.tables:
            raise UnknownLabel(f"no response table for {key}")
        return float(np.sum(resp.tables[key][idx] * rho_w))
    if context != resp.context:
        raise UnknownLabel(f"unknown context {context!r}")
    if resp.arity != 1:
        raise OntologyError("use predict_product for multi-system responses")
    return float(np.sum(resp.table[idx] * rho_w))


def predict_product(model: OntModel, labels, basis=None, outcome_index: int = 0) -> float:
    """Joint-preparation probability under a universal multi-lambda response.

    ``labels`` selects one preparation per tensor factor; the response table
    is contracted against the product of the corresponding weighted densities.
    ``basis`` is accepted for outcome-count validation only.
    """
    resp = model.response
    if not isinstance(resp, UniversalResponse):
        raise OntologyError("predict_product requires a universal response")
    labels = tuple(labels)
    if len(labels) != model.product_arity:
        raise OntologyError(
            f"expected {model.product_arity} labels, got {len(labels)}"
        )
    if basis is not None and len(basis) != len(resp.outcomes):
        raise OntologyError("basis size does not match response outcomes")
    acc = resp.table[outcome_index]
    # Contract trailing lambda axes one by one against weighted densities.
    for label in reversed(labels):
        rho_w = model.density(label).values * model.space.weights
        acc = acc @ rho_w
    return float(acc)


def support(density: PreparationDensity, eps: float | None = None) -> np.ndarray:
    """Indices of cells whose density exceeds the cutoff."""
    if eps is None:
        eps = SUPPORT_EPS_FACTOR * float(np.max(density.values))
    if eps < 0:
        raise OntologyError("support threshold must be nonnegative")
    return np.flatnonzero(density.values > eps)


def overlap(
    d1: PreparationDensity, d2: PreparationDensity, eps: float | None = None
) -> float:
    """Weight of the common support of two densities on the same space."""
    if d1.space is not d2.space and not np.array_equal(
        d1.space.weights, d2.space.weights
    ):
        raise SpaceMismatch("densities live on different lambda spaces")
    s1 = np.zeros(d1.space.size, dtype=bool)
    s1[support(d1, eps)] = True
    s2 = np.zeros(d2.space.size, dtype=bool)
    s2[support(d2, eps)] = True
    both = s1 & s2
    return float(np.sum(d1.space.weights[both]))


def classify(model: OntModel, eps: float | None = None) -> PsiClass:
    """Psi-ontic iff every pair of distinct preparations has disjoint support."""
    labels = model.prep_labels
    if len(labels) < 2:
        raise OntologyError("classification needs at least two preparations")
    for i, a in enumerate(labels):
        for b in labels[i + 1 :]:
            if overlap(model.preparations[a], model.preparations[b], eps) > 0.0:
                return PsiClass.PSI_EPISTEMIC
    return PsiClass.PSI_ONTIC


def joint_distribution(model: OntModel, prep_label: str, context: str) -> np.ndarray:
    """Joint (outcome, lambda) distribution generated by a contextual model.

    Row alpha, column k holds P(alpha | lambda_k, prep) * rho(lambda_k | prep)
    * weight_k, so rows marginalize to predict() and columns to the lambda
    distribution.
    """
    resp = model.response
    if not isinstance(resp, ContextualResponse):
        raise OntologyError("joint_distribution requires a contextual response")
    key = (prep_label, context)
    if key not in resp.tables:
        raise UnknownLabel(f"no response table for {key}")
    dens = model.density(prep_label)
    return resp.tables[key] * (dens.values * model.space.weights)[None, :]


# ---------------------------------------------------------------------------
# Beam-splitter model
# ---------------------------------------------------------------------------

BS_CONTEXT = "gates"
BS_OUTCOMES = ("3", "4")


def build_beam_splitter_model(cells_per_gate: int = 4) -> OntModel:
    """Deterministic contextual model of a 50-50 beam splitter.

    Lambda is the packet coordinate: two disjoint regions, one per input
    gate.  Preparations entering a single gate are uniform on their region;
    the two phased superpositions are uniform on both.  Responses are
    conditioned on the preparation: superposition '+' sends every lambda to
    exit 3 and '-' to exit 4, while single-gate preparations split their
    region in half by coordinate order (lower half to exit 3).  The choice
    of which half goes where is conventional; any fixed deterministic
    partition reproduces the 50-50 statistics.
    """
    if cells_per_gate < 2:
        raise OntologyError("need at least 2 cells per gate region")
    m = 2 * cells_per_gate
    width = 1.0 / cells_per_gate
    coords = np.concatenate(
        [
            -2.0 + width * (np.arange(cells_per_gate) + 0.5),
            1.0 + width * (np.arange(cells_per_gate) + 0.5),
        ]
    )
    space = LambdaSpace(weights=np.full(m, width), coords=coords)
    gate1 = np.arange(cells_per_gate)
    gate2 = np.arange(cells_per_gate, m)

    preparations = {
        "psi1": uniform_density(space, "psi1", gate1),
        "psi2": uniform_density(space, "psi2", gate2),
        "plus": uniform_density(space, "plus", np.arange(m)),
        "minus": uniform_density(space, "minus", np.arange(m)),
    }

    all_to3 = np.vstack([np.ones(m), np.zeros(m)])
    all_to4 = np.vstack([np.zeros(m), np.ones(m)])
    # Lower coordinate half of each region exits at gate 3.
    half = cells_per_gate // 2
    to3 = np.zeros(m, dtype=bool)
    to3[:half] = True
    to3[cells_per_gate : cells_per_gate + half] = True
    split = np.vstack([to3.astype(float), (~to3).astype(float)])

    tables = {
        ("plus", BS_CONTEXT): all_to3,
        ("minus", BS_CONTEXT): all_to4,
        ("psi1", BS_CONTEXT): split,
        ("psi2", BS_CONTEXT): split,
    }
    response = ContextualResponse(BS_OUTCOMES, tables)
    return OntModel(space, preparations, response)


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def model_to_dict(model: OntModel) -> dict:
    d = {
        "space": {
            "weights": model.space.weights.tolist(),
            "coords": None if model.space.coords is None else model.space.coords.tolist(),
        },
        "preparations": {
            label: dens.values.tolist() for label, dens in model.preparations.items()
        },
        "product_arity": model.product_arity,
    }
    resp = model.response
    if isinstance(resp, UniversalResponse):
        d["response"] = {
            "variant": "universal",
            "outcomes": list(resp.outcomes),
            "context": resp.context,
            "table": resp.table.tolist(),
        }
    else:
        d["response"] = {
            "variant": "contextual",
            "outcomes": list(resp.outcomes),
            "tables": [
                {"prep": prep, "context": ctx, "table": t.tolist()}
                for (prep, ctx), t in sorted(resp.tables.items())
            ],
        }
    return d


def model_from_dict(d: dict) -> OntModel:
    sp = d["space"]
    space = LambdaSpace(
        weights=np.array(sp["weights"]),
        coords=None if sp["coords"] is None else np.array(sp["coords"]),
    )
    preparations = {
        label: PreparationDensity(space, label, np.array(vals))
        for label, vals in d["preparations"].items()
    }
    r = d["response"]
    if r["variant"] == "universal":
        response = UniversalResponse(
            tuple(r["outcomes"]), np.array(r["table"]), r["context"]
        )
    else:
        response = ContextualResponse(
            tuple(r["outcomes"]),
            {(e["prep"], e["context"]): np.array(e["table"]) for e in r["tables"]},
        )
    return OntModel(space, preparations, response, d["product_arity"])


def model_to_json(model: OntModel) -> str:
    # json round-trips Python floats exactly (shortest-repr serialization).
    return json.dumps(model_to_dict(model), sort_keys=True)


def model_from_json(text: str) -> OntModel:
    return model_from_dict(json.loads(text))


def enumerate_support_patterns(max_cells: int):
    """All (cell count, support1, support2) patterns up to a size bound.

    Yields every pair of nonempty supports on lambda spaces with 1..max_cells
    cells; used for exhaustive agreement checks between the analytic
    contradiction finder and the feasibility solver.
    """
    for m in range(1, max_cells + 1):
        cells = list(range(m))
        for mask1 in range(1, 2**m):
            s1 = [c for c in cells if mask1 >> c & 1]
            for mask2 in range(1, 2**m):
                s2 = [c for c in cells if mask2 >> c & 1]
                yield m, s1, s2
