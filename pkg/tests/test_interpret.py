import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fibonacci_sphere
from semsphere.admissibility import WitnessSet, build_region, contains
from semsphere.interpret import (
    Generation,
    InterpretOptions,
    Interpretation,
    Refusal,
    RefusalReason,
    TemplateEncoder,
    TemplateVerbalizer,
    generate,
    interpret,
    interpret_region,
    map_interpret,
    outcome_to_json,
)
from semsphere.policy import Condition, Constant, FeatureExtractor, IndicatorThreshold, PolicyRegime, SmoothCap
from semsphere.sphere import basis, geodesic_distance, normalize

FLAT3 = PolicyRegime("flat", Constant("one", 1.0), 0.0)


def first_axis_at_least(d, value, tau=0.5):
    ex = FeatureExtractor("x", basis(d, 0))
    return PolicyRegime(f"x>={value}", IndicatorThreshold("x", [Condition(ex, ">=", value)]), tau)


def hemisphere_set(rng, d, n, lift=0.3):
    V = rng.standard_normal((n, d))
    V[:, -1] = np.abs(V[:, -1]) + lift
    return V / np.linalg.norm(V, axis=1, keepdims=True)


def test_flat_prior_returns_certified_center():
    out = interpret(WitnessSet(np.eye(3)[:2]), FLAT3)
    assert isinstance(out, Interpretation) and out.approved
    assert np.allclose(out.mu_star, normalize([1, 1, 0]))
    assert out.prior_value == 1.0


def test_indicator_selects_inside_region():
    W = WitnessSet(np.eye(3)[:2])
    out = interpret(W, first_axis_at_least(3, 0.95))
    assert out.approved
    assert out.mu_star[0] >= 0.95
    assert contains(build_region(W), out.mu_star)


def test_policy_exclusion_when_threshold_unreachable():
    # the hull of e2, e3 has zero first coordinate everywhere
    out = interpret(WitnessSet(np.eye(3)[1:]), first_axis_at_least(3, 0.1))
    assert isinstance(out, Refusal) and not out.approved
    assert out.reason is RefusalReason.POLICY_EXCLUSION
    assert out.message == "No policy-compliant interpretation"
    best_mu, best_value = out.evidence
    assert best_value == 0.0


@pytest.mark.parametrize("regime", [FLAT3, first_axis_at_least(3, -1.0, tau=0.0)])
def test_contradiction_refuses_under_any_regime(regime):
    out = interpret(WitnessSet([basis(3, 0), basis(3, 1), -basis(3, 0)]), regime)
    assert out.reason is RefusalReason.CONTRADICTION
    assert out.evidence.witness_pair == (0, 2)
    assert out.message == "Evidence contradicts"


def test_tau_comparison_is_inclusive():
    out = interpret(WitnessSet(np.eye(2)), PolicyRegime("half", Constant("h", 0.5), 0.5))
    assert out.approved


def test_restart_floor():
    with pytest.raises(ValueError):
        InterpretOptions(restarts=7)


def test_smooth_cap_moves_toward_axis_and_stays_inside():
    W = WitnessSet(np.eye(3))
    regime = PolicyRegime("cap", SmoothCap("cap", normalize([1.0, 0.1, -1.0]), kappa=4.0), 0.0)
    out = interpret(W, regime)
    region = build_region(W)
    assert contains(region, out.mu_star)
    # constrained optimum is on the face spanned by e1, e2 near e1
    assert out.mu_star[2] == pytest.approx(0.0, abs=1e-4)
    assert out.mu_star[0] > 0.95


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 6), st.integers(1, 6), st.floats(-0.5, 0.9))
def test_selected_point_is_always_admissible(seed, d, n, level):
    rng = np.random.default_rng(seed)
    W = WitnessSet(hemisphere_set(rng, d, n))
    out = interpret(W, first_axis_at_least(d, level), InterpretOptions(seed=seed))
    if out.approved:
        assert contains(build_region(W), out.mu_star)
        assert out.mu_star[0] >= level


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 5), st.integers(1, 5))
def test_relaxing_threshold_never_loses_approval(seed, d, n):
    rng = np.random.default_rng(seed)
    region = build_region(WitnessSet(hemisphere_set(rng, d, n)))
    opts = InterpretOptions(seed=seed)
    levels = [0.8, 0.5, 0.2, -0.2]
    approved = [interpret_region(region, first_axis_at_least(d, v), opts).approved for v in levels]
    # once approved, every looser threshold approves too
    for a, b in zip(approved, approved[1:]):
        assert b or not a


def test_interpret_is_deterministic():
    rng = np.random.default_rng(0)
    W = WitnessSet(hemisphere_set(rng, 5, 4))
    regime = PolicyRegime("cap", SmoothCap("c", basis(5, 0), 3.0), 0.0)
    a = interpret(W, regime, InterpretOptions(seed=3))
    b = interpret(W, regime, InterpretOptions(seed=3))
    assert np.array_equal(a.mu_star, b.mu_star)


def _grid_map_oracle(V, target, kappa):
    """Argmax of kappa * mu . target over grid points inside cone(V) (V square, invertible)."""
    G = fibonacci_sphere(200_000)
    a = np.linalg.solve(V.T, G.T).T
    inside = np.all(a >= 0, axis=1)
    vals = kappa * (G[inside] @ target)
    k = int(np.argmax(vals))
    return G[inside][k], float(vals[k])


def test_map_interpret_matches_geodesic_grid():
    V = np.array([normalize([1, 0.2, 0.3]), normalize([0.1, 1, 0.4]), normalize([0.3, 0.2, 1])])
    target = normalize([1.0, -1.0, 0.4])
    kappa = 3.0
    out = map_interpret(WitnessSet(V), lambda mu: kappa * float(mu @ target), Constant("one", 1.0), 0.0)
    mu_grid, val_grid = _grid_map_oracle(V, target, kappa)
    assert out.approved
    assert out.objective >= val_grid - 1e-6
    assert geodesic_distance(out.mu_star, mu_grid) < 0.02


def test_map_interpret_never_scores_zero_prior_points():
    # likelihood pulls toward e2 but the prior is zero there; MAP must pick a prior-positive point
    W = WitnessSet(np.eye(3)[:2])
    prior = IndicatorThreshold("x", [Condition(FeatureExtractor("x", basis(3, 0)), ">=", 0.9)])
    out = map_interpret(W, lambda mu: 10.0 * mu[1], prior, 0.5)
    assert out.approved and out.mu_star[0] >= 0.9
    none = IndicatorThreshold("z", [Condition(FeatureExtractor("z", basis(3, 2)), ">=", 0.5)])
    refused = map_interpret(W, lambda mu: 0.0, none, 0.5)
    assert refused.reason is RefusalReason.POLICY_EXCLUSION


def test_generate_round_trip_and_gates():
    W = WitnessSet(np.eye(3)[:2])
    g = generate(W, FLAT3)
    assert isinstance(g, Generation) and g.round_trip == 0.0
    assert np.array_equal(TemplateEncoder().encode(TemplateVerbalizer().verbalize(g.interpretation.mu_star)), g.interpretation.mu_star)
    assert generate(WitnessSet([basis(3, 0), -basis(3, 0)]), FLAT3).reason is RefusalReason.CONTRADICTION
    assert generate(WitnessSet(np.eye(3)[1:]), first_axis_at_least(3, 0.5)).reason is RefusalReason.POLICY_EXCLUSION

    class Lossy:
        def encode(self, text):
            return normalize(TemplateEncoder().encode(text) + np.array([0.0, 0.0, 1e-3]))

    bad = generate(W, FLAT3, encoder=Lossy())
    assert bad.reason is RefusalReason.VERIFICATION_FAILURE
    assert bad.evidence > 1e-6
    with pytest.raises(ValueError):
        generate(W, FLAT3, delta=0.0)


def test_generate_uses_extract_hook():
    calls = []

    def extract(q):
        calls.append(q)
        return WitnessSet(np.eye(3))

    assert isinstance(generate("query", FLAT3, extract=extract), Generation)
    assert calls == ["query"]


def test_outcome_json_is_serializable():
    outs = [
        interpret(WitnessSet(np.eye(3)), FLAT3),
        interpret(WitnessSet([basis(3, 0), -basis(3, 0)]), FLAT3),
        interpret(WitnessSet(np.eye(3)[1:]), first_axis_at_least(3, 0.5)),
    ]
    docs = [json.loads(json.dumps(outcome_to_json(o))) for o in outs]
    assert [d["outcome"] for d in docs] == ["approve", "refuse", "refuse"]
    assert docs[1]["refusal_reason"] == "Contradiction"
    assert docs[2]["refusal_evidence"]["best_prior_value"] == 0.0
    assert math.isclose(sum(x * x for x in docs[0]["mu_star"]), 1.0)
