import math

import numpy as np
import pytest

from graphcert import (
    NoTiePresent,
    OutsideDomain,
    TooSmall,
    collision_instance,
    coverage_experiment,
    grassmann_distance,
    modulus_audit,
    tie_counterexample,
    top_m_selection,
)
from graphcert.simulation import CoverageConfig, replication_seed
from graphcert import two_block_sbm


def test_replication_seeds_are_distinct_and_stable():
    seeds = [replication_seed(7, i) for i in range(100)]
    assert len(set(seeds)) == 100
    assert seeds == [replication_seed(7, i) for i in range(100)]
    assert replication_seed(8, 0) != replication_seed(7, 0)


def test_coverage_reproducible(sbm200):
    config = CoverageConfig(k=2, alpha=0.2, claims=("deviation",))
    a = coverage_experiment(sbm200, config, 20, base_seed=3)
    b = coverage_experiment(sbm200, config, 20, base_seed=3)
    assert a.to_dict() == b.to_dict()
    c = coverage_experiment(sbm200, config, 20, base_seed=4)
    assert a.to_dict() != c.to_dict()


def test_degenerate_model_full_coverage():
    from graphcert import SBMSpec, build_probability_matrix

    model = build_probability_matrix(SBMSpec.from_labels([0] * 6, [[0.0]]))
    config = CoverageConfig(k=1, alpha=0.1)
    result = coverage_experiment(model, config, 25, base_seed=0)
    for name, claim in result.claims.items():
        assert claim.coverage == 1.0, name
    # the impossible claims are refusals, flagged as such, never hidden
    assert result.claims["subspace"].refused
    assert result.claims["cluster"].refused
    assert not result.claims["deviation"].refused
    assert result.empirical_coverage == 1.0


def test_small_coverage_run_audits_clean(sbm200):
    config = CoverageConfig(k=2, alpha=0.2)
    result = coverage_experiment(sbm200, config, 30, base_seed=11)
    for name, audit in result.audits.items():
        assert audit.violations == 0, name
    # at this noise level the subspace radius is vacuous but still covers
    assert result.claims["subspace"].extra["radius"] > 1
    assert result.claims["subspace"].coverage == 1.0
    assert result.claims["deviation"].coverage == 1.0


def test_uniform_rounding_audit_fires_on_strong_signal():
    # at this signal strength the rowwise premise holds on every sample
    model = two_block_sbm(600, 0.9, 0.3)
    config = CoverageConfig(k=2, alpha=0.1, claims=("cluster",), c_row=0.02)
    result = coverage_experiment(model, config, 10, base_seed=13)
    audit = result.audits["rounding_uniform"]
    assert audit.trials >= 1
    assert audit.violations == 0
    assert result.claims["cluster"].extra["route"] == "uniform_rowwise"


@pytest.mark.parametrize("alpha", [0.05, 0.2])
def test_deviation_validity_across_levels(sbm200, alpha):
    # fraction exceeding the v(P) quantile stays within alpha + 3 sd
    config = CoverageConfig(
        k=2, alpha=alpha, claims=("deviation",), audit_inequalities=False
    )
    result = coverage_experiment(sbm200, config, 500, base_seed=61)
    sd = math.sqrt(alpha * (1 - alpha) / 500)
    assert 1.0 - result.claims["deviation"].coverage <= alpha + 3 * sd


def test_declared_mode_overdeclared_envelope(sbm200):
    config = CoverageConfig(
        k=2,
        alpha=0.2,
        claims=("deviation", "subspace"),
        mode="declared",
        declared_d_max=80.0,  # over-declared: still valid, just wider
        declared_gap=20.0,
    )
    result = coverage_experiment(sbm200, config, 20, base_seed=5)
    assert result.claims["subspace"].coverage == 1.0
    assert result.claims["subspace"].extra["radius"] > 2


# ---------------------------------------------------------------------------
# tie counterexample

def test_tie_counterexample_worked_example():
    x = np.array([2.0, 2.0, 1.0])
    x_new = tie_counterexample(x, m=1, eps=0.01)
    assert np.allclose(x_new, [1.99, 2.01, 1.0])
    sel = top_m_selection(x_new, 1)
    assert sel.unique and sel.sets == ((1,),)


@pytest.mark.parametrize("eps", [1e-1, 1e-3, 1e-6])
def test_tie_counterexample_any_eps(eps):
    x = np.array([1.0, 1.0, 1.0, 0.0])
    x_new = tie_counterexample(x, m=2, eps=eps)
    assert np.isclose(np.max(np.abs(x_new - x)), eps, rtol=1e-9)
    sel = top_m_selection(x_new, 2)
    assert sel.unique
    # index 0 was admissible before and is excluded now
    assert 0 not in sel.sets[0]


def test_tie_counterexample_requires_tie():
    with pytest.raises(NoTiePresent):
        tie_counterexample(np.array([3.0, 2.0, 1.0]), 1, 0.1)


def test_tie_counterexample_disjointness_audit(rng):
    # 100 random instances tied at the maximum with room for disjoint sets
    for trial in range(100):
        m = int(rng.integers(1, 4))
        tied = int(rng.integers(2 * m, 2 * m + 4))
        rest = int(rng.integers(1, 5))
        top = float(rng.uniform(1, 2))
        x = np.concatenate(
            [np.full(tied, top), rng.uniform(0, 0.5, size=rest)]
        )
        perm = rng.permutation(x.size)
        x = x[perm]
        before = top_m_selection(x, m)
        assert before.num_admissible >= 2
        x_new = tie_counterexample(x, m, eps=1e-4)
        after = top_m_selection(x_new, m)
        assert after.unique
        new_set = set(after.sets[0])
        assert any(not new_set & set(s) for s in before.sets), trial


# ---------------------------------------------------------------------------
# collision instances

def test_collision_instance_two_cliques():
    model, U_a, U_b = collision_instance(6, 1)
    P = model.P
    # two disconnected 3-cliques at probability one half
    assert P[0, 1] == 0.5 and P[0, 3] == 0.0
    w = np.sort(np.linalg.eigvalsh(P))[::-1]
    assert abs(w[0] - w[1]) < 1e-10  # top eigenvalue multiplicity 2
    assert abs(w[0] - 1.0) < 1e-12   # 0.5 * (3 - 1)
    assert abs(grassmann_distance(U_a, U_b) - 1.0) < 1e-12


def test_collision_instance_general_k():
    for n, k in [(12, 2), (20, 3), (9, 1)]:
        model, U_a, U_b = collision_instance(n, k)
        w = np.sort(np.linalg.eigvalsh(model.P))[::-1]
        assert abs(w[k - 1] - w[k]) < 1e-10
        assert abs(grassmann_distance(U_a, U_b) - 1.0) < 1e-12
        # both bases really span invariant subspaces of the collided block
        for U in (U_a, U_b):
            PU = model.P @ U.U
            assert np.allclose(PU, U.U * w[0], atol=1e-10)


def test_collision_instance_too_small():
    with pytest.raises(TooSmall):
        collision_instance(5, 2)


def test_collision_break_radius_scales_inversely(rng):
    # sweeping the collision-breaking parameter: radius ~ 1/delta
    from graphcert import davis_kahan_radius, deviation_quantile

    n, k = 40, 1
    products = []
    for delta in (0.2, 0.1, 0.05):
        model, _, _ = collision_instance(n, k, delta=delta)
        w = np.sort(np.linalg.eigvalsh(model.P))[::-1]
        gap = w[0] - w[1]
        q = deviation_quantile(5.0, n, 0.1).q
        r, _ = davis_kahan_radius(q, gap)
        products.append(r * delta)
    assert max(products) - min(products) < 1e-9 * max(products) + 1e-12


def test_collision_delta_validation():
    with pytest.raises(ValueError):
        collision_instance(12, 2, delta=0.9)  # above 1/k


# ---------------------------------------------------------------------------
# modulus audits

def test_modulus_audit_katz_two_norm(rng):
    n = 10
    samples = []
    for _ in range(3):
        M = rng.normal(size=(n, n))
        M = (M + M.T) / 2
        M *= 1.0 / np.linalg.norm(M, 2)
        samples.append(M)
    beta = 0.2  # limit 2.5, samples at rho = 1 leave room for the scale
    out = modulus_audit(("katz", beta), samples, perturbation_scale=0.3, trials=40)
    assert out.trials == 120
    assert out.max_ratio_2 <= out.stated_modulus_2  # 4 beta sqrt(n)
    assert out.stated_modulus_inf == 4 * beta
    assert out.max_ratio_inf > 0


def test_modulus_audit_eigenvector(rng):
    M = np.diag([6.0, 2.0, 1.0, 0.5])
    out = modulus_audit(("eigenvector",), [M], perturbation_scale=0.5, trials=60)
    assert out.max_ratio_2 <= out.stated_modulus_2 + 1e-9  # 2 / gamma
    assert out.stated_modulus_2 == 2.0 / 4.0


def test_modulus_audit_small_scale_matches_local_derivative(rng):
    # as the scale shrinks, ratios approach local sensitivities (sanity)
    M = np.diag([6.0, 2.0, 1.0, 0.5])
    big = modulus_audit(("eigenvector",), [M], perturbation_scale=0.4, trials=30)
    small = modulus_audit(("eigenvector",), [M], perturbation_scale=0.01, trials=30)
    assert small.max_ratio_2 <= big.stated_modulus_2
    assert small.max_ratio_2 > 0


def test_modulus_audit_rejects_out_of_domain():
    M = np.eye(4) * 10.0
    with pytest.raises(OutsideDomain):
        modulus_audit(("katz", 0.2), [M], perturbation_scale=0.1, trials=1)
