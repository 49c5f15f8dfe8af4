import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eacausal import sem as sm
from eacausal.info import DistributionError, JointDistribution, conditional_entropy, \
    entropy, mutual_information
from eacausal.sem import Q, X, XR, Y

ALL_SETS = [s for k in (1, 2, 3) for s in itertools.combinations((Q, X, XR), k)]
Q_SETS = [s for s in ALL_SETS if Q in s]


def tiny_sem(**over):
    # 2x2x2x2 chain with hand-checkable tables
    kw = dict(q_alphabet=("q0", "q1"), x_alphabet=("x0", "x1"), r_alphabet=("r0", "r1"),
              y_alphabet=("y0", "y1"), q_prior=[0.3, 0.7],
              x_given_q=[[0.6, 0.4], [0.1, 0.9]],
              extractor=[[[0.8, 0.2], [0.5, 0.5]], [[0.3, 0.7], [0.9, 0.1]]],
              generator=[[[0.9, 0.1], [0.2, 0.8]], [[0.6, 0.4], [0.25, 0.75]]])
    kw.update(over)
    return sm.Sem(**kw)


# --- construction ---

def test_bad_rows_rejected():
    with pytest.raises(sm.SemError):
        tiny_sem(q_prior=[0.3, 0.6])
    with pytest.raises(sm.SemError):
        tiny_sem(x_given_q=[[0.6, 0.4], [0.1, 0.8]])
    with pytest.raises(sm.SemError):
        tiny_sem(x_alphabet=())
    with pytest.raises(sm.SemError):
        tiny_sem(generator=[[[0.9, 0.1]], [[0.6, 0.4]]])


def test_build_joint_factorizes():
    s = tiny_sem()
    p = sm.build_joint(s).table
    assert p.shape == (2, 2, 2, 2)
    assert abs(p.sum() - 1) < 1e-12
    for q, x, r, y in itertools.product(range(2), repeat=4):
        want = s.q_prior[q] * s.x_given_q[q, x] * s.extractor[q, x, r] * s.generator[q, r, y]
        assert p[q, x, r, y] == pytest.approx(want, abs=1e-15)


def test_all_relevant_support_on_diagonal():
    s = sm.example_sem("all-relevant", 3)
    p = sm.build_joint(s).table
    for q, x, r, y in zip(*np.nonzero(p)):
        assert s.x_alphabet[x] == s.r_alphabet[r]


def test_deterministic_sem_single_cell():
    s = sm.Sem(("q",), ("a", "b"), ("c", "d"), ("e", "f"), [1.0], [[0.0, 1.0]],
               [[[1.0, 0.0], [0.0, 1.0]]], [[[1.0, 0.0], [0.0, 1.0]]])
    p = sm.build_joint(s).probs
    assert np.count_nonzero(p) == 1 and p.max() == 1.0
    assert len(set(sm.sample_sem(s, 50, seed=3))) == 1


def test_table_cap():
    with pytest.raises(DistributionError):
        sm.random_sem((11, 100, 100, 100))


def test_monte_carlo_matches_joint():
    s = sm.random_sem((2, 3, 2, 2), seed=4)
    n = 100_000
    idx = sm.sample_indices(s, n, seed=9)
    counts = np.zeros(s.shape)
    np.add.at(counts, tuple(idx.T), 1)
    p = sm.build_joint(s).table
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3 * sigma + 1e-9)


def test_sample_sem_labels_and_reproducibility():
    s = sm.random_sem((2, 2, 2, 2), seed=1)
    a, b = sm.sample_sem(s, 200, seed=5), sm.sample_sem(s, 200, seed=5)
    assert a == b
    assert sm.sample_sem(s, 200, seed=6) != a
    assert all(t[0] in s.q_alphabet and t[3] in s.y_alphabet for t in a)
    with pytest.raises(sm.SemError):
        sm.sample_sem(s, 0, seed=0)


# --- interventions ---

def _p_y_given(joint, var):
    axis = sm.VARIABLES.index(var)
    m = joint.table.sum(axis=tuple(i for i in range(3) if i != axis))   # (|var|, |Y|)
    return m / m.sum(axis=1, keepdims=True)


def _p_y(joint):
    return joint.table.sum(axis=(0, 1, 2))


def test_do_on_root_x_equals_conditioning():
    # with a single question value X is a root of the chain
    s = sm.random_sem((1, 3, 2, 3), seed=2)
    cond = _p_y_given(sm.build_joint(s), X)
    for x in range(3):
        assert np.allclose(_p_y(sm.intervene(s, X, x)), cond[x], atol=1e-12)


def test_do_xr_truncated_factorization_by_hand():
    s = tiny_sem()
    for r in range(2):
        want = sum(s.q_prior[q] * s.generator[q, r] for q in range(2))
        got = _p_y(sm.intervene(s, XR, s.r_alphabet[r]))
        assert np.allclose(got, want, atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_interventional_equals_observational_without_question_confounding(seed):
    s = sm.random_sem((1, 3, 3, 2), seed=seed)
    joint = sm.build_joint(s)
    for var in (Q, X, XR):
        cond = _p_y_given(joint, var)
        for v in range(s.shape[sm.VARIABLES.index(var)]):
            assert np.allclose(_p_y(sm.intervene(s, var, v)), cond[v], atol=1e-12)


def test_intervention_errors():
    s = tiny_sem()
    with pytest.raises(sm.SemError):
        sm.intervene(s, Y, 0)
    with pytest.raises(sm.SemError):
        sm.intervene(s, X, "nope")
    with pytest.raises(sm.SemError):
        sm.intervene(s, X, 7)
    with pytest.raises(sm.SemError):
        sm.information_flow(s, ())


# --- information flow ---

def test_flow_zero_when_y_ignores_sources():
    s = tiny_sem(generator=[[[0.3, 0.7], [0.3, 0.7]], [[0.3, 0.7], [0.3, 0.7]]])
    for srcs in ALL_SETS:
        assert sm.information_flow(s, srcs) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_flow_relevant_equals_entropy_of_y(n):
    s = sm.example_sem("uniform-pick", n, vocab=3 * n)
    h_y = entropy(sm.build_joint(s), Y)
    assert sm.information_flow(s, (Q, XR)) == pytest.approx(h_y, abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_flow_equals_mi_for_question_conditioned_sets(seed):
    s = sm.random_sem((2, 3, 3, 2), seed=seed)
    joint = sm.build_joint(s)
    for srcs in Q_SETS:
        assert abs(sm.information_flow(s, srcs) - mutual_information(joint, srcs, Y)) <= 1e-10


@pytest.mark.parametrize("seed", range(10))
def test_flow_equals_mi_for_every_set_with_single_question(seed):
    s = sm.random_sem((1, 3, 4, 3), seed=seed)
    joint = sm.build_joint(s)
    for srcs in ALL_SETS:
        assert abs(sm.information_flow(s, srcs) - mutual_information(joint, srcs, Y)) <= 1e-10


def test_flow_differs_from_mi_when_question_confounds():
    # Q drives both X_R and Y: intervening on X_R alone cuts the backdoor path
    s = sm.Sem(("a", "b"), ("x",), ("r0", "r1"), ("y0", "y1"), [0.5, 0.5], [[1.0], [1.0]],
               [[[1.0, 0.0]], [[0.0, 1.0]]], [[[1.0, 0.0], [1.0, 0.0]],
                                              [[0.0, 1.0], [0.0, 1.0]]])
    joint = sm.build_joint(s)
    assert sm.information_flow(s, XR) == pytest.approx(0.0, abs=1e-15)
    assert mutual_information(joint, XR, Y) == pytest.approx(math.log(2), abs=1e-12)


# --- causal effect of irrelevant sentences ---

@pytest.mark.parametrize("kind", ["all-relevant", "first-only"])
def test_worked_examples_zero(kind):
    rep = sm.causal_effect_irrelevant(sm.example_sem(kind, 3))
    assert abs(rep.ce_flow) <= 1e-12 and abs(rep.ce_entropy) <= 1e-12


def test_uniform_pick_eight():
    rep = sm.causal_effect_irrelevant(sm.example_sem("uniform-pick", 8))
    assert rep.ce_flow == pytest.approx(2.079442, abs=1e-6)
    assert rep.ce_entropy == pytest.approx(math.log(8), abs=1e-12)


def test_example_entropies():
    j = sm.build_joint(sm.example_sem("all-relevant", 4, vocab=10))
    assert conditional_entropy(j, XR, (X, Q)) == 0.0
    j = sm.build_joint(sm.example_sem("first-only", 4, vocab=10))
    assert conditional_entropy(j, XR, (X, Q, Y)) == 0.0
    j = sm.build_joint(sm.example_sem("uniform-pick", 4, vocab=10))
    assert conditional_entropy(j, XR, (X, Q)) == pytest.approx(math.log(4), abs=1e-12)
    assert conditional_entropy(j, XR, (X, Q, Y)) == pytest.approx(0.0, abs=1e-12)


def test_collisions_mode_below_log_n_but_identities_hold():
    s = sm.example_sem("uniform-pick", 4, vocab=2, distinct=False, n_docs=32, seed=3)
    rep = sm.causal_effect_irrelevant(s)
    assert rep.ce_entropy < math.log(4) - 1e-3
    assert max(rep.residuals().values()) <= 1e-10


def test_example_sem_errors():
    with pytest.raises(sm.SemError):
        sm.example_sem("uniform-pick", 4, vocab=3)
    with pytest.raises(sm.SemError):
        sm.example_sem("uniform-pick", 0)
    with pytest.raises(ValueError):
        sm.example_sem("middle-only", 3)


@given(st.tuples(*[st.integers(1, 4)] * 4), st.integers(0, 2**32 - 1),
       st.sampled_from([0.2, 1.0, 5.0]))
def test_report_invariants_on_random_sems(cards, seed, conc):
    s = sm.random_sem(cards, conc, seed)
    rep = sm.causal_effect_irrelevant(s)
    assert rep.ce_flow >= -1e-10 and rep.ce_entropy >= -1e-10
    assert max(rep.residuals().values()) <= 1e-10
    assert abs(rep.ce_entropy - sm.ce_conditional_mi(s)) <= 1e-10
    joint = sm.build_joint(s)
    # data processing along the chain
    assert mutual_information(joint, Y, (Q, XR)) >= mutual_information(joint, Y, (Q, X)) - 1e-10


def test_plug_in_ce_from_samples():
    s = sm.example_sem("uniform-pick", 4, vocab=10)
    idx = sm.sample_indices(s, 100_000, seed=0)
    counts = np.zeros(s.shape)
    np.add.at(counts, tuple(idx.T), 1)
    emp = JointDistribution(list(zip(sm.VARIABLES, s.shape)), counts / counts.sum())
    ce = conditional_entropy(emp, XR, (X, Q)) - conditional_entropy(emp, XR, (X, Q, Y))
    assert abs(ce / math.log(4) - 1) < 0.02


# --- random_sem ---

def test_random_sem_concentration_limit_and_seed():
    s = sm.random_sem((3, 4, 3, 4), concentration=1e6, seed=0)
    assert np.max(np.abs(s.extractor - 1 / 3)) < 0.01
    assert np.max(np.abs(s.generator - 1 / 4)) < 0.01
    assert sm.random_sem((2, 3, 2, 2), seed=7) == sm.random_sem((2, 3, 2, 2), seed=7)
    assert sm.random_sem((2, 3, 2, 2), seed=7) != sm.random_sem((2, 3, 2, 2), seed=8)
    with pytest.raises(sm.SemError):
        sm.random_sem((2, 2, 2))
    with pytest.raises(sm.SemError):
        sm.random_sem((2, 2, 2, 2), concentration=0)


# --- persistence ---

def test_save_load_lossless(tmp_path):
    s = sm.random_sem((2, 3, 4, 2), seed=11)
    sm.save_sem(s, tmp_path / "s.json")
    t = sm.load_sem(tmp_path / "s.json")
    assert t == s
    assert np.array_equal(t.generator, s.generator)


def test_shorthand_and_bad_files(tmp_path):
    s = sm.sem_from_dict({"kind": "uniform-pick", "n_sentences": 3, "vocab": 5, "seed": 2})
    assert s == sm.example_sem("uniform-pick", 3, 5, seed=2)
    with pytest.raises(sm.SemError):
        sm.sem_from_dict({"kind": "uniform-pick", "n_sentences": 3, "colour": 1})
    with pytest.raises(sm.SemError):
        sm.sem_from_dict({"format": "other/9"})
    d = sm.sem_to_dict(tiny_sem())
    d["q_prior"] = [0.3, 0.3]
    with pytest.raises(sm.SemError):
        sm.sem_from_dict(d)
