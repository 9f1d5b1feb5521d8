import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from skytrust.fl import (
    AggregationMode,
    DegenerateWeights,
    FeatureVector,
    FLRoundState,
    LocalDataset,
    ModelParams,
    RoundSkipped,
    TrainConfig,
    fedavg_aggregate,
    has_converged,
    logistic_gradient,
    logistic_loss,
    message_bytes,
    predict,
    predict_proba,
    run_fl_round,
    train_local,
    trust_weighted_aggregate,
)
from skytrust.trust import DomainError, EnergyState, TrustState


def dataset(rows, labels, owner=0):
    ds = LocalDataset(owner)
    for row, label in zip(rows, labels):
        ds.add(np.asarray(row, dtype=float), label)
    return ds


def scalar_model(c, bias=0.0):
    return ModelParams(np.array([c]), bias)


# --- training ------------------------------------------------------------------


def test_separable_two_samples_reach_perfect_training_accuracy():
    # brute force: w=(-1,1,0,0), b=0 separates these two points, so a
    # separating hyperplane exists; training must find one too
    rows = [[0.9, 0.1, 0.5, 0.5], [0.1, 0.9, 0.5, 0.5]]
    labels = [0, 1]
    sep = ModelParams(np.array([-1.0, 1.0, 0.0, 0.0]), 0.0)
    margins = np.asarray(rows) @ sep.coefficients
    assert (margins[1] > 0) and (margins[0] < 0)
    data = dataset(rows, labels)
    result = train_local(data, ModelParams.zeros(), TrainConfig(0.5, 100))
    probs = predict_proba(result.params, np.asarray(rows))
    assert ((probs > 0.5).astype(int) == np.array(labels)).all()


def test_zero_epochs_returns_init_exactly():
    init = ModelParams(np.array([1.0, -2.0, 3.0, 0.5]), 0.25)
    data = dataset([[0.1, 0.2, 0.3, 0.4]], [1])
    result = train_local(data, init, TrainConfig(0.5, 0))
    assert result.params is init or result.params.allclose(init)
    assert not result.skipped


def test_empty_dataset_skips_training():
    init = ModelParams.zeros()
    result = train_local(LocalDataset(0), init, TrainConfig(0.5, 10))
    assert result.skipped
    assert result.params is init


def test_loss_non_increasing_at_default_settings():
    rng = np.random.default_rng(5)
    rows = rng.random((40, 4))
    labels = (rng.random(40) < 0.3).astype(int)
    data = dataset(rows, labels)
    config = TrainConfig()
    params = ModelParams.zeros()
    losses = [logistic_loss(params, *data.as_arrays())]
    for _ in range(config.epochs):
        params = train_local(data, params, TrainConfig(config.learning_rate, 1)).params
        losses.append(logistic_loss(params, *data.as_arrays()))
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_gradient_matches_central_finite_differences():
    rng = np.random.default_rng(11)
    x = rng.random((25, 4))
    y = (rng.random(25) < 0.4).astype(float)
    params = ModelParams(rng.normal(0, 0.5, 4), 0.3)
    grad_w, grad_b = logistic_gradient(params, x, y)
    h = 1e-5
    for k in range(4):
        bump = np.zeros(4)
        bump[k] = h
        up = logistic_loss(ModelParams(params.coefficients + bump, params.bias), x, y)
        down = logistic_loss(ModelParams(params.coefficients - bump, params.bias), x, y)
        assert abs((up - down) / (2 * h) - grad_w[k]) < 1e-4
    up = logistic_loss(ModelParams(params.coefficients, params.bias + h), x, y)
    down = logistic_loss(ModelParams(params.coefficients, params.bias - h), x, y)
    assert abs((up - down) / (2 * h) - grad_b) < 1e-4


def test_class_balanced_training_moves_minority_boundary():
    rng = np.random.default_rng(3)
    rows = np.vstack([rng.uniform(0.7, 1.0, (95, 4)), rng.uniform(0.0, 0.3, (5, 4))])
    labels = [0] * 95 + [1] * 5
    data = dataset(rows, labels)
    plain = train_local(data, ModelParams.zeros(), TrainConfig(0.5, 40)).params
    balanced = train_local(
        data, ModelParams.zeros(), TrainConfig(0.5, 40, class_balance=True)
    ).params
    minority = np.array([0.15, 0.15, 0.15, 0.15])
    assert float(predict_proba(balanced, minority)[0]) > float(
        predict_proba(plain, minority)[0]
    )


# --- aggregation ------------------------------------------------------------------


def test_fedavg_equal_sizes_is_plain_mean():
    got = fedavg_aggregate([scalar_model(0.2), scalar_model(0.4)], [10, 10])
    assert got.coefficients[0] == pytest.approx(0.3, abs=1e-12)


def test_fedavg_single_client_identity():
    model = scalar_model(1.23, bias=-0.5)
    got = fedavg_aggregate([model], [17])
    assert got.allclose(model, tol=0.0)


def test_fedavg_weighted_mean():
    got = fedavg_aggregate([scalar_model(1.0), scalar_model(2.0)], [100, 300])
    assert got.coefficients[0] == pytest.approx(1.75, abs=1e-12)


def test_fedavg_rejects_zero_total_size():
    with pytest.raises(DegenerateWeights):
        fedavg_aggregate([scalar_model(1.0)], [0])


def test_trust_weighted_equal_trusts_reduces_to_fedavg():
    models = [scalar_model(0.3, 0.1), scalar_model(-1.2, 0.7), scalar_model(2.0, 0.0)]
    sizes = [5, 11, 31]
    plain = fedavg_aggregate(models, sizes)
    weighted = trust_weighted_aggregate(models, sizes, [0.7, 0.7, 0.7])
    assert weighted.allclose(plain, tol=1e-12)


def test_trust_weighted_zero_trust_excludes_client():
    got = trust_weighted_aggregate(
        [scalar_model(1.0, 0.5), scalar_model(9.0, 9.0)], [10, 10], [1.0, 0.0]
    )
    assert got.allclose(scalar_model(1.0, 0.5), tol=0.0)


def test_trust_weighted_hand_computed():
    # weights 0.9*100 and 0.3*200 over 150
    got = trust_weighted_aggregate(
        [scalar_model(1.0), scalar_model(4.0)], [100, 200], [0.9, 0.3]
    )
    assert got.coefficients[0] == pytest.approx(2.2, abs=1e-12)


def test_trust_weighted_rejects_degenerate():
    with pytest.raises(DegenerateWeights):
        trust_weighted_aggregate([scalar_model(1.0)], [10], [0.0])


vec = st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=2)


@given(
    st.lists(st.tuples(vec, st.floats(-3, 3, allow_nan=False)), min_size=1, max_size=8),
    st.data(),
)
def test_aggregate_componentwise_convexity(clients, data):
    models = [ModelParams(np.array(c), b) for c, b in clients]
    sizes = data.draw(st.lists(st.integers(1, 50), min_size=len(models), max_size=len(models)))
    got = fedavg_aggregate(models, sizes)
    for k in range(2):
        comps = [m.coefficients[k] for m in models]
        assert min(comps) - 1e-9 <= got.coefficients[k] <= max(comps) + 1e-9
    biases = [m.bias for m in models]
    assert min(biases) - 1e-9 <= got.bias <= max(biases) + 1e-9


@given(
    st.lists(
        st.tuples(vec, st.floats(-3, 3, allow_nan=False), st.integers(1, 40), st.floats(0.05, 1.0)),
        min_size=2,
        max_size=8,
    ),
    st.randoms(use_true_random=False),
)
def test_aggregate_permutation_invariance(clients, verylocal_random):
    models = [ModelParams(np.array(c), b) for c, b, _, _ in clients]
    sizes = [s for _, _, s, _ in clients]
    trusts = [t for _, _, _, t in clients]
    base_fa = fedavg_aggregate(models, sizes)
    base_tw = trust_weighted_aggregate(models, sizes, trusts)
    order = list(range(len(clients)))
    verylocal_random.shuffle(order)
    shuffled_fa = fedavg_aggregate([models[i] for i in order], [sizes[i] for i in order])
    shuffled_tw = trust_weighted_aggregate(
        [models[i] for i in order], [sizes[i] for i in order], [trusts[i] for i in order]
    )
    assert shuffled_fa.allclose(base_fa, tol=1e-12)
    assert shuffled_tw.allclose(base_tw, tol=1e-12)


@given(
    st.lists(
        st.tuples(vec, st.floats(-3, 3, allow_nan=False), st.integers(1, 40), st.floats(0.1, 1.0)),
        min_size=1,
        max_size=8,
    ),
    st.floats(0.1, 0.999),
)
def test_trust_scale_invariance(clients, scale):
    models = [ModelParams(np.array(c), b) for c, b, _, _ in clients]
    sizes = [s for _, _, s, _ in clients]
    trusts = [t for _, _, _, t in clients]
    base = trust_weighted_aggregate(models, sizes, trusts)
    scaled = trust_weighted_aggregate(models, sizes, [t * scale for t in trusts])
    assert scaled.allclose(base, tol=1e-12)


# --- prediction ----------------------------------------------------------------------


def test_predict_zero_params_is_half():
    fv = FeatureVector(0.3, 0.9, 0.1, 0.7)
    assert predict(ModelParams.zeros(), fv) == 0.5


def test_predict_saturates_with_huge_bias():
    fv = FeatureVector(0.0, 0.0, 0.0, 0.0)
    assert predict(ModelParams(np.zeros(4), 100.0), fv) >= 0.999


def test_predict_matches_sigmoid_table():
    fv = FeatureVector(0.5, 0.0, 0.0, 0.0)
    got = predict(ModelParams(np.array([1.0, 0.0, 0.0, 0.0]), 0.0), fv)
    assert got == pytest.approx(1.0 / (1.0 + math.exp(-0.5)), abs=1e-12)
    assert round(got, 4) == 0.6225


def test_feature_vector_validates_unit_range():
    with pytest.raises(DomainError):
        FeatureVector(1.2, 0.0, 0.0, 0.0)


# --- convergence -----------------------------------------------------------------------


def test_converged_small_change():
    assert has_converged(FLRoundState(accuracy_history=[0.80, 0.805], epsilon=0.01))


def test_not_converged_large_change():
    assert not has_converged(FLRoundState(accuracy_history=[0.5, 0.6], epsilon=0.01))


def test_boundary_change_is_not_convergence():
    assert not has_converged(FLRoundState(accuracy_history=[0.90, 0.91], epsilon=0.01))


def test_single_entry_never_converged():
    assert not has_converged(FLRoundState(accuracy_history=[0.9]))


@given(
    st.lists(st.floats(0, 1, allow_nan=False), min_size=2, max_size=10),
    st.floats(1e-6, 0.5),
    st.floats(1e-6, 0.5),
)
def test_convergence_monotone_in_epsilon(history, eps_a, eps_b):
    lo, hi = min(eps_a, eps_b), max(eps_a, eps_b)
    if has_converged(FLRoundState(accuracy_history=history, epsilon=lo)):
        assert has_converged(FLRoundState(accuracy_history=history, epsilon=hi))


# --- serialization ----------------------------------------------------------------------


def test_params_serialize_little_endian_round_trip():
    params = ModelParams(np.array([1.5, -2.25, 0.0, 3.0]), -0.5)
    raw = params.to_bytes()
    assert len(raw) == 5 * 8
    assert raw[:8] == np.float64(1.5).astype("<f8").tobytes()
    again = ModelParams.from_bytes(raw)
    assert again.allclose(params, tol=0.0)
    assert again.digest() == params.digest()


# --- federated rounds ----------------------------------------------------------------------


def participant(owner, rows, labels, trust=0.8, energy=(50.0, 100.0)):
    return (
        dataset(rows, labels, owner),
        TrustState(uav=owner, score=trust),
        EnergyState(*energy),
    )


def test_single_participant_round_returns_its_trained_params():
    part = participant(0, [[0.9, 0.1, 0.5, 0.5], [0.1, 0.9, 0.5, 0.5]], [0, 1])
    config = TrainConfig(0.5, 20)
    expected = train_local(part[0], ModelParams.zeros(), config).params
    result = run_fl_round([part], ModelParams.zeros(), AggregationMode.FEDAVG, config)
    assert result.params.allclose(expected, tol=0.0)
    assert result.trained == 1


def test_equal_trusts_match_fedavg_round():
    parts = [
        participant(0, [[0.9, 0.1, 0.5, 0.5]], [0], trust=0.6),
        participant(1, [[0.1, 0.9, 0.5, 0.5]], [1], trust=0.6),
    ]
    config = TrainConfig(0.5, 5)
    fa = run_fl_round(parts, ModelParams.zeros(), AggregationMode.FEDAVG, config)
    tw = run_fl_round(parts, ModelParams.zeros(), AggregationMode.TRUST_WEIGHTED, config)
    assert tw.params.allclose(fa.params, tol=1e-12)


def test_round_message_bytes_default_accounting():
    # 5 parameter floats at 8 bytes plus the 256 byte envelope
    assert message_bytes(ModelParams.zeros(4)) == 296
    part = participant(0, [[0.5, 0.5, 0.5, 0.5]], [1])
    result = run_fl_round([part], ModelParams.zeros(), AggregationMode.FEDAVG)
    assert result.bytes_per_uav == {0: 296}


def test_depleted_participants_sit_out():
    alive = participant(0, [[0.9, 0.1, 0.5, 0.5]], [0])
    dead = participant(1, [[0.1, 0.9, 0.5, 0.5]], [1], energy=(0.0, 100.0))
    result = run_fl_round([alive, dead], ModelParams.zeros(), AggregationMode.FEDAVG)
    assert set(result.bytes_per_uav) == {0}


def test_all_depleted_raises_round_skipped():
    dead = participant(0, [[0.5, 0.5, 0.5, 0.5]], [0], energy=(0.0, 100.0))
    with pytest.raises(RoundSkipped):
        run_fl_round([dead], ModelParams.zeros(), AggregationMode.FEDAVG)


def test_poisoned_submission_is_negated():
    part = participant(0, [[0.9, 0.1, 0.5, 0.5], [0.1, 0.9, 0.5, 0.5]], [0, 1])
    config = TrainConfig(0.5, 10)
    honest = train_local(part[0], ModelParams.zeros(), config).params
    result = run_fl_round(
        [part], ModelParams.zeros(), AggregationMode.FEDAVG, config, poisoned=[True]
    )
    assert result.params.allclose(honest.negated(), tol=0.0)
