# tests/test_refbnn.py
from fractions import Fraction
from pathlib import Path

import pytest

from blueprints.compose import NetworkSpec
from bnn.bitfloat import Fp32Bits, update_weight
from bnn.metrics import read_metrics_json, write_metrics_csv, write_metrics_json
from bnn.refbnn import (
    BnnState,
    Mode,
    binarize,
    forward,
    initial_weights,
    loss,
    loss_rate_series,
    misclassification_series,
    step,
    ste,
    train,
)

HALF = Fp32Bits.from_float(0.5)


def test_binarize_maps_both_zeros_to_plus_one():
    assert binarize(Fp32Bits.from_float(0.0)) == 1
    assert binarize(Fp32Bits.from_float(-0.0)) == 1
    assert binarize(Fp32Bits.from_float(-0.25)) == -1


def test_ste_window_includes_one():
    assert ste(Fp32Bits.from_float(1.0)) == 1
    assert ste(Fp32Bits.from_float(-1.0)) == 1
    assert ste(Fp32Bits.from_float(1.5)) == 0


@pytest.mark.parametrize("y,z,expected", [(1, 2, (0, 0)), (1, 0, (1, -1)), (-1, 2, (3, 1)), (-1, -2, (0, 0))])
def test_hinge_loss_and_derivative(y, z, expected):
    assert loss(y, z) == expected


def test_loss_rejects_bad_label():
    with pytest.raises(ValueError):
        loss(0, 1)


def test_hand_computed_step():
    state = BnnState(2, 2, (HALF,) * 6, Fraction(1, 10))
    fp = forward(state, (1, 1))
    assert fp.pre_activations == (2, 2)
    assert fp.output_sum == 2 and fp.prediction == 1

    new_state, m = step(state, (1, 1), -1)
    assert (m.loss, m.dldz) == (3, 1)
    assert m.binary_grads == (1,) * 6
    assert m.j_products == (Fraction(1, 10),) * 6
    expected = update_weight(HALF, Fraction(1, 10)).result
    assert new_state.real_weights == (expected,) * 6
    assert m.updated_bits == (expected.to_int(),) * 6


def test_state_checks_weight_count():
    with pytest.raises(ValueError):
        BnnState(2, 2, (HALF,), Fraction(1, 10))


def test_initial_weights_are_seeded(xor_spec):
    assert initial_weights(xor_spec) == initial_weights(xor_spec)
    other = NetworkSpec(seed=xor_spec.seed + 1)
    assert initial_weights(other) != initial_weights(xor_spec)
    assert all(abs(w.to_float()) < 1 for w in initial_weights(xor_spec))


def test_train_runs_cyclic_epochs(xor_spec):
    run = train(xor_spec, 3)
    assert len(run.metrics) == 12
    assert [m.epoch for m in run.metrics[::4]] == [1, 2, 3]
    assert len(run.loss_rate) == 12
    assert all(0 <= v <= 1 for v in run.loss_rate)


def test_train_rejects_foreign_learning_rate(xor_spec):
    with pytest.raises(ValueError):
        train(xor_spec, 1, learning_rate=Fraction(1, 3))


def test_native_mode_tracks_exact_mode(xor_spec):
    exact = train(xor_spec, 2)
    native = train(xor_spec, 2, Mode.NATIVE_FLOAT)
    assert exact.metrics[0].binary_weights == native.metrics[0].binary_weights


def test_series_are_cumulative_means(xor_spec):
    metrics = train(xor_spec, 1).metrics
    rates = loss_rate_series(metrics)
    assert rates[-1] == pytest.approx(sum(m.loss for m in metrics) / (3 * len(metrics)))
    wrong = misclassification_series(metrics)
    assert wrong[-1] == pytest.approx(sum(m.prediction != m.y_true for m in metrics) / len(metrics))
    assert loss_rate_series([]) == []


def test_metrics_files(tmp_path, xor_spec):
    metrics = train(xor_spec, 1).metrics
    csv_path = write_metrics_csv(metrics, tmp_path / "metrics.csv")
    json_path = write_metrics_json(metrics, tmp_path / "metrics.json")
    assert csv_path.read_text().splitlines()[0].startswith("epoch,vector_index")
    assert read_metrics_json(json_path) == metrics


def test_hand_step_csv_matches_golden(tmp_path):
    state = BnnState(2, 2, (HALF,) * 6, Fraction(1, 10))
    _, m = step(state, (1, 1), -1)
    written = write_metrics_csv([m], tmp_path / "step.csv").read_text().splitlines()
    golden = (Path(__file__).parent / "golden" / "hand_step_metrics.csv").read_text().splitlines()
    assert written == golden
