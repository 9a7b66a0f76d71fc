import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aircomp import (
    DegenerateWeightsError,
    DeviceParams,
    ProblemInstance,
    S_from_beta,
    beta_from_S,
    check_weights,
    eliminate_b,
    floor_with_repair,
    make_instance,
    mse,
    mse_beta,
    validate_instance,
)

from conftest import random_instance


def test_device_params_rejects_nonpositive():
    with pytest.raises(ValueError):
        DeviceParams(h=0.0, b_max=1.0, c=1.0, D=10.0)
    with pytest.raises(ValueError):
        DeviceParams(h=1.0, b_max=-1.0, c=1.0, D=10.0)


def test_instance_json_round_trip():
    inst = make_instance(h=[1.0, 2.0], b_max=[0.5, 3.0], c=[1.0, 2.0],
                         D=[100.0, 200.0], S_T=150.0, sigma2=0.7)
    again = ProblemInstance.from_json(inst.to_json())
    assert again.devices == inst.devices
    assert again.S_T == inst.S_T and again.sigma2 == inst.sigma2
    # plain JSON, loadable independently
    data = json.loads(inst.to_json())
    assert set(data) == {"devices", "S_T", "sigma2"}
    assert set(data["devices"][0]) == {"h", "b_max", "c", "D"}


def test_validate_instance_messages():
    good = make_instance(h=[1.0], b_max=1.0, c=1.0, D=10.0, S_T=5.0)
    assert validate_instance(good) is None
    bad = make_instance(h=[1.0], b_max=1.0, c=1.0, D=10.0, S_T=20.0)
    assert validate_instance(bad) == "S_T exceeds sum of D"
    nosig = make_instance(h=[1.0], b_max=1.0, c=1.0, D=10.0, S_T=5.0, sigma2=1.0)
    nosig.sigma2 = 0.0
    assert "sigma2" in validate_instance(nosig)


def test_beta_max_is_D_over_ST():
    inst = make_instance(h=[1.0, 1.0], b_max=1.0, c=1.0, D=[80.0, 80.0], S_T=100.0)
    np.testing.assert_allclose(inst.beta_max, [0.8, 0.8])


def test_weight_map_round_trip(rng):
    for _ in range(50):
        inst = random_instance(rng)
        S = rng.uniform(0.0, 1.0, size=inst.K) * inst.D
        S[int(rng.integers(inst.K))] = inst.D[int(rng.integers(inst.K))]
        if S.sum() <= 0:
            continue
        beta = beta_from_S(S)
        assert abs(beta.sum() - 1.0) < 1e-12
        S2 = S_from_beta(beta, inst)
        assert np.all(S2 <= inst.D + 1e-9)
        np.testing.assert_allclose(beta_from_S(S2), beta, atol=1e-12)
        # for weights inside the caps the preimage also meets the threshold
        if np.all(beta <= inst.beta_max + 1e-12):
            assert S2.sum() >= inst.S_T - 1e-6


def test_S_from_beta_saturates_largest_ratio():
    inst = make_instance(h=[1.0, 1.0], b_max=1.0, c=1.0, D=[100.0, 300.0], S_T=200.0)
    beta = np.array([0.5, 0.5])
    S = S_from_beta(beta, inst)
    # Xi = max beta_k / D_k = 0.5/100; the tighter device hits its box
    np.testing.assert_allclose(S, [100.0, 100.0])


def test_degenerate_weights_raise():
    inst = make_instance(h=[1.0], b_max=1.0, c=1.0, D=10.0, S_T=5.0)
    with pytest.raises(DegenerateWeightsError):
        beta_from_S(np.zeros(1))
    with pytest.raises(DegenerateWeightsError):
        S_from_beta(np.zeros(1), inst)
    with pytest.raises(DegenerateWeightsError):
        mse(inst, 1.0, np.ones(1), np.zeros(1))


def test_floor_with_repair_meets_threshold(rng):
    for _ in range(100):
        inst = random_instance(rng)
        inst_int = make_instance(h=inst.h, b_max=inst.b_max, c=inst.c,
                                 D=np.ceil(inst.D),
                                 S_T=float(int(inst.S_T)), sigma2=inst.sigma2)
        S = rng.uniform(0.0, 1.0, size=inst_int.K) * inst_int.D
        S *= inst_int.S_T / max(S.sum(), 1e-9)
        S = np.minimum(S, inst_int.D)
        if S.sum() < inst_int.S_T:
            continue
        out = floor_with_repair(S, inst_int)
        assert np.all(out == np.floor(out))
        assert out.sum() >= inst_int.S_T - 1e-9
        assert np.all(out <= inst_int.D + 1e-9)


def test_floor_with_repair_unrepairable():
    inst = make_instance(h=[1.0], b_max=1.0, c=1.0, D=10.0, S_T=10.0)
    with pytest.raises(ValueError):
        # requesting repair from sizes that cannot reach S_T within the box
        floor_with_repair(np.array([20.5]), make_instance(
            h=[1.0], b_max=1.0, c=1.0, D=10.0, S_T=30.0))
    del inst


def test_mse_matches_mse_beta_when_all_active():
    inst = make_instance(h=[1.0, 2.0], b_max=1.0, c=[1.0, 3.0],
                         D=[50.0, 50.0], S_T=80.0)
    b = np.array([0.3, 0.4])
    S = np.array([40.0, 60.0])
    assert mse(inst, 0.7, b, S) == pytest.approx(
        mse_beta(inst, 0.7, b, S / S.sum()), abs=1e-15)


def test_mse_indicator_drops_inactive_devices():
    inst = make_instance(h=[1.0, 1.0], b_max=1.0, c=1.0, D=[50.0, 50.0], S_T=40.0)
    # device 1 holds no data; its distortion term must not count
    b = np.array([1.0, 0.9])
    S = np.array([40.0, 0.0])
    expected = (0.5 * 1.0 * 1.0 - 1.0) ** 2 + 0.25 * inst.sigma2
    assert mse(inst, 0.5, b, S) == pytest.approx(expected, abs=1e-15)


def test_eliminate_b_is_componentwise_optimal(rng):
    for _ in range(25):
        inst = random_instance(rng)
        a = float(rng.uniform(0.05, 2.0))
        beta = rng.dirichlet(np.ones(inst.K))
        b = eliminate_b(inst, a, beta)
        assert np.all(b <= inst.b_max + 1e-12) and np.all(b >= 0.0)
        base = mse_beta(inst, a, b, beta)
        for _ in range(10):
            other = np.clip(b + rng.normal(scale=0.05, size=inst.K), 0.0, inst.b_max)
            assert mse_beta(inst, a, other, beta) >= base - 1e-12


@given(st.lists(st.floats(1.0, 1e4), min_size=1, max_size=8),
       st.floats(0.05, 0.95))
@settings(max_examples=60, deadline=None)
def test_check_weights_accepts_canonical_preimage(D, frac):
    D = np.asarray(D)
    inst = make_instance(h=np.ones(len(D)), b_max=1.0, c=1.0, D=D,
                         S_T=max(frac * float(D.sum()), 1e-6))
    beta = np.minimum(inst.beta_max, 1.0 / len(D))
    if beta.sum() < 1.0:
        short = 1.0 - beta.sum()
        room = inst.beta_max - beta
        if room.sum() <= short:
            return
        beta = beta + short * room / room.sum()
    else:
        beta = beta / beta.sum()
    assert check_weights(inst, beta)
    assert not check_weights(inst, beta * 0.5)
