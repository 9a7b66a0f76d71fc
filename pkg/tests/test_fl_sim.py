import numpy as np
import pytest

from aircomp import (
    Allocation,
    ideal_aggregate,
    local_gradient,
    make_instance,
    make_task,
    mse_beta,
    ota_aggregate,
    philox_stream,
    solve_lower,
    train,
)


def noise_free_instance(K=4, n_per=30):
    # equal data, S_T = sum(D): weights are forced to 1/K and the gain can
    # offset every device exactly, so aggregation is distortion-free
    return make_instance(h=np.full(K, 1.0), b_max=1.0, c=1.0,
                         D=np.full(K, float(n_per)), S_T=float(K * n_per),
                         sigma2=1e-30)


def exact_offset_allocation(inst):
    a = 0.5
    sol = solve_lower(inst, a)
    assert sol.E == pytest.approx(a * a * inst.sigma2)
    S = inst.D.copy()
    return Allocation(a=a, b=sol.b, S=S, mse=sol.E)


def test_make_task_shapes_and_determinism():
    inst = noise_free_instance()
    t1 = make_task(inst, n_features=6, seed=1)
    t2 = make_task(inst, n_features=6, seed=1)
    assert len(t1.X) == inst.K
    assert t1.X[0].shape == (30, 6)
    np.testing.assert_array_equal(t1.X[2], t2.X[2])
    t3 = make_task(inst, n_features=6, seed=2)
    assert not np.array_equal(t1.X[0], t3.X[0])


def test_local_gradient_full_batch_matches_mean():
    inst = noise_free_instance()
    task = make_task(inst, n_features=5, seed=0)
    w = philox_stream(3).normal(size=5)
    g = local_gradient(task, 0, w, 30, philox_stream(4))
    manual = np.mean(
        [task.sample_grad(w, task.X[0][i], task.y[0][i]) for i in range(30)],
        axis=0,
    )
    np.testing.assert_allclose(g, manual, atol=1e-12)


def test_local_gradient_subset_and_degenerate():
    inst = noise_free_instance()
    task = make_task(inst, n_features=5, seed=0)
    w = np.zeros(5)
    g = local_gradient(task, 1, w, 10, philox_stream(5))
    assert g.shape == (5,)
    assert np.all(local_gradient(task, 1, w, 0, philox_stream(5)) == 0.0)


def test_ideal_aggregate_weights():
    grads = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    z = ideal_aggregate(grads, np.array([30.0, 10.0]))
    np.testing.assert_allclose(z, [0.75, 0.25])
    z2 = ideal_aggregate(grads, np.array([30.0, 0.0]))
    np.testing.assert_allclose(z2, [1.0, 0.0])


def test_ota_noiseless_equals_weighted_sum():
    inst = noise_free_instance()
    alloc = exact_offset_allocation(inst)
    grads = [philox_stream(k + 10).normal(size=3) for k in range(inst.K)]
    z_hat = ota_aggregate(grads, alloc, inst.h, 0.0, philox_stream(99))
    z = ideal_aggregate(grads, alloc.S)
    np.testing.assert_allclose(z_hat, z, atol=1e-12)


def test_train_noise_free_matches_centralized_descent():
    """With exact offsets, zero channel noise and full batches, the federated
    loop must follow centralized full-batch gradient descent coordinate for
    coordinate."""
    inst = noise_free_instance()
    task = make_task(inst, n_features=5, seed=7)
    alloc = exact_offset_allocation(inst)
    eta, T = 0.05, 40
    run = train(inst, "PROPOSED", task, T=T, eta=eta, seed=0, alloc=alloc)

    w = np.zeros(5)
    for _ in range(T):
        grads = [local_gradient(task, k, w, int(inst.D[k]), philox_stream(0))
                 for k in range(inst.K)]
        w = w - eta * ideal_aggregate(grads, inst.D)
    np.testing.assert_allclose(run.ws[-1], w, atol=1e-10)
    assert run.losses[-1] < run.losses[0]


def test_realized_error_matches_analytic_mse():
    """Fixed orthonormal gradients: the mean realized squared error equals
    the distortion part of the analytic MSE plus a^2 sigma^2 per noise
    coordinate."""
    K, dims = 4, 4
    inst = make_instance(h=np.full(K, 1.0), b_max=0.4, c=1.0,
                         D=np.full(K, 50.0), S_T=200.0, sigma2=0.5)
    a = 0.45
    sol = solve_lower(inst, a)
    grads = [np.eye(dims)[k] for k in range(K)]
    z = np.zeros(dims)
    for k in range(K):
        z += sol.beta[k] * grads[k]
    alloc = Allocation(a=a, b=sol.b, S=sol.beta * 200.0, mse=sol.E)
    rng = philox_stream(123)
    trials = 6000
    err = 0.0
    for _ in range(trials):
        z_hat = ota_aggregate(grads, alloc, inst.h, inst.sigma2, rng)
        err += float(((z_hat - z) ** 2).sum())
    err /= trials
    distortion = mse_beta(inst, a, sol.b, sol.beta) - a * a * inst.sigma2
    predicted = distortion + a * a * inst.sigma2 * dims
    assert err == pytest.approx(predicted, rel=0.05)


def test_train_records_consistent_history():
    inst = noise_free_instance(K=3, n_per=20)
    task = make_task(inst, n_features=4, seed=1)
    run = train(inst, "AIRFEDSGD", task, T=5, eta=0.05, seed=3)
    assert run.rounds == 5
    assert len(run.ws) == 6 and len(run.losses) == 6
    assert len(run.realized_sq_err) == 5
    assert all(e >= 0.0 for e in run.realized_sq_err)


def test_train_deterministic_given_seed():
    inst = noise_free_instance(K=3, n_per=20)
    task = make_task(inst, n_features=4, seed=1)
    r1 = train(inst, "COP", task, T=4, eta=0.05, seed=9)
    r2 = train(inst, "COP", task, T=4, eta=0.05, seed=9)
    np.testing.assert_array_equal(r1.ws[-1], r2.ws[-1])


def test_train_empirical_c_mode_runs():
    inst = noise_free_instance(K=3, n_per=20)
    task = make_task(inst, n_features=4, seed=2)
    run = train(inst, "PROPOSED", task, T=3, eta=0.05, seed=0,
                c_mode="empirical")
    assert run.rounds == 3
    with pytest.raises(ValueError):
        train(inst, "PROPOSED", task, T=1, eta=0.05, seed=0, c_mode="bogus")
