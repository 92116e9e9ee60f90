import numpy as np
import pytest

from abdetect.dataset import LabeledSet, Normalizer, apply_normalizer, encode_targets
from abdetect.errors import TrainingError
from abdetect.framing import Label
from abdetect.metrics import confusion_counts, fm_index
from abdetect.numerics import AdmmConfig, regularized_least_squares, relu
from abdetect.pln import (
    PlnConfig,
    PlnModel,
    grow_layer,
    init_base_layer,
    labels_from_scores,
    pln_predict,
    train_pln,
)


def make_set(X, labels):
    return LabeledSet(
        np.asarray(X, dtype=float), encode_targets(labels), tuple(("p", i) for i in range(len(labels)))
    )


def cluster_set(rng, n_per=100, sep=3.0, noise=0.3, dim=2):
    X1 = noise * rng.standard_normal((dim, n_per)) + sep
    X2 = noise * rng.standard_normal((dim, n_per)) - sep
    labels = [Label.EVENT] * n_per + [Label.NON_EVENT] * n_per
    return make_set(np.hstack([X1, X2]), labels)


def xor_set(rng, n_per=150, noise=0.4):
    blocks, labels = [], []
    for (cx, cy), lab in [
        ((2, 2), Label.EVENT),
        ((-2, -2), Label.EVENT),
        ((2, -2), Label.NON_EVENT),
        ((-2, 2), Label.NON_EVENT),
    ]:
        blocks.append(noise * rng.standard_normal((2, n_per)) + np.array([[cx], [cy]]))
        labels += [lab] * n_per
    return make_set(np.hstack(blocks), labels)


def random_set(rng, dim=10, n=500):
    X = rng.standard_normal((dim, n))
    labels = [Label.EVENT if b else Label.NON_EVENT for b in rng.random(n) < 0.3]
    if not any(l is Label.EVENT for l in labels):
        labels[0] = Label.EVENT
    if not any(l is Label.NON_EVENT for l in labels):
        labels[1] = Label.NON_EVENT
    return make_set(X, labels)


class TestProgressionIdentity:
    def test_relu_pair_carries_any_vector_exactly(self):
        rng = np.random.default_rng(0)
        I = np.eye(2)
        V = np.vstack([I, -I])
        W = np.hstack([I, -I])
        for _ in range(1000):
            t = rng.standard_normal((2, 1)) * rng.uniform(0.01, 100)
            err = np.abs(W @ relu(V @ t) - t).max()
            assert err <= 1e-12


class TestInitBaseLayer:
    def test_separable_clusters_perfect_without_layers(self):
        ds = cluster_set(np.random.default_rng(1))
        model, cost0 = init_base_layer(ds, PlnConfig(seed=0))
        assert model.depth == 0
        _, pred = pln_predict(model, ds.X)
        assert fm_index(confusion_counts(ds.labels, pred)) == 1.0
        assert cost0 == model.costs[0] > 0

    def test_base_map_is_the_ridge_solution_on_normalized_features(self):
        ds = random_set(np.random.default_rng(2), dim=6, n=80)
        cfg = PlnConfig(seed=0, lam=0.7)
        model, _ = init_base_layer(ds, cfg)
        Xn = apply_normalizer(model.normalizer, ds.X)
        np.testing.assert_allclose(
            model.base_map, regularized_least_squares(ds.T, Xn, 0.7), atol=1e-12
        )

    def test_config_echo_keeps_solver_weights(self):
        model, _ = init_base_layer(cluster_set(np.random.default_rng(3)), PlnConfig())
        assert model.config.lam == 0.1
        assert model.config.mu == 1e4


class TestGrowLayer:
    def test_reproduction_candidate_when_nothing_can_improve(self):
        # with recorded cost 0 no fit can win, so the safeguard must carry
        # the previous predictions through the new layer bit for bit
        rng = np.random.default_rng(4)
        ds = random_set(rng, dim=3, n=60)
        ident = Normalizer(np.zeros(3), np.ones(3))
        base = rng.standard_normal((2, 3))
        model = PlnModel(ident, base, [], PlnConfig(seed=1, delta_nodes=8, n_max=12, l_max=2), costs=[0.0])
        before = base @ ds.X
        grown, accepted, _ = grow_layer(model, ds, ds, model.config)
        assert grown.depth == 1
        assert not accepted
        O = grown.layers[0].O
        np.testing.assert_array_equal(O[:, :2], np.eye(2))
        np.testing.assert_array_equal(O[:, 2:4], -np.eye(2))
        np.testing.assert_array_equal(O[:, 4:], 0.0)
        after, _ = pln_predict(grown, ds.X)
        np.testing.assert_array_equal(after, before)
        assert grown.costs == [0.0, 0.0]

    def test_xor_needs_and_gets_a_layer(self):
        rng = np.random.default_rng(5)
        ds = xor_set(rng)
        cfg = PlnConfig(seed=3, delta_nodes=20, n_max=204, l_max=4)
        model = train_pln(ds, cfg)
        base_only = train_pln(ds, PlnConfig(seed=3, l_max=0))
        _, pred_base = pln_predict(base_only, ds.X)
        base_fm = fm_index(confusion_counts(ds.labels, pred_base))
        assert base_fm < 0.75  # a linear map cannot solve the diagonal classes
        assert model.depth >= 1
        _, pred = pln_predict(model, ds.X)
        assert fm_index(confusion_counts(ds.labels, pred)) > 0.9

    def test_costs_never_increase(self):
        for seed in range(6):
            rng = np.random.default_rng(seed)
            ds = random_set(rng, dim=10, n=300)
            cfg = PlnConfig(
                seed=seed,
                delta_nodes=12,
                n_max=40,
                l_max=3,
                eta_node=-1.0,  # force full width growth
                eta_layer=-1.0,  # force every layer to be kept
                alpha=1.0,
                admm=AdmmConfig(mu=10.0, max_iters=50),
            )
            model = train_pln(ds, cfg)
            assert model.depth == 3
            diffs = np.diff(model.costs)
            assert (diffs <= 1e-9).all(), model.costs

    def test_feasibility_of_stored_output_matrices(self):
        rng = np.random.default_rng(7)
        ds = xor_set(rng, n_per=80)
        cfg = PlnConfig(seed=2, delta_nodes=16, n_max=52, l_max=3, eta_layer=-1.0)
        model = train_pln(ds, cfg)
        for layer in model.layers:
            assert np.linalg.norm(layer.O) <= cfg.ball_radius + 1e-9


class TestTrainPln:
    def test_lmax_zero_is_pure_ridge(self):
        ds = cluster_set(np.random.default_rng(8))
        model = train_pln(ds, PlnConfig(seed=0, l_max=0))
        assert model.depth == 0

    def test_deterministic_per_seed(self):
        ds = xor_set(np.random.default_rng(9), n_per=60)
        cfg = PlnConfig(seed=11, delta_nodes=10, n_max=34, l_max=2)
        a = train_pln(ds, cfg)
        b = train_pln(ds, cfg)
        np.testing.assert_array_equal(a.base_map, b.base_map)
        assert a.depth == b.depth
        for la, lb in zip(a.layers, b.layers):
            np.testing.assert_array_equal(la.R, lb.R)
            np.testing.assert_array_equal(la.O, lb.O)
        assert a.costs == b.costs and a.val_scores == b.val_scores

    def test_growth_stops_when_no_improvement_possible(self):
        # an easy linear problem is solved by the base map; no layer survives
        ds = cluster_set(np.random.default_rng(10), sep=5.0, noise=0.2)
        model = train_pln(ds, PlnConfig(seed=4, delta_nodes=10, n_max=24, l_max=5))
        assert model.depth == 0
        assert model.val_scores[0] == 1.0

    def test_single_class_rejected(self):
        X = np.random.default_rng(11).standard_normal((3, 20))
        ds = make_set(X, [Label.NON_EVENT] * 20)
        with pytest.raises(TrainingError, match="both classes"):
            train_pln(ds, PlnConfig())

    def test_val_scores_tracked_per_depth(self):
        ds = xor_set(np.random.default_rng(12), n_per=60)
        model = train_pln(ds, PlnConfig(seed=5, delta_nodes=16, n_max=52, l_max=3))
        assert len(model.val_scores) == model.depth + 1
        assert len(model.costs) == model.depth + 1


class TestPredict:
    def make_linear_model(self, base):
        norm = Normalizer(np.zeros(base.shape[1]), np.ones(base.shape[1]))
        return PlnModel(norm, np.asarray(base, dtype=float), [], PlnConfig(), costs=[1.0])

    def test_tie_goes_to_event(self):
        assert labels_from_scores(np.array([[0.5], [0.5]])) == [Label.EVENT]

    def test_argmax_decoding(self):
        scores = np.array([[0.9, 0.1], [0.1, 0.9]])
        assert labels_from_scores(scores) == [Label.EVENT, Label.NON_EVENT]

    def test_zero_layer_predictions_are_the_base_map(self):
        rng = np.random.default_rng(13)
        base = rng.standard_normal((2, 4))
        model = self.make_linear_model(base)
        X = rng.standard_normal((4, 9))
        t_hat, _ = pln_predict(model, X)
        np.testing.assert_allclose(t_hat, base @ X, atol=1e-14)

    def test_dimension_mismatch(self):
        model = self.make_linear_model(np.zeros((2, 4)))
        with pytest.raises(ValueError, match="dimension"):
            pln_predict(model, np.zeros((5, 3)))


class TestConfigValidation:
    def test_bounds(self):
        with pytest.raises(ValueError):
            PlnConfig(alpha=0.5)
        with pytest.raises(ValueError):
            PlnConfig(n_max=10, delta_nodes=50)
        with pytest.raises(ValueError):
            PlnConfig(val_fraction=1.0)
        with pytest.raises(ValueError):
            PlnConfig(lam=-0.1)

    def test_effective_admm_uses_mu(self):
        assert PlnConfig(mu=123.0).effective_admm.mu == 123.0
        explicit = AdmmConfig(mu=9.0)
        assert PlnConfig(mu=123.0, admm=explicit).effective_admm.mu == 9.0

    def test_ball_radius(self):
        assert PlnConfig(alpha=2.0).ball_radius == pytest.approx(2.0 * 2.0)
