import numpy as np
import pytest
from numpy.testing import assert_allclose

from ctxal.context import (
    BinningScheme,
    BinRangeWarning,
    GaussianParam,
    gaussian_density,
    new_context_model,
)
from ctxal.graph import ActivityInstance, ContextObservation
from ctxal.mlr import MlrModel, classify
from ctxal.potentials import (
    EPS,
    activity_activity_potential,
    activity_context_potential,
    activity_node_potential,
    concat_context_potentials,
    concat_context_tables,
    context_node_potential,
)

STANDARD_NORMAL_AT_ZERO = 0.3989422804014327


def make_instance(node_id, t, pos, obs=()):
    return ActivityInstance(id=node_id, features=np.array([1.0, -0.5]),
                            spatial_pos=np.asarray(pos, dtype=float),
                            temporal_pos=float(t), context_obs=tuple(obs))


class TestNodePotentials:
    def test_activity_node_is_classifier_posterior(self):
        rng = np.random.default_rng(0)
        model = MlrModel(theta=rng.normal(size=(3, 2)))
        inst = make_instance("a", 0.0, (0, 0))
        assert_allclose(activity_node_potential(inst, model),
                        classify(model, inst.features))

    def test_pmf_observation_passes_through_as_copy(self):
        context = new_context_model(3, pmf_kinds={"object": 3})
        pmf = np.array([0.2, 0.3, 0.5])
        obs = ContextObservation(kind="object", prior_pmf=pmf,
                                 spatial_pos=np.zeros(2))
        out = context_node_potential(obs, context)
        assert_allclose(out, pmf)
        out[0] = 99.0
        assert obs.prior_pmf[0] == 0.2

    def test_scalar_observation_one_hot_bin_with_density(self):
        scheme = BinningScheme.from_range(0.0, 8.0, bins=4)
        context = new_context_model(2, scalar_kinds={"person": scheme})
        # empty stats: mean 0, variance 1 so density at 0 is the
        # standard normal peak
        obs = ContextObservation(kind="person", scalar_value=0.0)
        out = context_node_potential(obs, context)
        assert out.shape == (4,)
        assert_allclose(out[0], STANDARD_NORMAL_AT_ZERO, atol=1e-15)
        assert_allclose(out[1:], 0.0)

    def test_scalar_out_of_range_warns_and_clips(self):
        scheme = BinningScheme.from_range(0.0, 8.0, bins=4)
        context = new_context_model(2, scalar_kinds={"person": scheme})
        obs = ContextObservation(kind="person", scalar_value=11.0)
        with pytest.warns(BinRangeWarning):
            out = context_node_potential(obs, context)
        assert np.flatnonzero(out).tolist() == [3]

    def test_concat_potentials_order_and_length(self):
        a = np.array([1.0, 2.0])
        b = np.array([3.0])
        assert_allclose(concat_context_potentials([a, b]), [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            concat_context_potentials([])


class TestPairPotentials:
    def test_activity_activity_formula(self):
        context = new_context_model(2)
        context.cooccur_activity.counts[:] = np.array([[4.0, 1.0], [1.0, 2.0]])
        context.temporal_gap.update_many([0.0, 2.0, 4.0])
        context.spatial_gap.update_many([1.0, 3.0])
        a = make_instance("a", 0.0, (0.0, 0.0))
        b = make_instance("b", 1.5, (1.0, 1.0))
        dt2 = 1.5 ** 2
        ds2 = 2.0
        g_t = gaussian_density(dt2, context.temporal_gap.param())
        g_s = gaussian_density(ds2, context.spatial_gap.param())
        expected = np.array([[4.0, 1.0], [1.0, 2.0]]) * g_t * g_s
        assert_allclose(activity_activity_potential(a, b, context), expected,
                        rtol=1e-13)

    def test_tiny_densities_clamp_to_floor(self):
        context = new_context_model(2)
        context.temporal_gap.update_many([0.0, 0.001, 0.002])
        context.spatial_gap.update_many([0.0, 0.001])
        a = make_instance("a", 0.0, (0.0, 0.0))
        b = make_instance("b", 1e6, (0.0, 0.0))
        table = activity_activity_potential(a, b, context)
        assert np.all(table >= EPS)
        assert np.all(table > 0)

    def test_activity_context_pmf_kind(self):
        context = new_context_model(2, pmf_kinds={"object": 3})
        context.cooccur["object"].counts[:] = np.array([[5.0, 1.0, 1.0],
                                                        [1.0, 1.0, 3.0]])
        context.context_offset["object"].update_many([0.5, 1.5, 2.5])
        inst = make_instance("a", 0.0, (0.0, 0.0))
        obs = ContextObservation(kind="object",
                                 prior_pmf=np.array([0.6, 0.2, 0.2]),
                                 spatial_pos=np.array([1.0, 2.0]))
        g = gaussian_density(5.0, context.context_offset["object"].param())
        expected = context.cooccur["object"].counts * g
        assert_allclose(activity_context_potential(inst, obs, context),
                        np.maximum(expected, EPS), rtol=1e-13)

    def test_activity_context_scalar_kind(self):
        scheme = BinningScheme.from_range(0.0, 10.0, bins=5)
        context = new_context_model(3, scalar_kinds={"person": scheme})
        context.class_value_stats["person"][0].update_many([2.0, 2.0, 2.1])
        context.class_value_stats["person"][1].update_many([7.0, 7.5, 8.0])
        inst = make_instance("a", 0.0, (0.0, 0.0))
        obs = ContextObservation(kind="person", scalar_value=2.05)
        table = activity_context_potential(inst, obs, context)
        assert table.shape == (3, 5)
        active = 1  # 2.05 falls in [2, 4)
        for cls in range(3):
            expected = gaussian_density(
                2.05, context.class_value_stats["person"][cls].param())
            assert_allclose(table[cls, active], max(expected, EPS), rtol=1e-13)
        inactive = np.delete(table, active, axis=1)
        assert_allclose(inactive, EPS)
        # the class whose history matches the value dominates the column
        assert table[0, active] > table[1, active]
        assert table[0, active] > table[2, active]

    def test_concat_tables_shares_class_axis(self):
        a = np.ones((3, 2))
        b = np.full((3, 4), 2.0)
        out = concat_context_tables([a, b])
        assert out.shape == (3, 6)
        assert_allclose(out[:, :2], 1.0)
        assert_allclose(out[:, 2:], 2.0)
        with pytest.raises(ValueError):
            concat_context_tables([np.ones((3, 2)), np.ones((2, 2))])
