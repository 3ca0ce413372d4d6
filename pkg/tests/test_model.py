import numpy as np
import pytest

import h2tf
from h2tf import model as md
from h2tf import tensor as tc
from tests.test_tensor import tproduct_construction  # noqa: F401  (shared helper)


def small_cfg(seed=0, **kw):
    kw.setdefault("shape", (5, 4, 3))
    kw.setdefault("hmf_layers", 3)
    kw.setdefault("hnt_layers", 1)
    kw.setdefault("ranks", (4, 2, 3, 5))
    return md.ModelConfig(seed=seed, **kw)


class TestActivation:
    def test_values(self):
        assert md.activation(2.0) == 2.0
        assert md.activation(-2.0) == pytest.approx(-0.2)

    def test_derivative_values(self):
        assert md.activation_derivative(-1.0) == 0.1
        assert md.activation_derivative(3.0) == 1.0
        assert md.activation_derivative(0.0) == 1.0

    def test_derivative_matches_central_differences(self):
        rng = np.random.default_rng(0)
        xs = rng.normal(size=100)
        xs = xs[np.abs(xs) > 1e-3]
        h = 1e-7
        fd = (md.activation(xs + h) - md.activation(xs - h)) / (2 * h)
        rel = np.abs(fd - md.activation_derivative(xs)) / np.abs(fd)
        assert rel.max() < 1e-6


class TestModelConfig:
    def test_default_ranks_endpoints(self):
        cfg = md.ModelConfig(shape=(32, 30, 8))
        assert cfg.ranks[0] == 30 and cfg.ranks[-1] == 32
        assert len(cfg.ranks) == cfg.hmf_layers + 1

    def test_bad_ranks_rejected(self):
        with pytest.raises(ValueError):
            md.ModelConfig(shape=(5, 4, 3), hmf_layers=2, ranks=(4, 0, 5))
        with pytest.raises(ValueError):
            md.ModelConfig(shape=(5, 4, 3), hmf_layers=2, ranks=(3, 2, 5))
        with pytest.raises(ValueError):
            md.ModelConfig(shape=(5, 4, 3), hmf_layers=3, ranks=(4, 2, 5))

    def test_layer_bounds(self):
        with pytest.raises(ValueError):
            md.ModelConfig(shape=(5, 4, 3), hmf_layers=1)
        with pytest.raises(ValueError):
            md.ModelConfig(shape=(5, 4, 3), hnt_layers=-1)


class TestInitParams:
    def test_deterministic_given_seed(self):
        a = md.init_params(small_cfg(seed=42))
        b = md.init_params(small_cfg(seed=42))
        for wa, wb in zip(a.factors, b.factors):
            assert np.array_equal(wa, wb)
        for ha, hb in zip(a.transforms, b.transforms):
            assert np.array_equal(ha, hb)

    def test_shape_contract(self):
        h, w, b = 6, 5, 3
        cfg = md.ModelConfig(shape=(h, w, b), hmf_layers=2, hnt_layers=0,
                             ranks=(w, 4, h))
        p = md.init_params(cfg)
        assert p.factors[0].shape == (4, w, b)
        assert p.factors[1].shape == (h, 4, b)

    def test_factor_std(self):
        w = 64
        cfg = md.ModelConfig(shape=(16, w, 8), hmf_layers=2, hnt_layers=0,
                             ranks=(w, 32, 16), seed=1)
        p = md.init_params(cfg)
        std = p.factors[0].std()
        assert abs(std - np.sqrt(1.0 / w)) < 0.1 * np.sqrt(1.0 / w)

    def test_transform_init_near_identity(self):
        p = md.init_params(small_cfg(seed=5))
        h = p.transforms[0]
        assert np.abs(h - np.eye(h.shape[0])).max() < 0.1


def nested_hmf_oracle(factors, slope):
    """Slice-by-slice evaluation of the nested product, activation after
    every product except the outermost."""
    l = len(factors)
    b = factors[0].shape[2]
    h, w = factors[-1].shape[0], factors[0].shape[1]
    out = np.zeros((h, w, b))
    for k in range(b):
        acc = factors[0][:, :, k]
        for d in range(1, l):
            acc = factors[d][:, :, k] @ acc
            if d < l - 1:
                acc = np.where(acc >= 0, acc, slope * acc)
        out[:, :, k] = acc
    return out


def nested_hnt_oracle(z, transforms, slope):
    acc = z.copy()
    m = len(transforms)
    for p in range(m):
        acc = np.tensordot(acc, transforms[p], axes=([2], [1]))
        if p < m - 1:
            acc = np.where(acc >= 0, acc, slope * acc)
    return acc


class TestHmfForward:
    def test_l2_identity_outer_factor(self):
        rng = np.random.default_rng(2)
        w1 = rng.normal(size=(3, 4, 2))
        w2 = np.stack([np.eye(3)] * 2, axis=2)
        p = md.H2TFParams(factors=[w1, w2], transforms=[], shape=(3, 4, 2))
        assert np.array_equal(md.hmf_forward(p), w1)

    def test_l2_has_no_activation(self):
        rng = np.random.default_rng(3)
        w1 = rng.normal(size=(2, 4, 2))
        w2 = rng.normal(size=(3, 2, 2))
        p = md.H2TFParams(factors=[w1, w2], transforms=[], shape=(3, 4, 2))
        np.testing.assert_allclose(md.hmf_forward(p),
                                   tc.facewise_product(w2, w1), atol=0)

    def test_l3_nonnegative_is_linear(self):
        rng = np.random.default_rng(4)
        facs = [np.abs(rng.normal(size=s))
                for s in ((2, 4, 2), (3, 2, 2), (5, 3, 2))]
        p = md.H2TFParams(factors=facs, transforms=[], shape=(5, 4, 2))
        linear = tc.facewise_product(facs[2], tc.facewise_product(facs[1], facs[0]))
        np.testing.assert_allclose(md.hmf_forward(p), linear, atol=1e-12)

    def test_l4_matches_nested_oracle(self):
        rng = np.random.default_rng(5)
        shapes = ((2, 4, 3), (3, 2, 3), (2, 3, 3), (5, 2, 3))
        facs = [rng.normal(size=s) for s in shapes]
        p = md.H2TFParams(factors=facs, transforms=[], shape=(5, 4, 3))
        np.testing.assert_allclose(md.hmf_forward(p),
                                   nested_hmf_oracle(facs, 0.1), atol=1e-13)


class TestHntApply:
    def test_m0_identity(self):
        z = np.random.default_rng(6).normal(size=(3, 4, 2))
        p = md.H2TFParams(factors=[np.zeros((1, 4, 2)), np.zeros((3, 1, 2))],
                          transforms=[], shape=(3, 4, 2))
        assert np.array_equal(md.hnt_apply(z, p), z)

    def test_m1_identity_matrix(self):
        z = np.random.default_rng(7).normal(size=(3, 4, 2))
        p = md.H2TFParams(factors=[np.zeros((1, 4, 2)), np.zeros((3, 1, 2))],
                          transforms=[np.eye(2)], shape=(3, 4, 2))
        np.testing.assert_allclose(md.hnt_apply(z, p), z, atol=0)

    def test_m2_matches_composition_oracle(self):
        rng = np.random.default_rng(8)
        z = rng.normal(size=(3, 4, 2))
        hs = [rng.normal(size=(2, 2)) for _ in range(2)]
        p = md.H2TFParams(factors=[np.zeros((1, 4, 2)), np.zeros((3, 1, 2))],
                          transforms=hs, shape=(3, 4, 2))
        np.testing.assert_allclose(md.hnt_apply(z, p),
                                   nested_hnt_oracle(z, hs, 0.1), atol=1e-13)

    def test_wrong_transform_shape(self):
        with pytest.raises(ValueError):
            md.H2TFParams(factors=[np.zeros((1, 4, 2)), np.zeros((3, 1, 2))],
                          transforms=[np.eye(3)], shape=(3, 4, 2))


class TestForward:
    def test_degenerate_inverse_dft_bounds_tubal_rank(self):
        cfg = md.ModelConfig(shape=(6, 5, 4), hmf_layers=2, hnt_layers=1,
                             ranks=(5, 2, 6), seed=9)
        x = md.forward(md.make_degenerate("tubal_mf", cfg))
        assert tc.tubal_rank(x, 1e-8) <= 2

    def test_l2_m0_is_plain_factorization(self):
        cfg = md.ModelConfig(shape=(5, 4, 3), hmf_layers=2, hnt_layers=0,
                             ranks=(4, 2, 5), seed=10)
        p = md.init_params(cfg)
        np.testing.assert_allclose(md.forward(p),
                                   tc.facewise_product(p.factors[1], p.factors[0]),
                                   atol=0)

    def test_l5_m2_matches_full_nested_oracle(self):
        cfg = md.ModelConfig(shape=(6, 5, 3), hmf_layers=5, hnt_layers=2,
                             ranks=(5, 2, 3, 2, 4, 6), seed=11)
        p = md.init_params(cfg)
        z = nested_hmf_oracle(p.factors, p.activation_slope)
        expected = nested_hnt_oracle(z, p.transforms, p.activation_slope)
        np.testing.assert_allclose(md.forward(p), expected, atol=1e-12)

    def test_shape_stable(self):
        for seed in range(5):
            p = md.init_params(small_cfg(seed=seed))
            assert md.forward(p).shape == (5, 4, 3)

    def test_linear_case_homogeneous_in_w1(self):
        cfg = md.ModelConfig(shape=(5, 4, 3), hmf_layers=4, hnt_layers=2,
                             ranks=(4, 2, 3, 2, 5), activation_slope=1.0, seed=12)
        p = md.init_params(cfg)
        alpha = 1.7
        scaled = md.H2TFParams(
            factors=[alpha * p.factors[0]] + [w.copy() for w in p.factors[1:]],
            transforms=[h.copy() for h in p.transforms], shape=p.shape,
            activation_slope=1.0)
        np.testing.assert_allclose(md.forward(scaled), alpha * md.forward(p),
                                   atol=1e-12)

    def test_warns_on_nonsymmetric_complex(self):
        b = 3
        facs = [np.fft.fft(np.random.default_rng(13).normal(size=(2, 4, b)), axis=2),
                np.random.default_rng(14).normal(size=(5, 2, b)) + 0j]
        p = md.H2TFParams(factors=facs, transforms=[tc.inverse_dft_matrix(b)],
                          shape=(5, 4, b), fixed_transforms=True)
        with pytest.warns(RuntimeWarning):
            md.forward(p)


class TestMakeDegenerate:
    def test_tubal_mf_rank_bound_across_seeds(self):
        for seed in range(20):
            r = 1 + seed % 3
            cfg = md.ModelConfig(shape=(8, 7, 4), hmf_layers=2, hnt_layers=1,
                                 ranks=(7, r, 8), seed=seed)
            x = md.forward(md.make_degenerate("tubal_mf", cfg))
            assert tc.tubal_rank(x, 1e-8) <= r

    def test_plain_hmf_matches_per_slice_oracle(self):
        cfg = md.ModelConfig(shape=(5, 4, 3), hmf_layers=3, hnt_layers=0,
                             ranks=(4, 2, 3, 5), seed=21)
        p = md.make_degenerate("plain_hmf", cfg)
        assert p.hnt_layers == 0
        np.testing.assert_allclose(md.forward(p),
                                   nested_hmf_oracle(p.factors, 0.1), atol=1e-13)

    def test_hlrtf_is_transform_of_two_factor_product(self):
        cfg = md.ModelConfig(shape=(5, 4, 3), hmf_layers=2, hnt_layers=2,
                             ranks=(4, 2, 5), seed=22)
        p = md.make_degenerate("hlrtf", cfg)
        z = tc.facewise_product(p.factors[1], p.factors[0])
        np.testing.assert_allclose(md.forward(p), md.hnt_apply(z, p), atol=0)

    def test_kind_config_conflicts(self):
        with pytest.raises(ValueError):
            md.make_degenerate("hlrtf", small_cfg())  # l = 3
        with pytest.raises(ValueError):
            md.make_degenerate("plain_hmf", small_cfg())  # m = 1
        with pytest.raises(ValueError):
            md.make_degenerate("tubal_mf", small_cfg())
        with pytest.raises(ValueError):
            md.make_degenerate("nonsense", small_cfg())

    def test_tubal_mf_transform_is_fixed(self):
        cfg = md.ModelConfig(shape=(5, 4, 3), hmf_layers=2, hnt_layers=1,
                             ranks=(4, 2, 5), seed=23)
        p = md.make_degenerate("tubal_mf", cfg)
        assert p.fixed_transforms
        np.testing.assert_allclose(p.transforms[0], tc.inverse_dft_matrix(3), atol=0)


class TestParamsValidation:
    def test_broken_chain(self):
        with pytest.raises(ValueError):
            md.H2TFParams(factors=[np.zeros((2, 4, 3)), np.zeros((5, 3, 3))],
                          transforms=[], shape=(5, 4, 3))

    def test_single_factor_rejected(self):
        with pytest.raises(ValueError):
            md.H2TFParams(factors=[np.zeros((5, 4, 3))], transforms=[],
                          shape=(5, 4, 3))

    def test_ranks_property(self):
        p = md.init_params(small_cfg())
        assert p.ranks == (4, 2, 3, 5)
