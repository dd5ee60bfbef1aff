import math

import numpy as np
import pytest

from gcse.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from gcse.kernel import MLPParams, ShapeError
from gcse.networks import (
    PRESETS,
    Discriminator,
    GeneratorPair,
    build_discriminator,
    build_from_preset,
    build_generator,
    discriminator_forward,
    generator_forward,
    generator_forward_batch,
    sample_noise,
    threshold_indicator,
)


def zero_generator(q=2, d=3, hidden=(4,)):
    sizes = [q + d, *hidden, 2]
    ws = tuple(np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:]))
    bs = tuple(np.zeros(o) for o in sizes[1:])
    return GeneratorPair(MLPParams(ws, bs, output="heads"), q, d)


class TestGeneratorForward:
    def test_zero_network(self):
        gen = zero_generator()
        g1, g2 = generator_forward(gen, np.zeros(2), np.zeros(3))
        assert g1 == 0.0
        assert g2 == 0.5

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        gen, _ = build_from_preset("M1-independent", rng)
        eta = rng.standard_normal(gen.noise_dim)
        x = rng.standard_normal(5)
        assert generator_forward(gen, eta, x) == generator_forward(gen, eta, x)

    def test_tiny_net_hand_composition(self):
        # one hidden unit; trunk shared, separate head rows
        alpha = 0.3
        w1 = np.array([[0.5, -1.0]])  # input (eta, x)
        b1 = np.array([0.2])
        w2 = np.array([[2.0], [-3.0]])
        b2 = np.array([0.1, 0.4])
        gen = GeneratorPair(MLPParams((w1, w2), (b1, b2), output="heads"), 1, 1)
        eta, x = 0.8, 1.5
        z = 0.5 * eta - 1.0 * x + 0.2
        h = z if z >= 0 else alpha * (math.exp(z) - 1.0)
        lin = 2.0 * h + 0.1
        sig = 1.0 / (1.0 + math.exp(-(-3.0 * h + 0.4)))
        g1, g2 = generator_forward(gen, np.array([eta]), np.array([x]))
        assert g1 == pytest.approx(lin, rel=1e-15)
        assert g2 == pytest.approx(sig, rel=1e-15)

    def test_score_in_open_interval(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            gen, _ = build_from_preset("M1-independent", rng)
            eta = sample_noise(rng, 64, gen.noise_dim)
            x = rng.standard_normal((64, 5)) * 3
            _, g2, _, _ = generator_forward_batch(gen, eta, x)
            assert np.all((g2 > 0.0) & (g2 < 1.0))

    def test_dimension_mismatch(self):
        gen = zero_generator()
        with pytest.raises(ShapeError):
            generator_forward(gen, np.zeros(3), np.zeros(3))

    def test_clamp_limits_time_head(self):
        rng = np.random.default_rng(2)
        gen = build_generator(5, 3, (16,), rng, clamp=0.05)
        eta = sample_noise(rng, 200, 3)
        x = rng.standard_normal((200, 5))
        g1, _, _, gate = generator_forward_batch(gen, eta, x)
        assert np.all(np.abs(g1) <= 0.05)
        assert gate is not None and set(np.unique(gate)) <= {0.0, 1.0}


class TestThreshold:
    @pytest.mark.parametrize(
        "score,expected", [(0.5, 1), (0.4999, 0), (1.0, 1), (0.0, 0), (0.75, 1)]
    )
    def test_examples(self, score, expected):
        assert threshold_indicator(score) == expected

    def test_rule_is_exactly_ge_half(self):
        for g2 in np.linspace(0.0, 1.0, 1001):
            assert threshold_indicator(g2) == (1 if g2 >= 0.5 else 0)


class TestDiscriminatorForward:
    def test_zero_network(self):
        net = MLPParams((np.zeros((1, 5)),), (np.zeros(1),))
        disc = Discriminator(net, 3)
        assert discriminator_forward(disc, np.ones(3), 2.0, 1.0) == 0.0

    def test_projection_returns_time(self):
        net = MLPParams((np.array([[0.0, 0.0, 0.0, 1.0, 0.0]]),), (np.zeros(1),))
        disc = Discriminator(net, 3)
        assert discriminator_forward(disc, np.array([5.0, 6.0, 7.0]), -2.5, 1.0) == -2.5

    def test_hand_composition(self):
        alpha = 0.3
        w1 = np.array([[1.0, -0.5, 0.25]])
        b1 = np.array([-0.1])
        w2 = np.array([[1.5]])
        b2 = np.array([0.2])
        disc = Discriminator(MLPParams((w1, w2), (b1, b2)), 1)
        x, y, dd = 0.4, -0.6, 1.0
        z = 1.0 * x - 0.5 * y + 0.25 * dd - 0.1
        h = z if z >= 0 else alpha * (math.exp(z) - 1.0)
        assert discriminator_forward(disc, np.array([x]), y, dd) == pytest.approx(
            1.5 * h + 0.2, rel=1e-15
        )

    def test_accepts_continuous_indicator(self):
        rng = np.random.default_rng(3)
        _, disc = build_from_preset("M1-independent", rng)
        x = rng.standard_normal(5)
        hard = discriminator_forward(disc, x, 0.3, 1.0)
        soft = discriminator_forward(disc, x, 0.3, 0.62)
        assert np.isfinite(hard) and np.isfinite(soft) and hard != soft


class TestPresets:
    @pytest.mark.parametrize(
        "name,gen_hidden,disc_hidden,q",
        [
            ("M1-independent", (60, 30), (60, 30), 3),
            ("M2-independent", (60, 30), (60, 30), 7),
            ("M3-independent", (40, 20), (50, 25), 5),
            ("M4-independent", (40, 20), (50, 25), 7),
            ("M1-dependent", (50, 25), (50, 25), 3),
            ("M2-dependent", (60, 30), (60, 30), 7),
            ("M3-dependent", (40, 20), (50, 25), 5),
            ("M4-dependent", (40, 20), (50, 25), 7),
        ],
    )
    def test_simulation_presets(self, name, gen_hidden, disc_hidden, q):
        rng = np.random.default_rng(4)
        gen, disc = build_from_preset(name, rng)
        got_gen = tuple(w.shape[0] for w in gen.net.weights[:-1])
        got_disc = tuple(w.shape[0] for w in disc.net.weights[:-1])
        assert got_gen == gen_hidden
        assert got_disc == disc_hidden
        assert gen.noise_dim == q
        assert gen.net.in_dim == q + 5
        assert disc.net.in_dim == 5 + 2

    def test_data_presets(self):
        rng = np.random.default_rng(5)
        gen, disc = build_from_preset("pbc", rng, covariate_dim=17)
        assert tuple(w.shape[0] for w in gen.net.weights[:-1]) == (30, 15)
        assert gen.noise_dim == 10
        gen, disc = build_from_preset("support", rng, covariate_dim=40)
        assert tuple(w.shape[0] for w in gen.net.weights[:-1]) == (60, 30)
        assert gen.noise_dim == 20

    def test_open_covariate_dim_required(self):
        with pytest.raises(ValueError):
            build_from_preset("pbc", np.random.default_rng(6))

    def test_fixed_covariate_dim_enforced(self):
        with pytest.raises(ShapeError):
            build_from_preset("M1-independent", np.random.default_rng(7), covariate_dim=4)

    def test_elu_alpha_default(self):
        rng = np.random.default_rng(8)
        gen, disc = build_from_preset("M1-independent", rng)
        assert gen.net.alpha == 0.3
        assert disc.net.alpha == 0.3


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(9)
        gen, disc = build_from_preset("M3-independent", rng)
        path = str(tmp_path / "ckpt.txt")
        save_checkpoint(path, gen, disc, "M3-independent")
        loaded = load_checkpoint(path)
        assert loaded.preset == "M3-independent"
        assert loaded.generator.noise_dim == gen.noise_dim
        assert loaded.generator.clamp is None
        for a, b in zip(gen.net.weights, loaded.generator.net.weights):
            assert np.array_equal(a, b)
        for a, b in zip(disc.net.biases, loaded.discriminator.net.biases):
            assert np.array_equal(a, b)

    def test_round_trip_with_clamp(self, tmp_path):
        rng = np.random.default_rng(10)
        gen = build_generator(5, 3, (8,), rng, clamp=1.0 + math.log(500))
        disc = build_discriminator(5, (8,), rng)
        path = str(tmp_path / "ckpt.txt")
        save_checkpoint(path, gen, disc, "custom")
        loaded = load_checkpoint(path)
        assert loaded.generator.clamp == gen.clamp

    def test_rejects_foreign_file(self, tmp_path):
        p = tmp_path / "bogus.txt"
        p.write_text("not a checkpoint\n", encoding="utf-8")
        with pytest.raises(CheckpointError):
            load_checkpoint(str(p))

    def test_truncated_file_rejected(self, tmp_path):
        rng = np.random.default_rng(11)
        gen, disc = build_from_preset("M1-independent", rng)
        path = str(tmp_path / "ckpt.txt")
        save_checkpoint(path, gen, disc, "M1-independent")
        text = open(path).read().splitlines()
        truncated = tmp_path / "cut.txt"
        truncated.write_text("\n".join(text[: len(text) // 2]), encoding="utf-8")
        with pytest.raises(CheckpointError):
            load_checkpoint(str(truncated))
