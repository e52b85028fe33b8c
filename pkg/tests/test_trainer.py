import json

import numpy as np
import pytest

import oracles
from duch.autodiff import Param, Tensor
from duch.dataset import SyntheticConfig, generate_synthetic
from duch.errors import ConfigError, TrainingDivergedError
from duch.losses import BatchCodes, LossWeights
from duch.models import init_bundle
from duch.trainer import (Adam, AdamConfig, TrainConfig, adam_step, lr_at,
                          train, train_epoch, update_binary_codes)


def tiny_config(**overrides):
    base = dict(code_bits=8, batch_size=16, epochs=2, hidden_dim=16,
                disc_hidden_dim=8, seed=1)
    base.update(overrides)
    return TrainConfig(**base)


def tiny_dataset(n=80, seed=0):
    return generate_synthetic(SyntheticConfig(n_clusters=2, n_pairs=n, d_img=6,
                                              d_txt=7, seed=seed))


class TestBinaryCodeUpdate:
    def _codes(self, hi, hi_aug, ht, ht_aug):
        return BatchCodes(hi=Tensor(hi), hi_aug=Tensor(hi_aug),
                          ht=Tensor(ht), ht_aug=Tensor(ht_aug))

    def test_direct_sign(self):
        row = np.array([[0.5, -0.5]])
        codes = self._codes(row, row.copy(), row.copy(), row.copy())
        np.testing.assert_array_equal(update_binary_codes(codes), [[1.0, -1.0]])

    def test_tie_break_is_plus_one(self):
        codes = self._codes(np.array([[1.0]]), np.array([[-1.0]]),
                            np.array([[1.0]]), np.array([[-1.0]]))
        np.testing.assert_array_equal(update_binary_codes(codes), [[1.0]])

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(3)
        streams = [rng.normal(size=(6, 5)) for _ in range(4)]
        codes = self._codes(*streams)
        np.testing.assert_array_equal(update_binary_codes(codes),
                                      oracles.sign_update(*streams))

    def test_target_detached_from_gradients(self):
        rng = np.random.default_rng(4)
        codes = BatchCodes(hi=Param(rng.normal(size=(3, 4))),
                           hi_aug=Param(rng.normal(size=(3, 4))),
                           ht=Param(rng.normal(size=(3, 4))),
                           ht_aug=Param(rng.normal(size=(3, 4))))
        b = update_binary_codes(codes)
        assert isinstance(b, np.ndarray)
        assert codes.b_target is b


class TestLearningRate:
    def test_initial_value(self):
        assert lr_at(0, TrainConfig()) == 1e-4

    def test_boundary_before_first_decay(self):
        assert lr_at(49, TrainConfig()) == 1e-4

    def test_first_decay(self):
        assert lr_at(50, TrainConfig()) == pytest.approx(2e-5)

    def test_non_increasing_step_function(self):
        cfg = tiny_config(lr_decay_every=3, lr_decay_factor=0.5, lr0=0.1)
        values = [lr_at(e, cfg) for e in range(20)]
        assert all(b <= a for a, b in zip(values, values[1:]))
        assert values[:3] == [0.1] * 3
        assert values[3] == pytest.approx(0.05)

    def test_negative_epoch_rejected(self):
        with pytest.raises(ConfigError):
            lr_at(-1, TrainConfig())


class TestAdam:
    def test_zero_gradient_is_a_no_op(self):
        p = Param([[1.0, -2.0]])
        before = p.data.copy()
        adam_step(p, lr=0.1, t=1, adam=AdamConfig())
        np.testing.assert_array_equal(p.data, before)

    def test_first_step_magnitude_is_about_lr(self):
        p = Param([[0.0]])
        p.grad[...] = 1.0
        adam_step(p, lr=0.1, t=1, adam=AdamConfig())
        assert p.data[0, 0] == pytest.approx(-0.1, rel=1e-6)
        assert p.grad[0, 0] == 0.0  # grad zeroed after the step

    def test_bias_correction_against_hand_formula(self):
        adam = AdamConfig()
        p = Param([[0.5]])
        m = v = 0.0
        value = 0.5
        for t in range(1, 6):
            g = 0.3 * t
            p.grad[...] = g
            adam_step(p, lr=0.01, t=t, adam=adam)
            m = adam.beta1 * m + (1 - adam.beta1) * g
            v = adam.beta2 * v + (1 - adam.beta2) * g * g
            m_hat = m / (1 - adam.beta1 ** t)
            v_hat = v / (1 - adam.beta2 ** t)
            value -= 0.01 * m_hat / (np.sqrt(v_hat) + adam.epsilon)
            assert p.data[0, 0] == pytest.approx(value, rel=1e-12)

    def test_optimizer_steps_count(self):
        opt = Adam([Param([[1.0]])], AdamConfig())
        opt.step(0.1)
        opt.step(0.1)
        assert opt.t == 2


class TestTrainEpoch:
    def test_step_counts_for_even_batches(self):
        ds = tiny_dataset(n=1024)  # train split = 512
        cfg = tiny_config(batch_size=256, epochs=1)
        bundle = init_bundle(ds.d_img, ds.d_txt, cfg.code_bits,
                             hidden=cfg.hidden_dim, seed=cfg.seed,
                             disc_hidden=cfg.disc_hidden_dim)
        opt_gen = Adam(bundle.hash_params(), cfg.adam)
        opt_disc = Adam(bundle.d.params(), cfg.adam)
        x, xa, y, ya = ds.train_arrays()
        batches = [(x[i:i + 256], xa[i:i + 256], y[i:i + 256], ya[i:i + 256])
                   for i in range(0, 512, 256)]
        train_epoch(bundle, batches, cfg, 0, opt_gen, opt_disc)
        assert opt_gen.t == 2
        assert opt_disc.t == 2

    def test_discriminator_untouched_when_adversarial_off(self):
        ds = tiny_dataset()
        cfg = tiny_config(ablation={"no_adv"}, epochs=1)
        bundle, report = train(ds, cfg)
        fresh = init_bundle(ds.d_img, ds.d_txt, cfg.code_bits,
                            hidden=cfg.hidden_dim, seed=cfg.seed,
                            disc_hidden=cfg.disc_hidden_dim)
        for p, q in zip(bundle.d.params(), fresh.d.params()):
            np.testing.assert_array_equal(p.data, q.data)
        assert all(r.L_adv_disc == 0.0 and r.L_adv_gen == 0.0 for r in report.records)

    def test_non_finite_loss_aborts_naming_component(self):
        # hand-built batch with NaN embeddings bypasses dataset validation
        # and blows up the first computed component
        cfg = tiny_config(epochs=1)
        bundle = init_bundle(4, 5, cfg.code_bits, hidden=cfg.hidden_dim,
                             seed=0, disc_hidden=cfg.disc_hidden_dim)
        opt_gen = Adam(bundle.hash_params(), cfg.adam)
        opt_disc = Adam(bundle.d.params(), cfg.adam)
        x = np.full((4, 4), np.nan)
        y = np.full((4, 5), np.nan)
        with pytest.raises(TrainingDivergedError, match="L_adv_disc"):
            train_epoch(bundle, [(x, x.copy(), y, y.copy())], cfg, 0,
                        opt_gen, opt_disc)

    def test_hash_networks_move_only_in_generator_steps(self):
        ds = tiny_dataset()
        bundle, _ = train(ds, tiny_config(epochs=1))
        fresh = init_bundle(ds.d_img, ds.d_txt, 8, hidden=16, seed=1,
                            disc_hidden=8)
        moved_f = any(not np.array_equal(p.data, q.data)
                      for p, q in zip(bundle.f.params(), fresh.f.params()))
        moved_d = any(not np.array_equal(p.data, q.data)
                      for p, q in zip(bundle.d.params(), fresh.d.params()))
        assert moved_f and moved_d


class TestAblationSwitches:
    @pytest.mark.parametrize("switch,field", [
        ("no_adv", "L_adv_disc"),
        ("no_adv", "L_adv_gen"),
        ("no_quant", "L_Q"),
        ("no_bb", "L_BB"),
        ("no_intra_img", "L_C_img"),
        ("no_intra_txt", "L_C_txt"),
    ])
    def test_switch_zeroes_component(self, switch, field):
        ds = tiny_dataset(n=40)
        _, report = train(ds, tiny_config(epochs=1, ablation={switch}))
        assert all(getattr(r, field) == 0.0 for r in report.records)

    def test_effective_weights_mapping(self):
        cfg = tiny_config(ablation={"no_adv", "no_intra_txt"})
        w = cfg.effective_weights()
        assert w.alpha == 0.0 and w.lambda2 == 0.0
        assert w.lambda1 == cfg.weights.lambda1

    def test_unknown_switch_rejected(self):
        with pytest.raises(ConfigError):
            tiny_config(ablation={"no_everything"})


class TestTrainConfig:
    def test_defaults_follow_reference_setup(self):
        cfg = TrainConfig()
        assert cfg.batch_size == 256
        assert cfg.epochs == 100
        assert cfg.lr0 == 1e-4
        assert cfg.lr_decay_every == 50
        w = cfg.weights
        assert (w.tau, w.lambda1, w.lambda2) == (0.5, 1.0, 1.0)
        assert (w.alpha, w.beta, w.gamma) == (0.01, 0.001, 0.01)

    def test_validation(self):
        with pytest.raises(ConfigError):
            tiny_config(epochs=0)
        with pytest.raises(ConfigError):
            tiny_config(batch_size=1)
        with pytest.raises(ConfigError):
            tiny_config(lr_decay_factor=1.5)

    def test_dict_round_trip(self):
        cfg = tiny_config(ablation={"no_bb"},
                          weights=LossWeights(tau=0.3, alpha=0.5))
        again = TrainConfig.from_dict(cfg.to_dict())
        assert again == cfg


class TestTrainEndToEnd:
    def test_deterministic_runs(self):
        ds = tiny_dataset()
        cfg = tiny_config()
        b1, r1 = train(ds, cfg)
        b2, r2 = train(ds, cfg)
        for p, q in zip(b1.all_params(), b2.all_params()):
            np.testing.assert_array_equal(p.data, q.data)
        assert r1.to_jsonl() == r2.to_jsonl()

    def test_report_structure(self):
        ds = tiny_dataset(n=60)
        cfg = tiny_config(epochs=3)
        _, report = train(ds, cfg)
        assert len(report.records) == 3
        lines = report.to_jsonl().strip().splitlines()
        payload = json.loads(lines[0])
        assert list(payload) == ["epoch", "lr", "L_C_inter", "L_C_img", "L_C_txt",
                                 "L_adv_disc", "L_adv_gen", "L_Q", "L_BB", "total"]
        assert "wall_time" not in payload
        assert all(np.isfinite(v) for v in payload.values())

    def test_writes_checkpoint_and_report(self, tmp_path):
        ds = tiny_dataset(n=60)
        _, report = train(ds, tiny_config(), out_dir=tmp_path / "run")
        assert (tmp_path / "run" / "model.ckpt").exists()
        assert (tmp_path / "run" / "report.jsonl").exists()
        assert report.checkpoint_path.endswith("model.ckpt")

    def test_empty_train_split_rejected(self):
        ds = tiny_dataset(n=40)
        ds.split[:] = 2
        with pytest.raises(ConfigError):
            train(ds, tiny_config())

    def test_loss_trends_down_on_separable_data(self):
        # median first-vs-last composite loss over 3 seeds, 10 epochs
        diffs = []
        for seed in range(3):
            ds = generate_synthetic(SyntheticConfig(n_clusters=2, n_pairs=120,
                                                    d_img=8, d_txt=8, seed=seed))
            cfg = tiny_config(epochs=10, seed=seed, lr0=1e-3)
            _, report = train(ds, cfg)
            diffs.append(report.records[-1].total - report.records[0].total)
        assert np.median(diffs) < 0.0
