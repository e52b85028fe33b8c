"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (visible with -s or on failure) and asserting its stated
tolerance. The end-to-end benchmark: 4 clusters, 2000 pairs, d_img=64,
d_txt=96, 16-bit codes, 30 epochs, all other knobs at their defaults.
"""

import math
import shutil
import time

import numpy as np

import oracles
from duch.autodiff import Param, Tensor, finite_difference_check
from duch.cli import main
from duch.dataset import SyntheticConfig, generate_synthetic
from duch.evaluation import EvalConfig, map_at_k, precision_curve
from duch.losses import (BatchCodes, LossWeights, adversarial_discriminator_loss,
                         adversarial_generator_loss, bit_balance_loss,
                         inter_modal_contrastive, intra_modal_contrastive,
                         quantization_loss, total_loss)
from duch.models import DiscriminatorNet, HashNetwork
from duch.retrieval import (RetrievalIndex, binarize_and_pack, encode_split,
                            hamming, top_k)
from duch.trainer import TrainConfig, train, update_binary_codes

GRAD_TOL = 1e-4
FD_STEP = 1e-5
N_GRAD_SEEDS = 20

BENCHMARK = SyntheticConfig(n_clusters=4, n_pairs=2000, d_img=64, d_txt=96, seed=0)


def report(criterion, ok, detail):
    print(f"[acceptance] {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")


def random_code_batch(rng, m=4, bits=6):
    codes = BatchCodes(hi=Param(rng.normal(size=(m, bits))),
                       hi_aug=Param(rng.normal(size=(m, bits))),
                       ht=Param(rng.normal(size=(m, bits))),
                       ht_aug=Param(rng.normal(size=(m, bits))))
    update_binary_codes(codes)
    return codes


# -- benchmark run cache (criterion 5 and 6 share trainings) ----------------

_BENCH_DATASET = None
_BENCH_RUNS = {}


def benchmark_map(seed, ablation=()):
    """mAP@20 in both directions for one training on the shared benchmark."""
    global _BENCH_DATASET
    key = (seed, frozenset(ablation))
    if key in _BENCH_RUNS:
        return _BENCH_RUNS[key]
    if _BENCH_DATASET is None:
        _BENCH_DATASET = generate_synthetic(BENCHMARK)
    ds = _BENCH_DATASET
    cfg = TrainConfig(code_bits=16, epochs=30, seed=seed,
                      ablation=frozenset(ablation))
    started = time.perf_counter()
    bundle, _ = train(ds, cfg)
    elapsed = time.perf_counter() - started
    q, r = ds.rows_for_split("query"), ds.rows_for_split("retrieval")
    img_q = RetrievalIndex(encode_split(bundle.f, ds.x[q]), q)
    txt_q = RetrievalIndex(encode_split(bundle.g, ds.y[q]), q)
    img_r = RetrievalIndex(encode_split(bundle.f, ds.x[r]), r)
    txt_r = RetrievalIndex(encode_split(bundle.g, ds.y[r]), r)
    i2t = map_at_k(img_q, txt_r, ds.labels, EvalConfig(map_k=20))
    t2i = map_at_k(txt_q, img_r, ds.labels,
                   EvalConfig(map_k=20, direction="txt_to_img"))
    _BENCH_RUNS[key] = (i2t, t2i, elapsed)
    return _BENCH_RUNS[key]


# ---------------------------------------------------------------------------


class TestCriterion1GradientCorrectness:
    """Every layer and every loss vs central finite differences,
    relative error <= 1e-4 over >= 20 seeds, under one minute."""

    def test_layers_and_losses(self):
        import duch.autodiff as ad

        started = time.perf_counter()
        worst = {}

        def probe(t, coeffs):
            # quadratic plus a fixed linear term: nonzero gradient even for
            # layers that pin their output moments
            return ad.sum_all(ad.mul(t, t)) + ad.sum_all(ad.mul(t, coeffs))

        for seed in range(N_GRAD_SEEDS):
            rng = np.random.default_rng(seed)

            # layers
            x = Param(rng.normal(size=(4, 3)))
            w = Param(rng.normal(size=(3, 2)))
            b = Param(rng.normal(size=(1, 2)))
            c_lin = rng.normal(size=(4, 2))
            worst["linear"] = max(worst.get("linear", 0.0), finite_difference_check(
                lambda: probe(ad.linear_forward(x, w, b), c_lin), [x, w, b], FD_STEP))

            act_in = rng.normal(size=(4, 3))
            act_in[np.abs(act_in) < 0.05] += 0.1  # keep clear of the relu kink
            c_act = rng.normal(size=(4, 3))
            for name, fn in (("relu", ad.relu), ("tanh", ad.tanh),
                             ("sigmoid", ad.sigmoid)):
                p = Param(act_in.copy())
                worst[name] = max(worst.get(name, 0.0), finite_difference_check(
                    lambda: probe(fn(p), c_act), [p], FD_STEP))

            bn = ad.BatchNorm(3)
            bn.gamma.data[...] = rng.normal(size=(1, 3))
            bn.beta.data[...] = rng.normal(size=(1, 3))
            xb = Param(rng.normal(size=(6, 3)))
            c_bn = rng.normal(size=(6, 3))
            worst["batchnorm"] = max(worst.get("batchnorm", 0.0), finite_difference_check(
                lambda: probe(bn.forward(xb, train=True), c_bn),
                [xb, bn.gamma, bn.beta], FD_STEP))

            xn = Param(rng.normal(size=(4, 5)))
            c_norm = rng.normal(size=(4, 5))
            worst["row_normalize"] = max(worst.get("row_normalize", 0.0),
                                         finite_difference_check(
                lambda: probe(ad.row_l2_normalize(xn), c_norm), [xn], FD_STEP))

            # losses over leaf code matrices
            codes = random_code_batch(rng)
            streams = list(codes.streams())
            d = DiscriminatorNet(6, 5, rng)
            for name, fn in (
                ("inter_modal", lambda: inter_modal_contrastive(
                    codes.hi * 1.0, codes.ht * 1.0, 0.5)),
                ("intra_img", lambda: intra_modal_contrastive(
                    codes.hi * 1.0, codes.hi_aug * 1.0, 0.5)),
                ("intra_txt", lambda: intra_modal_contrastive(
                    codes.ht * 1.0, codes.ht_aug * 1.0, 0.5)),
                ("quantization", lambda: quantization_loss(codes)),
                ("bit_balance", lambda: bit_balance_loss(codes)),
                ("adv_generator", lambda: adversarial_generator_loss(
                    d, ad.vstack([codes.hi, codes.hi_aug]))),
                ("total_generator", lambda: total_loss(
                    codes, d, LossWeights(), "generator")),
            ):
                worst[name] = max(worst.get(name, 0.0),
                                  finite_difference_check(fn, streams, FD_STEP))
            worst["adv_discriminator"] = max(
                worst.get("adv_discriminator", 0.0),
                finite_difference_check(
                    lambda: adversarial_discriminator_loss(d, codes),
                    d.params(), FD_STEP))

            # the composite objective through both hash networks and D;
            # hidden width 12 keeps fully-dead relu rows (which would zero a
            # code row) out of the fixed-seed draws
            f = HashNetwork(3, 12, 8, rng)
            g = HashNetwork(4, 12, 8, rng)
            dd = DiscriminatorNet(8, 6, rng)
            xs = rng.normal(size=(4, 3))
            xs_aug = xs + rng.normal(scale=0.1, size=xs.shape)
            ys = rng.normal(size=(4, 4))
            ys_aug = ys + rng.normal(scale=0.1, size=ys.shape)
            frozen_target = None

            def composite():
                nonlocal frozen_target
                c = BatchCodes(hi=f.forward(xs, train=True),
                               hi_aug=f.forward(xs_aug, train=True),
                               ht=g.forward(ys, train=True),
                               ht_aug=g.forward(ys_aug, train=True))
                if frozen_target is None:
                    frozen_target = update_binary_codes(c)
                else:
                    c.b_target = frozen_target  # keep the loss differentiable
                return total_loss(c, dd, LossWeights(), "generator")

            worst["composite_eq9"] = max(
                worst.get("composite_eq9", 0.0),
                finite_difference_check(
                    composite, f.params() + g.params() + dd.params(), FD_STEP))

        elapsed = time.perf_counter() - started
        worst_name = max(worst, key=worst.get)
        ok = max(worst.values()) <= GRAD_TOL and elapsed < 60.0
        report("criterion 1 (gradient correctness)", ok,
               f"worst {worst_name}={worst[worst_name]:.2e} over "
               f"{N_GRAD_SEEDS} seeds, {elapsed:.1f}s")
        for name, err in sorted(worst.items()):
            assert err <= GRAD_TOL, f"{name}: {err:.3e} > {GRAD_TOL}"
        assert elapsed < 60.0, f"gradient suite took {elapsed:.1f}s"


class TestCriterion2LossOracles:
    def test_single_pair_inter_modal_is_exactly_zero(self):
        hi = Tensor([[0.4, -0.2, 0.9]])
        ht = Tensor([[-0.1, 0.8, 0.3]])
        value = inter_modal_contrastive(hi, ht, tau=0.5).item()
        report("criterion 2a (M=1 loss)", value == 0.0, f"value={value!r}")
        assert value == 0.0

    def test_orthonormal_construction_value(self):
        # independent oracle script value and the closed form -log(e/(e+2))
        eye = np.eye(2)
        ours = inter_modal_contrastive(Tensor(eye), Tensor(eye.copy()), tau=1.0).item()
        scripted = oracles.nt_xent(eye, eye, 1.0)
        closed = math.log((math.e + 2.0) / math.e)
        ok = abs(ours - scripted) <= 1e-9 and abs(ours - closed) <= 1e-9 \
            and abs(ours - 0.5514447139320509) <= 1e-9
        report("criterion 2b (orthonormal M=2)", ok,
               f"ours={ours:.12f} oracle={scripted:.12f}")
        assert abs(ours - scripted) <= 1e-9
        assert abs(ours - closed) <= 1e-9
        assert abs(ours - 0.5514447139320509) <= 1e-9

    def test_binarization_hand_examples(self):
        z = np.zeros((1, 2))
        quant = quantization_loss(BatchCodes(
            hi=Tensor(z), hi_aug=Tensor(z.copy()), ht=Tensor(z.copy()),
            ht_aug=Tensor(z.copy()), b_target=np.array([[1.0, -1.0]]))).item()
        bb = bit_balance_loss(BatchCodes(
            hi=Tensor([[1.0], [1.0]]), hi_aug=Tensor(np.zeros((2, 1))),
            ht=Tensor(np.zeros((2, 1))), ht_aug=Tensor(np.zeros((2, 1))))).item()
        ok = abs(quant - 4.0) <= 1e-12 and abs(bb - 2.0) <= 1e-12
        report("criterion 2c (binarization hand values)", ok,
               f"quantization={quant!r} bit_balance={bb!r}")
        assert abs(quant - 4.0) <= 1e-12
        assert abs(bb - 2.0) <= 1e-12


class TestCriterion3RetrievalEquivalence:
    def test_hamming_and_topk_match_naive_oracles(self):
        started = time.perf_counter()
        rng = np.random.default_rng(99)
        checked_pairs = 0
        for bits in (16, 32, 64, 128):
            signs = np.where(rng.random((200, bits)) < 0.5, -1.0, 1.0)
            packed = binarize_and_pack(signs)
            bit_lists = [(row > 0).astype(int).tolist() for row in signs]

            for _ in range(250):
                i, j = rng.integers(0, 200, size=2)
                assert (hamming(packed.data[i], packed.data[j])
                        == oracles.hamming_bits(bit_lists[i], bit_lists[j]))
                checked_pairs += 1

            ids = rng.permutation(5000)[:200]
            index = RetrievalIndex(packed, ids)
            order = np.argsort(ids)
            sorted_ids = ids[order].tolist()
            sorted_codes = [bit_lists[k] for k in order]
            for qi in range(20):
                expected = oracles.rank_archive(bit_lists[qi], sorted_codes,
                                                sorted_ids)[:20]
                got = [(d, i) for i, d in top_k(packed.data[qi], index, 20)]
                assert got == expected, f"bits={bits} query={qi}"
        elapsed = time.perf_counter() - started
        ok = elapsed < 10.0
        report("criterion 3 (retrieval equivalence)", ok,
               f"{checked_pairs} distance pairs + 80 top-20 queries over "
               f"B in {{16,32,64,128}}, {elapsed:.1f}s")
        assert checked_pairs == 1000
        assert elapsed < 10.0, f"retrieval checks took {elapsed:.1f}s"


class TestCriterion4MetricOracle:
    def test_map_and_precision_match_brute_force(self):
        rng = np.random.default_rng(123)
        q_signs = np.where(rng.random((50, 16)) < 0.5, -1.0, 1.0)
        a_signs = np.where(rng.random((200, 16)) < 0.5, -1.0, 1.0)
        queries = RetrievalIndex(binarize_and_pack(q_signs), np.arange(50))
        archive = RetrievalIndex(binarize_and_pack(a_signs), np.arange(50, 250))
        labels = rng.integers(0, 4, size=250)

        ours_map = map_at_k(queries, archive, labels, EvalConfig(map_k=20))
        q_bits = [(r > 0).astype(int).tolist() for r in q_signs]
        a_bits = [(r > 0).astype(int).tolist() for r in a_signs]
        oracle_map = oracles.map_at_k(q_bits, labels[queries.ids], a_bits,
                                      labels[archive.ids], archive.ids.tolist(), 20)
        map_err = abs(ours_map - oracle_map)

        curve = dict(precision_curve(queries, archive, labels,
                                     EvalConfig(precision_k_max=100)))
        prec_err = 0.0
        for k in (1, 7, 20, 50, 100):
            oracle_p = oracles.precision_at_k(q_bits, labels[queries.ids], a_bits,
                                              labels[archive.ids],
                                              archive.ids.tolist(), k)
            prec_err = max(prec_err, abs(curve[k] - oracle_p))

        ok = map_err <= 1e-12 and prec_err <= 1e-12
        report("criterion 4a (metric oracle)", ok,
               f"|dmAP|={map_err:.2e} |dP@K|={prec_err:.2e}")
        assert map_err <= 1e-12
        assert prec_err <= 1e-12

    def test_random_codes_two_balanced_classes(self):
        # full-depth mAP: ranking independent of labels concentrates at the
        # relevant fraction 0.5
        values = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            q = RetrievalIndex(binarize_and_pack(
                np.where(rng.random((100, 16)) < 0.5, -1.0, 1.0)), np.arange(100))
            a = RetrievalIndex(binarize_and_pack(
                np.where(rng.random((400, 16)) < 0.5, -1.0, 1.0)),
                np.arange(100, 500))
            labels = np.concatenate([np.arange(100) % 2, np.arange(400) % 2])
            values.append(map_at_k(q, a, labels, EvalConfig(map_k=400)))
        lo, hi = min(values), max(values)
        ok = all(abs(v - 0.5) <= 0.05 for v in values)
        report("criterion 4b (random-code mAP)", ok,
               f"range [{lo:.4f}, {hi:.4f}] over 10 seeds")
        assert ok, values


class TestCriterion5EndToEnd:
    def test_synthetic_benchmark_reaches_095(self):
        i2t, t2i, elapsed = benchmark_map(seed=0)
        ok = i2t >= 0.95 and t2i >= 0.95 and elapsed < 300.0
        report("criterion 5 (end-to-end synthetic)", ok,
               f"I2T={i2t:.4f} T2I={t2i:.4f}, train {elapsed:.0f}s")
        assert i2t >= 0.95, f"I2T mAP@20 {i2t:.4f} < 0.95"
        assert t2i >= 0.95, f"T2I mAP@20 {t2i:.4f} < 0.95"
        assert elapsed < 300.0, f"training took {elapsed:.0f}s"


class TestCriterion6AblationOrdering:
    def test_full_model_at_least_matches_inter_only(self):
        seeds = (0, 1, 2)
        full = [benchmark_map(s) for s in seeds]
        cl = [benchmark_map(s, ("no_intra_img", "no_intra_txt")) for s in seeds]
        med = lambda runs, i: float(np.median([r[i] for r in runs]))
        f_i2t, f_t2i = med(full, 0), med(full, 1)
        c_i2t, c_t2i = med(cl, 0), med(cl, 1)
        ok = f_i2t >= c_i2t and f_t2i >= c_t2i
        report("criterion 6 (ablation ordering)", ok,
               f"full medians I2T={f_i2t:.4f} T2I={f_t2i:.4f} vs "
               f"inter-only I2T={c_i2t:.4f} T2I={c_t2i:.4f}")
        assert f_i2t >= c_i2t
        assert f_t2i >= c_t2i


class TestCriterion7Determinism:
    def test_all_artifacts_byte_identical_across_reruns(self, tmp_path):
        data_dir = tmp_path / "data"
        assert main(["gen-synth", "--out", str(data_dir), "--pairs", "120",
                     "--clusters", "3", "--d-img", "8", "--d-txt", "10",
                     "--seed", "4"]) == 0
        manifest = str(data_dir / "manifest.json")
        run_dir = tmp_path / "run"
        eval_dir = tmp_path / "eval"

        def one_run():
            for d in (run_dir, eval_dir):
                if d.exists():
                    shutil.rmtree(d)
            assert main(["train", "--data", manifest, "--out", str(run_dir),
                         "--bits", "16", "--epochs", "3", "--batch", "16",
                         "--hidden", "16", "--disc-hidden", "8",
                         "--seed", "11"]) == 0
            for split, modality, name in (("query", "img", "q_img.code"),
                                          ("retrieval", "txt", "r_txt.code")):
                assert main(["encode", "--checkpoint", str(run_dir / "model.ckpt"),
                             "--data", manifest, "--split", split,
                             "--modality", modality,
                             "--out", str(run_dir / name)]) == 0
            assert main(["eval", "--query-codes", str(run_dir / "q_img.code"),
                         "--archive-codes", str(run_dir / "r_txt.code"),
                         "--labels", str(data_dir / "labels.i32"),
                         "--direction", "img_to_txt",
                         "--out", str(eval_dir)]) == 0
            snapshot = {}
            for d in (run_dir, eval_dir):
                for p in sorted(d.iterdir()):
                    if p.is_file():
                        snapshot[f"{d.name}/{p.name}"] = p.read_bytes()
            return snapshot

        first = one_run()
        second = one_run()
        same = (first.keys() == second.keys()
                and all(first[k] == second[k] for k in first))
        checked = ", ".join(sorted(first))
        report("criterion 7 (determinism)", same, f"compared: {checked}")
        assert first.keys() == second.keys()
        for k in first:
            assert first[k] == second[k], f"{k} differs between identical runs"
