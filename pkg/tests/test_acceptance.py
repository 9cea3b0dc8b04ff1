"""Acceptance gate: eight package-level criteria.

The terminal summary (see conftest) prints one PASS/FAIL line per
criterion after the run.
"""

import itertools
import os
import time
import warnings

import numpy as np
import pytest

from polfuse import checkpoint, cli, config, losses, metrics, stokes, training
from polfuse.autodiff import Tensor, no_grad, use_dtype
from polfuse.errors import ChecksumError
from polfuse.network import MLSN, NetworkConfig, SwinBlock

from helpers import (
    central_diff,
    make_correlated_dataset,
    make_dataset,
    natural_image,
    scalar_ms_ssim,
    scalar_ssim,
)
from test_gradcheck import TOL as OP_TOL
from test_gradcheck import run_all_op_checks

SMALL_NET = dict(base_channels=8, window=2, heads=2, cbam_reduction=4)


def test_criterion_1_gradient_oracle():
    start = time.monotonic()
    errors = run_all_op_checks()
    assert errors, "no operations checked"
    for name, err in errors.items():
        assert err < OP_TOL, "%s gradient error %.2e" % (name, err)

    # end-to-end: finite differences through the full small network
    cfg = NetworkConfig(**SMALL_NET)
    with use_dtype(np.float64):
        model = MLSN(cfg, rng=0)
        params = model.model_params()
        rng = np.random.default_rng(7)
        s0_arr = rng.random((1, 1, 16, 16))
        dolp_arr = rng.random((1, 1, 16, 16))

        def run(s0_data):
            out = model(
                Tensor(s0_data, dtype=np.float64),
                Tensor(dolp_arr, dtype=np.float64),
            )
            return float(out.data.mean())

        from polfuse import ops

        s0 = Tensor(s0_arr, dtype=np.float64, requires_grad=True)
        loss = ops.mean(model(s0, Tensor(dolp_arr, dtype=np.float64)))
        params.zero_grad()
        loss.backward()
        for index in [(0, 0, 3, 4), (0, 0, 10, 12), (0, 0, 15, 15)]:
            numeric = central_diff(run, s0_arr, index)
            rel = abs(s0.grad[index] - numeric) / max(abs(numeric), 1e-8)
            assert rel < 1e-3, "input gradient error %.2e at %r" % (rel, index)

        def run_param(param, arr):
            saved = param.tensor.data.copy()
            param.tensor.data[...] = arr
            try:
                out = model(
                    Tensor(s0_arr, dtype=np.float64),
                    Tensor(dolp_arr, dtype=np.float64),
                )
                return float(out.data.mean())
            finally:
                param.tensor.data[...] = saved

        names = params.names()
        for name in (names[0], names[len(names) // 2], names[-1]):
            param = params[name]
            index = np.unravel_index(param.tensor.data.size // 2, param.tensor.shape)
            numeric = central_diff(
                lambda arr: run_param(param, arr), param.tensor.data.copy(), index
            )
            rel = abs(param.tensor.grad[index] - numeric) / max(abs(numeric), 1e-8)
            assert rel < 1e-3, "%s gradient error %.2e" % (name, rel)

    elapsed = time.monotonic() - start
    assert elapsed < 120.0, "gradient oracle took %.1fs" % elapsed


def test_criterion_2_polarization_identities():
    half = np.full((8, 8), 0.5)
    horizontal = stokes.PolarizationStack(
        i0=np.ones((8, 8)), i45=half, i90=np.zeros((8, 8)), i135=half
    )
    products = stokes.stokes_from_angles(horizontal)
    assert np.max(np.abs(products.dolp - 1.0)) < 1e-6
    assert np.max(np.abs(products.aop)) < 1e-6

    unpolarized = stokes.PolarizationStack(i0=half, i45=half, i90=half, i135=half)
    products = stokes.stokes_from_angles(unpolarized)
    assert np.max(np.abs(products.dolp)) < 1e-6

    diagonal = stokes.PolarizationStack(
        i0=half, i45=np.ones((8, 8)), i90=half, i135=np.zeros((8, 8))
    )
    products = stokes.stokes_from_angles(diagonal)
    assert np.max(np.abs(products.dolp - 1.0)) < 1e-6
    assert np.max(np.abs(products.aop - np.pi / 4)) < 1e-6

    rng = np.random.default_rng(2024)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(100):
            planes = [rng.random((6, 6)) for _ in range(4)]
            base = stokes.stokes_from_angles(stokes.PolarizationStack(*planes)).dolp
            for alpha in (0.1, 0.5, 2.0):
                scaled = stokes.stokes_from_angles(
                    stokes.PolarizationStack(*(alpha * p for p in planes))
                ).dolp
                assert np.max(np.abs(scaled - base)) < 1e-9


def test_criterion_3_loss_unit_values():
    quad = Tensor(np.array([[0.0, 0.0], [1.0, 1.0]])[None, None], dtype=np.float64)
    assert abs(losses.contrast_loss(quad).item() - 0.5) < 1e-6

    def const(v):
        return Tensor(np.full((1, 1, 16, 16), v), dtype=np.float64)

    got = losses.l1_loss(const(0.5), const(0.25), const(0.75)).item()
    assert abs(got - 0.25) < 1e-7

    class _P:
        def __init__(self):
            self.tensor = Tensor(np.array([3.0, 4.0]), dtype=np.float64)

    assert abs(losses.reg_loss([_P()]).item() - 5.0) < 1e-6

    rng = np.random.default_rng(5)
    p, a, b = (Tensor(rng.random((1, 1, 16, 16)), dtype=np.float64) for _ in range(3))
    only = losses.LossWeights(ssim=1.0, l1=0.0, con=0.0, tex=0.0, reg=0.0)
    breakdown, total = losses.total_loss(p, a, b, [_P()], only)
    assert total.item() == breakdown.ssim
    none = losses.LossWeights(ssim=0.0, l1=0.0, con=0.0, tex=0.0, reg=0.0)
    breakdown, total = losses.total_loss(p, a, b, [_P()], none)
    assert total.item() == 0.0


def test_criterion_4_metric_identity_suite():
    for seed in range(20):
        x = natural_image(1000 + seed, size=192)
        report = metrics.evaluate_pair(x, x, x)
        assert abs(report.ssim - 1.0) < 1e-6
        assert abs(report.ms_ssim - 1.0) < 1e-6
        assert abs(report.q_mi - 1.0) < 1e-6
        assert abs(report.vif - 1.0) < 1e-3
        assert report.q_abf >= 0.95

    rng = np.random.default_rng(77)
    for seed in range(3):
        x = natural_image(2000 + seed, size=192)
        y = np.clip(x + rng.normal(0.0, 0.05, x.shape), 0.0, 1.0)
        assert abs(metrics.ssim_pair(x, y) - scalar_ssim(x, y)) < 1e-5
        assert abs(metrics.ms_ssim_pair(x, y) - scalar_ms_ssim(x, y)) < 1e-5


def test_criterion_5_tiny_overfit_convergence(tmp_path):
    start = time.monotonic()
    root = str(tmp_path / "pairs")
    make_correlated_dataset(root, 2, size=64, seed=100)
    cfg = config.RunConfig(
        seed=0,
        batch_size=2,
        epochs=300,  # two pairs per batch: one optimizer step per epoch
        lr=1e-4,
        crop_size=64,
        val_count=1,
        network=NetworkConfig(**SMALL_NET),
    )
    result = training.train_run(cfg, dataset_root=root, out_dir=str(tmp_path / "run"))
    elapsed = time.monotonic() - start
    assert result.final_total < 0.5 * result.initial_total, "loss went %.4f -> %.4f" % (
        result.initial_total,
        result.final_total,
    )
    assert elapsed < 600.0, "overfit run took %.1fs" % elapsed


def test_criterion_6_architecture_contracts():
    cfg = NetworkConfig(**SMALL_NET)
    model = MLSN(cfg, rng=0)
    model.eval()
    rng = np.random.default_rng(11)
    for extent in (100, 128, 37):
        s0 = Tensor(rng.random((1, 1, extent, extent), dtype=np.float32))
        dolp = Tensor(rng.random((1, 1, extent, extent), dtype=np.float32))
        with no_grad():
            out = model(s0, dolp)
        assert out.shape == (1, 1, extent, extent)
        assert np.all(out.data > 0.0) and np.all(out.data < 1.0)

    block = SwinBlock(np.random.default_rng(3), channels=16, window=4, heads=2)
    tokens = Tensor(rng.random((6, 16, 16), dtype=np.float32))
    perm = rng.permutation(16)
    with no_grad():
        base = block.attention_sublayer(tokens)
        permuted = block.attention_sublayer(Tensor(tokens.data[:, perm, :]))
    assert np.array_equal(base.data[:, perm, :], permuted.data)

    name_sets = []
    for cbam, texture, brightness in itertools.product([False, True], repeat=3):
        variant = NetworkConfig(
            use_cbam=cbam,
            use_texture_block=texture,
            use_brightness_branch=brightness,
            **SMALL_NET,
        )
        net = MLSN(variant, rng=0)
        net.eval()
        with no_grad():
            out = net(
                Tensor(rng.random((1, 1, 20, 20), dtype=np.float32)),
                Tensor(rng.random((1, 1, 20, 20), dtype=np.float32)),
            )
        assert out.shape == (1, 1, 20, 20)
        name_sets.append(frozenset(net.model_params().names()))
    assert len(set(name_sets)) == 8


def test_criterion_7_persistence_and_determinism(tmp_path):
    model = MLSN(NetworkConfig(**SMALL_NET), rng=4)
    entries = sorted(
        (name, arr) for name, arr in model.model_params().state_entries()
    )
    blob = checkpoint.serialize_state(entries, "snapshot")
    _, arrays = checkpoint.deserialize_state(blob)
    assert checkpoint.serialize_state(sorted(arrays.items()), "snapshot") == blob

    data_root = str(tmp_path / "scenes")
    make_dataset(data_root, 3, size=48)
    cfg_path = str(tmp_path / "run.cfg")
    cfg = config.RunConfig(
        seed=1, batch_size=2, epochs=2, lr=1e-3, crop_size=32, val_count=1,
        network=NetworkConfig(**SMALL_NET),
    )
    open(cfg_path, "w").write(config.to_text(cfg))
    outs = []
    for run in ("a", "b"):
        out = str(tmp_path / run)
        code = cli.main(
            ["train", "--config", cfg_path, "--data", data_root, "--out", out]
        )
        assert code == 0
        outs.append(out)
    for artefact in (training.LOG_NAME, training.CHECKPOINT_NAME):
        with open(os.path.join(outs[0], artefact), "rb") as fa:
            with open(os.path.join(outs[1], artefact), "rb") as fb:
                assert fa.read() == fb.read()

    tampered = bytearray(
        open(os.path.join(outs[0], training.CHECKPOINT_NAME), "rb").read()
    )
    tampered[len(tampered) // 3] ^= 0x20
    with pytest.raises(ChecksumError):
        checkpoint.deserialize_state(bytes(tampered))


def test_criterion_8_pipeline_equivalence():
    rng = np.random.default_rng(88)
    for _ in range(5):
        cell = rng.uniform(0.1, 0.9, size=4)
        planes = [np.full((24, 24), v) for v in cell]
        stack = stokes.PolarizationStack(*planes)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            mosaic = stokes.mosaic_from_stack(stack)
            via_mosaic = stokes.stokes_from_angles(stokes.demosaic_dofp(mosaic))
            direct = stokes.stokes_from_angles(stack)
        assert np.array_equal(via_mosaic.s0, direct.s0)
        assert np.array_equal(via_mosaic.dolp, direct.dolp)
        assert np.array_equal(via_mosaic.aop, direct.aop)
