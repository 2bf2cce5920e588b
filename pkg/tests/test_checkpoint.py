"""Checkpoint format: bit-exact round trips and behavioral identity."""

import hashlib
from pathlib import Path

import numpy as np
import pytest
import torch

from newscraft.checkpoint import load_checkpoint, save_checkpoint
from newscraft.config import ModelConfig
from newscraft.errors import ManifestError
from newscraft.estimator import fit_binners
from newscraft.network import SampleTensors, build_network
from newscraft.synth import SynthSpec, generate_corpus
from newscraft.trainer import predict_scores


def _digest_tree(root: Path) -> dict[str, str]:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def _setup(seed=0, **cfg_overrides):
    spec = SynthSpec(n_samples=12)
    dims, samples = generate_corpus(spec, seed=seed)
    base = dict(dim=16, heads=2, co_heads=2, ff_mult=2, twoway_dim=16,
                twoway_heads=2, n_duration_bins=4, seed=seed)
    base.update(cfg_overrides)
    cfg = ModelConfig(**base).validate()
    binners = fit_binners(samples, cfg.n_duration_bins) if cfg.with_temporal() else None
    net = build_network(cfg, dims, binners)
    return net, cfg, dims, binners, samples


def test_save_load_save_is_byte_identical(tmp_path):
    net, cfg, dims, binners, _ = _setup()
    a = tmp_path / "a"
    save_checkpoint(a, net, cfg, dims, binners)
    net2, cfg2, dims2, binners2 = load_checkpoint(a)
    b = tmp_path / "b"
    save_checkpoint(b, net2, cfg2, dims2, binners2)
    assert _digest_tree(a) == _digest_tree(b)


def test_parameters_restored_exactly(tmp_path):
    net, cfg, dims, binners, samples = _setup(seed=3)
    save_checkpoint(tmp_path / "c", net, cfg, dims, binners)
    net2, _, _, _ = load_checkpoint(tmp_path / "c")
    for (n1, t1), (n2, t2) in zip(net.state_dict().items(), net2.state_dict().items()):
        assert n1 == n2
        assert torch.equal(t1, t2), n1
    tensors = [SampleTensors.from_sample(s) for s in samples[:4]]
    assert np.array_equal(predict_scores(net, tensors), predict_scores(net2, tensors))


def test_round_trip_many_random_configs(tmp_path):
    rng = np.random.default_rng(0)
    variants = [
        dict(),
        dict(components=("SEN", "SEM")),
        dict(components=("SPA", "TEM")),
        dict(components=("SEN", "TEM")),
        dict(fusion="EARLY"),
        dict(fusion="SUM_SIGMOID"),
        dict(head_depth=2),
        dict(twoway_blocks=1),
    ]
    for i, overrides in enumerate(variants):
        for r in range(3):
            net, cfg, dims, binners, _ = _setup(seed=int(rng.integers(100)), **overrides)
            with torch.no_grad():  # perturb so every round trip carries fresh values
                for p in net.parameters():
                    p.add_(torch.randn_like(p) * 0.1)
            d = tmp_path / f"v{i}_{r}"
            save_checkpoint(d, net, cfg, dims, binners)
            net2, _, _, _ = load_checkpoint(d)
            for t1, t2 in zip(net.state_dict().values(), net2.state_dict().values()):
                assert torch.equal(t1, t2)


def test_degenerate_binner_round_trips(tmp_path):
    # all-identical durations -> zero bin edges -> zero-size buffers
    import warnings

    import torch as _torch

    from newscraft.encodings import DurationEncoder, fit_duration_bins

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        binner = fit_duration_bins([2.0] * 8, [0.5] * 8, n_bins=4)
    assert binner.n_abs_bins == 1
    net, cfg, dims, _, _ = _setup()
    # swap in the degenerate binners on a fresh network
    from newscraft.network import build_network
    net = build_network(cfg, dims, {"text": binner, "visual": binner})
    save_checkpoint(tmp_path / "deg", net, cfg, dims,
                    {"text": binner, "visual": binner})
    net2, _, _, binners2 = load_checkpoint(tmp_path / "deg")
    assert binners2["text"].n_abs_bins == 1
    for t1, t2 in zip(net.state_dict().values(), net2.state_dict().values()):
        assert torch.equal(t1, t2)
    enc = DurationEncoder(binners2["text"], 8)
    assert enc(123.0, 0.9).shape == (8,)


def test_mismatched_parameter_shape_rejected(tmp_path):
    import json
    net, cfg, dims, binners, _ = _setup()
    save_checkpoint(tmp_path, net, cfg, dims, binners)
    meta = json.loads((tmp_path / "checkpoint.json").read_text())
    meta["parameters"][0]["shape"] = [1, 1]
    (tmp_path / "checkpoint.json").write_text(json.dumps(meta))
    with pytest.raises(ManifestError, match="shape"):
        load_checkpoint(tmp_path)


def test_unrecognized_checkpoint_rejected(tmp_path):
    (tmp_path / "checkpoint.json").write_text('{"format": "other"}')
    with pytest.raises(ManifestError, match="recognized"):
        load_checkpoint(tmp_path)
