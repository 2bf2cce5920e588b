"""Shared test fixtures and the finite-difference gradient oracle."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
import torch
from hypothesis import settings

# deterministic property-test runs; reproducibility is a project contract
settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")

from newscraft.dataset import (
    AnalysisAnnotations,
    FeatureBundle,
    FeatureDims,
    NewsVideoSample,
    Segment,
    SegmentSequence,
)


def central_difference_gradients(params: list[torch.Tensor], scalar_fn,
                                 eps: float = 1e-6) -> list[torch.Tensor]:
    """Independent gradient oracle: central differences of ``scalar_fn``.

    Perturbs every element of every tensor in ``params`` in place and
    evaluates the scalar twice; never touches autograd.
    """
    grads = []
    for p in params:
        flat = p.data.reshape(-1)
        g = torch.zeros_like(flat)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + eps
            plus = float(scalar_fn())
            flat[i] = orig - eps
            minus = float(scalar_fn())
            flat[i] = orig
            g[i] = (plus - minus) / (2.0 * eps)
        grads.append(g.reshape(p.shape))
    return grads


def assert_grads_match(module: torch.nn.Module, scalar_fn,
                       rtol: float = 1e-4, atol: float = 1e-7,
                       eps: float = 1e-6) -> None:
    """Compare autograd gradients of every parameter against central
    finite differences; the module must already be float64 and in eval mode."""
    module.zero_grad(set_to_none=True)
    loss = scalar_fn()
    loss.backward()
    names, params = zip(*[(n, p) for n, p in module.named_parameters()])
    with torch.no_grad():
        fd = central_difference_gradients(list(params), scalar_fn, eps=eps)
    for name, p, g_fd in zip(names, params, fd):
        g = p.grad if p.grad is not None else torch.zeros_like(p)
        err = (g - g_fd).abs()
        bound = atol + rtol * g_fd.abs()
        worst = (err - bound).max().item()
        assert (err <= bound).all(), (
            f"gradient mismatch for {name}: worst excess {worst:.3e}, "
            f"max analytic {g.abs().max():.3e}, max fd {g_fd.abs().max():.3e}")


def weighted_sum(output: torch.Tensor, seed: int = 0) -> torch.Tensor:
    """Deterministic scalar probe over an arbitrary-shaped output."""
    gen = torch.Generator().manual_seed(seed)
    w = torch.randn(output.shape, generator=gen, dtype=output.dtype)
    return (output * w).sum()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_sample(rng, sample_id="s0", label=0, hours=0,
                d_sa=6, d_st=6, d_ct=8, d_cv=8, d_img=10, g=4,
                n_boxes=2, probs=None, pixels=None,
                text_intervals=((0, 30), (40, 90)),
                vis_intervals=((0, 50), (51, 119)),
                vis_frame_counts=(2, 3),
                fps=30.0, vframes=120) -> NewsVideoSample:
    """Small hand-sized sample for unit tests."""
    boxes = np.clip(rng.uniform(0.1, 0.4, size=(n_boxes, 4)), 0, 1).astype(np.float32)
    boxes[:, 2:] = np.clip(boxes[:, :2] + 0.3, 0, 1)
    text_segs = [Segment(rng.normal(size=d_ct).astype(np.float32), a, b)
                 for a, b in text_intervals]
    vis_segs = [Segment(rng.normal(size=(k, d_cv)).astype(np.float32), a, b)
                for (a, b), k in zip(vis_intervals, vis_frame_counts)]
    sample = NewsVideoSample(
        id=sample_id,
        published_at=datetime(2022, 1, 1, tzinfo=timezone.utc) + timedelta(hours=int(hours)),
        label=label,
        bundle=FeatureBundle(
            sent_audio=rng.normal(size=(3, d_sa)).astype(np.float32),
            sent_text=rng.normal(size=(4, d_st)).astype(np.float32),
            sem_text=rng.normal(size=(5, d_ct)).astype(np.float32),
            sem_frames=rng.normal(size=(3, d_cv)).astype(np.float32),
            ocr_frame_grid=rng.normal(size=(g, g, d_img)).astype(np.float32),
            ocr_boxes=boxes,
        ),
        text_segments=SegmentSequence("text", text_segs, fps=fps, vframes=vframes),
        visual_segments=SegmentSequence("visual", vis_segs, fps=fps, vframes=vframes),
        analysis=AnalysisAnnotations(audio_sentiment_probs=probs, ocr_text_pixels=pixels,
                                     pixel_counts=(len(pixels),) if pixels is not None else None),
    )
    sample.validate()
    return sample


def toy_dims(d_sa=6, d_st=6, d_ct=8, d_cv=8, d_img=10, g=4) -> FeatureDims:
    return FeatureDims(sent_audio=d_sa, sent_text=d_st, sem_text=d_ct,
                       sem_frame=d_cv, grid_feat=d_img, grid_size=g,
                       sentiment_classes=("angry", "happy", "neutral", "sad"))
