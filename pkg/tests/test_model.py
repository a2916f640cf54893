"""Encoder math against an independent straight-line reimplementation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reference_model import (
    ref_fuse,
    ref_forward,
    ref_gat_alphas,
    ref_gat_layer,
    ref_ggnn,
    ref_inter_encode,
    ref_loss,
    ref_readout,
    ref_readout_alphas,
    ref_scores,
)
from sessionrec import gradkit as gk
from sessionrec.errors import ConfigError
from sessionrec.graphs import build_inter_graph, build_intra_graph
from sessionrec.model import (
    GatHead,
    ModelConfig,
    build_params,
    forward,
    fuse,
    gat_layer,
    ggnn_encode,
    inter_encode,
    loss,
    param_specs,
    score_and_predict,
    session_readout,
)

RNG = np.random.default_rng(777)


def small_config(**overrides):
    base = dict(vocab_size=12, dim=6, heads=3, gat_layers=2)
    base.update(overrides)
    return ModelConfig(**base)


# ---------------------------------------------------------------------------
# configuration


def test_config_validation():
    for bad in [
        dict(vocab_size=0),
        dict(dim=0),
        dict(heads=0),
        dict(gat_layers=0),
        dict(ggnn_steps=0),
        dict(variant="bogus"),
        dict(loss_form="hinge"),
    ]:
        with pytest.raises(ConfigError):
            small_config(**bad).validate()


def test_config_dict_roundtrip_ignores_unknown_keys():
    cfg = small_config(variant="avg_pool", share_readout=True)
    doc = cfg.to_dict()
    doc["leftover"] = "ignored"
    assert ModelConfig.from_dict(doc) == cfg
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({"vocab_size": 3, "heads": -1})


def test_param_inventory_shapes_and_groups():
    cfg = small_config()
    specs = {s.name: s for s in param_specs(cfg)}
    d = cfg.dim
    assert specs["embedding"].shape == (12, d)
    assert specs["intra.w_update"].shape == (d, 2 * d)
    assert specs["inter.layer0.head0.w"].shape == (d, d)
    assert specs["inter.layer1.head2.w"].shape == (d, cfg.heads * d)
    assert specs["inter.layer1.head0.attn"].shape == (2 * d,)
    assert specs["fusion.bias"].shape == (d,)
    for name, s in specs.items():
        expected = "inter" if name.startswith(("inter.", "inter_readout.")) else "intra_shared"
        assert s.group == expected, name


def test_param_inventory_respects_sharing_flags():
    names = {s.name for s in param_specs(small_config(share_readout=True))}
    assert not any(n.startswith("inter_readout.") for n in names)
    assert "embedding_inter" not in names

    sep = {s.name: s for s in param_specs(small_config(separate_embeddings=True))}
    assert sep["embedding_inter"].shape == (12, 6)
    assert sep["embedding_inter"].group == "inter"


def test_bound_views_alias_shared_tensors():
    shared = build_params(small_config(share_readout=True), seed=1)
    assert shared.inter_readout is shared.intra_readout
    assert shared.embedding_inter is shared.embedding
    split = build_params(small_config(separate_embeddings=True), seed=1)
    assert split.embedding_inter is not split.embedding


# ---------------------------------------------------------------------------
# encoder pieces, each against the reference route


def test_ggnn_matches_reference():
    cfg = small_config()
    params = build_params(cfg, seed=11)
    v = params.store.values()
    graph = build_intra_graph([0, 1, 2, 1, 0, 3])
    rows = RNG.normal(0.0, 1.0, (len(graph.node_items), cfg.dim))
    for steps in (1, 3):
        mine = ggnn_encode(graph, gk.Tensor(rows), params.intra, steps).values
        ref = ref_ggnn(graph.a_out, graph.a_in, rows, v, steps)
        assert np.allclose(mine, ref, atol=1e-10)


def test_readout_matches_reference_and_is_unnormalized():
    cfg = small_config()
    params = build_params(cfg, seed=12)
    v = params.store.values()
    rows = RNG.normal(0.0, 1.0, (5, cfg.dim))
    mine = session_readout(gk.Tensor(rows), 4, params.intra_readout).values
    assert np.allclose(mine, ref_readout(rows, v, "intra_readout"), atol=1e-10)

    # the attention weights are scores, not a distribution
    alphas = ref_readout_alphas(rows, v, "intra_readout")
    assert abs(alphas.sum() - 1.0) > 1e-3

    mean_mine = session_readout(
        gk.Tensor(rows), 4, params.intra_readout, attention=False
    ).values
    assert np.allclose(
        mean_mine, ref_readout(rows, v, "intra_readout", attention=False), atol=1e-10
    )


def gat_fixture(n_heads=3, d=6, width=None):
    graph = build_inter_graph([0, 1, 2], [[2, 3, 4], [4, 5]])
    n = len(graph.node_items)
    width = width or d
    h = RNG.normal(0.0, 1.0, (n, width))
    heads = []
    for _ in range(n_heads):
        w = RNG.normal(0.0, 0.5, (d, width))
        attn = RNG.normal(0.0, 0.5, 2 * d)
        heads.append((w, attn))
    return graph, h, heads


def test_gat_layer_matches_reference():
    graph, h, heads = gat_fixture()
    native_heads = [GatHead(w=gk.Tensor(w), attn=gk.Tensor(a)) for w, a in heads]
    for average in (False, True):
        mine = gat_layer(graph.mask(), gk.Tensor(h), native_heads, average=average).values
        ref = ref_gat_layer(graph.adjacency, h, heads, average=average)
        assert mine.shape == ref.shape
        assert np.allclose(mine, ref, atol=1e-10)


def test_gat_layer_uniform_attention_matches_reference():
    graph, h, heads = gat_fixture()
    native_heads = [GatHead(w=gk.Tensor(w), attn=gk.Tensor(a)) for w, a in heads]
    mine = gat_layer(
        graph.mask(), gk.Tensor(h), native_heads, average=True, uniform=True
    ).values
    ref = ref_gat_layer(graph.adjacency, h, heads, average=True, uniform=True)
    assert np.allclose(mine, ref, atol=1e-10)


def test_gat_attention_rows_are_distributions():
    graph, h, heads = gat_fixture()
    w, attn = heads[0]
    rows = ref_gat_alphas(graph.adjacency, h, w, attn)
    for i, row in rows.items():
        weights = np.array(list(row.values()))
        assert abs(weights.sum() - 1.0) < 1e-9
        assert ((weights > 0) & (weights < 1)).all()
        assert set(row) == set(graph.adjacency[i])


def test_stacked_gat_matches_reference():
    cfg = small_config()
    params = build_params(cfg, seed=13)
    v = params.store.values()
    graph = build_inter_graph([0, 1, 2], [[2, 3, 4], [4, 5]])
    rows = RNG.normal(0.0, 1.0, (len(graph.node_items), cfg.dim))
    mine = inter_encode(graph, gk.Tensor(rows), params.inter_layers).values
    ref = ref_inter_encode(graph.adjacency, rows, v, cfg.heads, cfg.gat_layers)
    assert np.allclose(mine, ref, atol=1e-10)


def test_fuse_matches_reference_and_interpolates():
    cfg = small_config()
    params = build_params(cfg, seed=14)
    v = params.store.values()
    a = RNG.normal(0.0, 1.0, cfg.dim)
    b = RNG.normal(0.0, 1.0, cfg.dim)
    mine = fuse(gk.Tensor(a), gk.Tensor(b), params.fusion).values
    assert np.allclose(mine, ref_fuse(a, b, v), atol=1e-12)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    assert (mine >= lo - 1e-12).all() and (mine <= hi + 1e-12).all()


def test_scores_and_losses_match_reference():
    emb = RNG.normal(0.0, 1.0, (7, 4))
    s_h = RNG.normal(0.0, 1.0, 4)
    yhat = score_and_predict(gk.Tensor(s_h), gk.Tensor(emb))
    assert np.allclose(yhat.values, ref_scores(s_h, emb), atol=1e-12)
    assert abs(yhat.values.sum() - 1.0) < 1e-12

    for form in ("binary_ce", "categorical_ce"):
        mine = loss(yhat, target=3, form=form).item()
        assert np.isclose(mine, ref_loss(yhat.values, 3, form), atol=1e-10)

    extreme = gk.Tensor([1e-15, 1.0 - 1e-15])
    assert np.isclose(
        loss(extreme, 0).item(), ref_loss(extreme.values, 0), atol=1e-9
    )


def test_loss_rejects_bad_targets_and_forms():
    yhat = gk.Tensor([0.5, 0.5])
    with pytest.raises(ConfigError):
        loss(yhat, target=2)
    with pytest.raises(ConfigError):
        loss(yhat, target=-1)
    with pytest.raises(ConfigError):
        loss(yhat, target=0, form="hinge")


# ---------------------------------------------------------------------------
# full forward pass


PREFIX = [0, 1, 2, 1]
NEIGHBORS = [[2, 3, 4], [5, 1]]


def forward_pair(cfg, seed=21):
    params = build_params(cfg, seed=seed)
    yhat, s_h = forward(PREFIX, NEIGHBORS, params, cfg)
    ref_yhat, ref_s = ref_forward(
        PREFIX,
        NEIGHBORS,
        params.store.values(),
        cfg.dim,
        heads=cfg.heads,
        layers=cfg.gat_layers,
        variant=cfg.variant,
        share_readout=cfg.share_readout,
        separate_embeddings=cfg.separate_embeddings,
    )
    return yhat.values, s_h.values, ref_yhat, ref_s


@pytest.mark.parametrize(
    "variant",
    ["full", "intra_only", "inter_only", "avg_pool", "mean_gat", "mean_readout"],
)
def test_forward_matches_reference(variant):
    cfg = small_config(variant=variant)
    yhat, s_h, ref_yhat, ref_s = forward_pair(cfg)
    assert np.allclose(s_h, ref_s, atol=1e-9)
    assert np.allclose(yhat, ref_yhat, atol=1e-9)


@pytest.mark.parametrize(
    "flags",
    [dict(share_readout=True), dict(separate_embeddings=True)],
)
def test_forward_matches_reference_with_sharing_flags(flags):
    cfg = small_config(**flags)
    yhat, s_h, ref_yhat, ref_s = forward_pair(cfg)
    assert np.allclose(yhat, ref_yhat, atol=1e-9)
    assert np.allclose(s_h, ref_s, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(
    st.lists(st.integers(0, 7), min_size=1, max_size=6),
    st.lists(
        st.lists(st.integers(0, 7), min_size=1, max_size=4), min_size=0, max_size=2
    ),
)
def test_forward_matches_reference_on_random_sessions(prefix, neighbors):
    cfg = ModelConfig(vocab_size=8, dim=4, heads=2, gat_layers=2)
    params = build_params(cfg, seed=5)
    yhat, _ = forward(prefix, neighbors, params, cfg)
    ref_yhat, _ = ref_forward(
        prefix, neighbors, params.store.values(), cfg.dim, heads=2, layers=2
    )
    assert np.allclose(yhat.values, ref_yhat, atol=1e-9)


def test_neighbor_listing_order_is_irrelevant():
    cfg = small_config()
    params = build_params(cfg, seed=22)
    a, _ = forward(PREFIX, NEIGHBORS, params, cfg)
    b, _ = forward(PREFIX, list(reversed(NEIGHBORS)), params, cfg)
    assert np.allclose(a.values, b.values, atol=1e-12)


def test_intra_only_ignores_neighbors_entirely():
    cfg = small_config(variant="intra_only")
    params = build_params(cfg, seed=23)
    with_neighbors, _ = forward(PREFIX, NEIGHBORS, params, cfg)
    without, _ = forward(PREFIX, [], params, cfg)
    assert (with_neighbors.values == without.values).all()


def test_forward_rejects_empty_prefix():
    cfg = small_config()
    params = build_params(cfg, seed=24)
    with pytest.raises(ConfigError):
        forward([], NEIGHBORS, params, cfg)


def test_probabilities_form_a_distribution():
    cfg = small_config()
    params = build_params(cfg, seed=25)
    yhat, _ = forward(PREFIX, NEIGHBORS, params, cfg)
    assert (yhat.values > 0).all()
    assert abs(yhat.values.sum() - 1.0) < 1e-9


def test_full_loss_is_differentiable_end_to_end():
    """One backward pass reaches every parameter group with finite numbers."""
    cfg = ModelConfig(vocab_size=8, dim=4, heads=2, gat_layers=2)
    params = build_params(cfg, seed=26)
    yhat, _ = forward([0, 1, 2], [[3, 4, 1]], params, cfg)
    total = loss(yhat, target=4)
    names = params.store.names()
    grads = gk.backward(total, wrt=[params.store[n] for n in names])
    by_name = dict(zip(names, grads))
    assert all(np.isfinite(g).all() for g in grads)
    assert np.abs(by_name["embedding"]).max() > 0
    assert np.abs(by_name["fusion.bias"]).max() > 0
    assert np.abs(by_name["intra.w_update"]).max() > 0
    assert np.abs(by_name["inter.layer0.head0.w"]).max() > 0
