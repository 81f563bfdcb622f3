import numpy as np
import pytest

from wsd_fixtures import train_instance
from senseknn.corpus import Corpus, Lexelt, Pos, Split
from senseknn.errors import (
    EmptySelectionError,
    ProjectionError,
    UserArgumentError,
)
from senseknn.tsne import (
    LegendEntry,
    PlotPoint,
    ProjectionConfig,
    SensePlotData,
    build_plot_data,
    emit_plot,
    joint_affinities,
    perplexity_calibration,
    plot_data_from_json,
    plot_data_to_json,
    project,
    select_lexelt_points,
    squared_distances,
)

BANK = Lexelt("bank", Pos.NOUN)


# --------------------------------------------------------------------------
# Perplexity calibration


def test_equidistant_points_share_sigma():
    # rows of the identity matrix are pairwise equidistant
    d2 = squared_distances(np.eye(4))
    sigmas, cond = perplexity_calibration(d2, perplexity=2.0)
    assert np.allclose(sigmas, sigmas[0])
    # each row is uniform over the other three points
    off = cond[0][1:]
    assert np.allclose(off, 1.0 / 3.0)


def test_calibration_hits_entropy_target():
    rng = np.random.RandomState(42)
    for n, perp in ((10, 5.0), (50, 30.0), (200, 30.0)):
        x = rng.standard_normal((n, 24))
        d2 = squared_distances(x)
        sigmas, cond = perplexity_calibration(d2, perp)
        # recompute the conditionals from the returned sigmas, independently
        for i in range(0, n, max(1, n // 7)):
            row = np.delete(d2[i], i)
            p = np.exp(-row / (2.0 * sigmas[i] ** 2))
            p /= p.sum()
            entropy = -(p * np.log2(p)).sum()
            assert 2.0 ** entropy == pytest.approx(perp, abs=1e-3)
            assert entropy == pytest.approx(np.log2(perp), abs=1e-4)


def test_two_points_force_unit_conditional():
    d2 = squared_distances(np.array([[0.0, 0.0], [3.0, 4.0]]))
    _, cond = perplexity_calibration(d2, perplexity=1.5)
    assert cond[0, 1] == 1.0 and cond[1, 0] == 1.0
    assert cond[0, 0] == 0.0 and cond[1, 1] == 0.0


def test_calibration_input_validation():
    with pytest.raises(ProjectionError, match="finite"):
        perplexity_calibration(np.array([[0.0, np.nan], [np.nan, 0.0]]), 1.0)
    with pytest.raises(ProjectionError, match="perplexity"):
        perplexity_calibration(squared_distances(np.eye(4)), 4.0)
    with pytest.raises(ProjectionError, match="square"):
        perplexity_calibration(np.zeros((2, 3)), 1.0)


# --------------------------------------------------------------------------
# Joint affinities


def test_joint_affinity_invariants_on_random_input():
    rng = np.random.RandomState(0)
    for _ in range(5):
        x = rng.standard_normal((10, 6))
        _, cond = perplexity_calibration(squared_distances(x), 4.0)
        p = joint_affinities(cond)
        assert np.array_equal(p, p.T)
        assert abs(p.sum() - 1.0) < 1e-9
        assert np.count_nonzero(np.diag(p)) == 0
        assert (p >= 0).all()


def test_symmetric_conditionals_stay_proportional():
    cond = np.array(
        [
            [0.0, 0.5, 0.25, 0.25],
            [0.5, 0.0, 0.25, 0.25],
            [0.25, 0.25, 0.0, 0.5],
            [0.25, 0.25, 0.5, 0.0],
        ]
    )
    p = joint_affinities(cond)
    assert np.allclose(p, cond / cond.sum())


def test_joint_affinities_validates_rows():
    with pytest.raises(ProjectionError, match="sum to 1"):
        joint_affinities(np.full((3, 3), 0.5))


# --------------------------------------------------------------------------
# Projection


def _two_clusters(n_per=20, dim=16, seed=7, gap=5.0):
    rng = np.random.RandomState(seed)
    a = rng.standard_normal((n_per, dim)) * 0.5 + gap
    b = rng.standard_normal((n_per, dim)) * 0.5 - gap
    return np.vstack([a, b]), [0] * n_per + [1] * n_per


def test_project_output_shape_and_centering():
    x, _ = _two_clusters(n_per=10)
    coords, trace = project(x, ProjectionConfig(seed=1, iterations=300))
    assert coords.shape == (20, 2)
    assert np.isfinite(coords).all()
    assert np.allclose(coords.mean(axis=0), 0.0, atol=1e-9)
    assert len(trace) == 30


def test_project_separates_two_clusters():
    pytest.importorskip("sklearn")
    from sklearn.metrics import silhouette_score

    x, labels = _two_clusters()
    coords, _ = project(x, ProjectionConfig(seed=3))
    assert silhouette_score(coords, labels) > 0.5


def test_kl_trace_is_non_negative_and_improves_after_exaggeration():
    x, _ = _two_clusters(n_per=15)
    _, trace = project(x, ProjectionConfig(seed=2, iterations=1000))
    assert all(v >= 0.0 for v in trace)
    kl_at_250 = trace[250 // 10 - 1]
    assert trace[-1] < kl_at_250


def test_project_is_deterministic():
    x, _ = _two_clusters(n_per=8)
    cfg = ProjectionConfig(seed=11, iterations=200)
    first, t1 = project(x, cfg)
    second, t2 = project(x, cfg)
    assert np.array_equal(first, second) and t1 == t2


def test_project_is_equivariant_to_input_order():
    rng = np.random.RandomState(19)
    x = rng.standard_normal((24, 10))
    cfg = ProjectionConfig(seed=4, iterations=1000)
    base, t1 = project(x, cfg)
    perm = rng.permutation(24)
    permuted, t2 = project(x[perm], cfg)
    assert np.array_equal(permuted, base[perm])
    assert t1 == t2


def test_project_divergence_names_iteration():
    x, _ = _two_clusters(n_per=5)
    with pytest.raises(ProjectionError, match=r"iteration \d+"):
        project(x, ProjectionConfig(seed=1, learning_rate=1e305, iterations=50))


def test_project_rejects_tiny_or_bad_input():
    with pytest.raises(ProjectionError):
        project(np.ones((2, 3)), ProjectionConfig(seed=0))
    with pytest.raises(ProjectionError):
        project(np.full((5, 3), np.nan), ProjectionConfig(seed=0))


def test_default_perplexity_rule():
    assert ProjectionConfig().resolve_perplexity(100) == 30.0
    assert ProjectionConfig().resolve_perplexity(31) == 10.0
    assert ProjectionConfig().resolve_perplexity(4) == 1.0
    assert ProjectionConfig().resolve_perplexity(3) == 1.0
    assert ProjectionConfig(perplexity=12.5).resolve_perplexity(100) == 12.5


# --------------------------------------------------------------------------
# Point selection


def _bank_corpus(sense_counts: dict[str, int]):
    instances = []
    i = 0
    for sense, count in sense_counts.items():
        for _ in range(count):
            instances.append(train_instance(f"b{i}", "bank.n", [sense]))
            i += 1
    return Corpus(
        tuple(instances), frozenset(inst.lexelt for inst in instances), Split.TRAIN
    )


def _store_for(corpus, dim=8, seed=0):
    rng = np.random.RandomState(seed)
    return {
        inst.id: rng.standard_normal(dim).astype(np.float32)
        for inst in corpus.instances
    }


def test_min_freq_filter_keeps_qualifying_senses():
    corpus = _bank_corpus({"A": 5, "B": 2, "C": 3})
    store = _store_for(corpus)
    selection = select_lexelt_points(corpus, store, BANK, min_freq=3)
    assert len(selection.senses) == 8
    assert set(selection.senses) == {"A", "C"}
    assert selection.frequencies == {"A": 5, "C": 3}


def test_min_freq_one_keeps_everything():
    corpus = _bank_corpus({"A": 5, "B": 2, "C": 3})
    store = _store_for(corpus)
    selection = select_lexelt_points(corpus, store, BANK, min_freq=1)
    assert len(selection.senses) == 10


def test_multi_sense_instance_yields_one_point_per_sense():
    inst = train_instance("m0", "bank.n", ["A", "B"])
    others = [train_instance(f"m{i}", "bank.n", ["A", "B"]) for i in range(1, 3)]
    corpus = Corpus(
        (inst, *others), frozenset({inst.lexelt}), Split.TRAIN
    )
    store = _store_for(corpus)
    selection = select_lexelt_points(corpus, store, BANK, min_freq=3)
    assert len(selection.senses) == 6
    assert selection.instance_ids.count("m0") == 2


def test_nothing_to_plot_raises():
    corpus = _bank_corpus({"A": 2})
    store = _store_for(corpus)
    with pytest.raises(EmptySelectionError, match="nothing to plot"):
        select_lexelt_points(corpus, store, BANK, min_freq=3)


def test_unknown_lexelt_lists_available():
    corpus = _bank_corpus({"A": 3})
    with pytest.raises(UserArgumentError, match="bank.n"):
        select_lexelt_points(corpus, {}, Lexelt("river", Pos.NOUN))


# --------------------------------------------------------------------------
# Plot data and emission


def _demo_plot_data():
    return SensePlotData(
        lexelt="bank.n",
        model_tag="demo",
        seed=5,
        config={"perplexity": 2.0},
        points=[
            PlotPoint(0.0, 1.0, "A", "i0"),
            PlotPoint(1.0, -1.0, "A", "i1"),
            PlotPoint(-2.0, 0.5, "B", "i2"),
        ],
        legend=[LegendEntry("A", 4, "river bank"), LegendEntry("B", 3, "money bank")],
        kl_trace=[1.25, 0.5],
    )


def test_plot_json_round_trip():
    data = _demo_plot_data()
    assert plot_data_from_json(plot_data_to_json(data)) == data


def test_svg_contains_legend_and_is_deterministic():
    data = _demo_plot_data()
    svg1 = emit_plot(data, "svg")
    svg2 = emit_plot(data, "svg")
    assert svg1 == svg2
    text = svg1.decode("utf-8")
    assert "river bank (4)" in text
    assert "money bank (3)" in text


def test_emit_plot_rejects_unknown_format():
    with pytest.raises(UserArgumentError):
        emit_plot(_demo_plot_data(), "png")


def test_build_plot_data_end_to_end():
    corpus = _bank_corpus({"A": 6, "B": 6})
    rng = np.random.RandomState(1)
    store = {}
    for i, inst in enumerate(corpus.instances):
        center = 4.0 if "A" in inst.gold_senses else -4.0
        store[inst.id] = (rng.standard_normal(8) * 0.3 + center).astype(np.float32)
    data = build_plot_data(
        corpus, store, BANK,
        ProjectionConfig(seed=2, iterations=400),
        min_freq=3, model_tag="demo",
        labels={"A": "first sense"},
    )
    assert data.lexelt == "bank.n"
    assert len(data.points) == 12
    assert [e.label for e in data.legend] == ["first sense", "B"]
    assert data.config["perplexity"] == 3.0
    assert all(v >= 0 for v in data.kl_trace)
