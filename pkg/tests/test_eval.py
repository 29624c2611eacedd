import math

import numpy as np
import pytest

from citeflow import (
    GridSpec,
    NodeKind,
    NodeRecord,
    RankParams,
    UsageKind,
    UsageTable,
    build_graph,
    correlation,
    datarank,
    fit_power_law,
    grid_search,
    join_usage,
)
from citeflow.errors import (
    DegenerateVarianceError,
    EmptyIntersectionError,
    EvalError,
    InsufficientDataError,
)
from citeflow.evaluate import export_grid

import oracles
from conftest import graph_from_spec


def usage_of(entries, kind=UsageKind.VISITS):
    return UsageTable(entries=dict(entries), usage_kind=kind)


def pub(eid, year):
    return NodeRecord(eid, NodeKind.PUBLICATION, year)


def ds(eid, year):
    return NodeRecord(eid, NodeKind.DATASET, year)


# --- join_usage ---------------------------------------------------------------


def test_join_partial_overlap():
    g = build_graph([pub("P", 2011), ds("D1", 2010), ds("D2", 2009)],
                    [("P", "D1"), ("P", "D2")])
    scores = np.array([0.5, 0.3, 0.2])
    join = join_usage(scores, usage_of({"D2": 10, "D3": 5}), g)
    assert join.dataset_ids == ["D2"]
    assert join.scores.tolist() == [scores[g.id_index()["D2"]]]
    assert join.usage.tolist() == [10.0]
    assert join.n_usage_unmatched == 1
    assert join.n_graph_unmatched == 1


def test_join_disjoint_raises():
    g = build_graph([pub("P", 2011), ds("D1", 2010)], [("P", "D1")])
    with pytest.raises(EmptyIntersectionError):
        join_usage(np.array([0.5, 0.5]), usage_of({"X": 1}), g)


def test_join_publication_id_does_not_count():
    g = build_graph([pub("P", 2011), ds("D1", 2010)], [("P", "D1")])
    with pytest.raises(EmptyIntersectionError):
        join_usage(np.array([0.5, 0.5]), usage_of({"P": 3}), g)


def test_join_full_overlap_deterministic_order():
    names = [f"D{i}" for i in range(5)]
    g = build_graph([pub("P", 2012)] + [ds(n, 2010) for n in names],
                    [("P", n) for n in names])
    join = join_usage(np.arange(6, dtype=float), usage_of({n: i for i, n in
                                                           enumerate(names)}), g)
    assert join.dataset_ids == sorted(names)
    assert len(join) == 5
    assert join.n_usage_unmatched == 0
    assert join.n_graph_unmatched == 0


# --- correlation ----------------------------------------------------------------


def test_correlation_perfect_line():
    pear, spear = correlation([(1, 2), (2, 4), (3, 6)])
    assert pear == pytest.approx(1.0)
    assert spear == pytest.approx(1.0)


def test_correlation_perfect_negative():
    pear, spear = correlation([(1, 3), (2, 2), (3, 1)])
    assert pear == pytest.approx(-1.0)
    assert spear == pytest.approx(-1.0)


def test_correlation_matches_naive_oracle():
    rng = np.random.default_rng(17)
    for _ in range(10):
        x = rng.random(20)
        y = 0.4 * x + rng.random(20)
        # include ties to exercise average-rank handling
        y[::4] = np.round(y[::4], 1)
        pear, spear = correlation(np.column_stack([x, y]))
        assert pear == pytest.approx(oracles.pearson_oracle(x, y), abs=1e-12)
        assert spear == pytest.approx(oracles.spearman_oracle(x, y), abs=1e-12)


def test_correlation_invariances():
    rng = np.random.default_rng(23)
    x, y = rng.random(15), rng.random(15)
    pear_xy, spear_xy = correlation(np.column_stack([x, y]))
    pear_yx, spear_yx = correlation(np.column_stack([y, x]))
    assert pear_xy == pytest.approx(pear_yx, abs=1e-12)
    assert spear_xy == pytest.approx(spear_yx, abs=1e-12)
    # spearman invariant under strictly monotone transforms
    _, spear_log = correlation(np.column_stack([np.exp(x), y]))
    assert spear_log == pytest.approx(spear_xy, abs=1e-12)


def test_correlation_errors():
    with pytest.raises(InsufficientDataError):
        correlation([(1, 2), (2, 3)])
    with pytest.raises(DegenerateVarianceError):
        correlation([(1, 1), (2, 1), (3, 1)])
    with pytest.raises(DegenerateVarianceError):
        correlation([(2, 1), (2, 5), (2, 3)])


# --- grid search ------------------------------------------------------------------


def planted_setup(n_nodes=120, seed=6):
    rng = np.random.default_rng(seed)
    n, kinds, years, edges, ref = oracles.random_graph(rng, max_nodes=n_nodes,
                                                       dataset_frac=0.3)
    while oracles.DATA not in kinds or sum(k == oracles.DATA for k in kinds) < 5:
        n, kinds, years, edges, ref = oracles.random_graph(rng, max_nodes=n_nodes,
                                                           dataset_frac=0.3)
    g = graph_from_spec(n, kinds, years, edges, ref)
    planted = RankParams(tau_pub=10.0, tau_dataset=5.0, alpha=0.05)
    scores = datarank(g, planted).scores
    usage = {}
    for i in range(n):
        if kinds[i] == oracles.DATA:
            usage[f"N{i}"] = int(round(scores[i] * 1e12))
    return g, usage_of(usage), planted


def test_grid_single_cell():
    g, usage, planted = planted_setup()
    spec = GridSpec(algorithm="datarank", tau_pub_values=[10.0],
                    tau_dataset_values=[5.0], alpha_values=[0.05])
    result = grid_search(g, spec, usage)
    assert len(result.rows) == 1
    assert result.best is result.rows[0]
    assert result.best.pearson >= 0.999


def test_grid_planted_truth_recovered():
    g, usage, planted = planted_setup()
    spec = GridSpec(
        algorithm="datarank",
        tau_pub_values=[1.0, 5.0, 10.0, 20.0],
        tau_dataset_values=[5.0, 10.0, 30.0],
        alpha_values=[0.05, 0.15],
    )
    result = grid_search(g, spec, usage)
    assert len(result.rows) == 24
    best = result.best
    assert (best.tau_pub, best.tau_dataset, best.alpha) == (10.0, 5.0, 0.05)
    assert best.pearson >= 0.999
    result.check_best_invariant()


def test_grid_parallel_matches_sequential():
    g, usage, _ = planted_setup()
    spec = GridSpec(
        algorithm="datarank",
        tau_pub_values=[5.0, 10.0],
        tau_dataset_values=[5.0, 30.0],
        alpha_values=[0.05, 0.15],
    )
    seq = grid_search(g, spec, usage, threads=1)
    par = grid_search(g, spec, usage, threads=2)
    assert seq.rows == par.rows
    assert seq.best == par.best


def test_grid_failed_cells_retained():
    g, usage, _ = planted_setup()
    spec = GridSpec(
        algorithm="datarank-fb",
        tau_pub_values=[10.0],
        tau_dataset_values=[5.0],
        alpha_values=[0.05],
        beta_values=[0.02, 0.5],  # second cell violates alpha > beta
    )
    result = grid_search(g, spec, usage)
    assert len(result.rows) == 2
    ok = [r for r in result.rows if r.status == "ok"]
    failed = [r for r in result.rows if r.status != "ok"]
    assert len(ok) == 1 and len(failed) == 1
    assert failed[0].status == "InvalidParamsError"
    assert math.isnan(failed[0].pearson)
    assert result.best == ok[0]


def test_grid_all_failed_raises():
    g, usage, _ = planted_setup()
    spec = GridSpec(
        algorithm="datarank-fb",
        tau_pub_values=[10.0],
        tau_dataset_values=[5.0],
        alpha_values=[0.05],
        beta_values=[0.9],
    )
    with pytest.raises(EvalError):
        grid_search(g, spec, usage)


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(algorithm="nope", tau_pub_values=[1], tau_dataset_values=[1],
                 alpha_values=[0.05])
    with pytest.raises(ValueError):
        GridSpec(algorithm="datarank", tau_pub_values=[], tau_dataset_values=[1],
                 alpha_values=[0.05])
    with pytest.raises(ValueError):
        GridSpec(algorithm="datarank-fb", tau_pub_values=[1],
                 tau_dataset_values=[1], alpha_values=[0.05])


def test_grid_planted_truth_all_algorithms():
    """Planting usage from any algorithm's scores is recovered by its sweep."""
    rng = np.random.default_rng(13)
    n, kinds, years, edges, ref = oracles.random_graph(rng, max_nodes=80,
                                                       dataset_frac=0.35)
    kinds[0], kinds[1] = oracles.DATA, oracles.PUB
    edges = [(s, d) for s, d in edges if kinds[s] != oracles.DATA]
    g = graph_from_spec(n, kinds, years, edges, ref)
    from citeflow import ALGORITHMS

    cell = RankParams(tau_pub=10.0, tau_dataset=5.0, alpha=0.05, beta=0.02)
    for name, algo in ALGORITHMS.items():
        scores = algo(g, cell).scores
        usage = {
            f"N{i}": int(round(scores[i] * 1e12))
            for i in range(n)
            if kinds[i] == oracles.DATA
        }
        spec = GridSpec(
            algorithm=name,
            tau_pub_values=[5.0, 10.0],
            tau_dataset_values=[5.0, 30.0],
            alpha_values=[0.05, 0.15],
            beta_values=[0.02] if name == "datarank-fb" else None,
        )
        result = grid_search(g, spec, usage_of(usage))
        assert result.best.pearson >= 0.999
        if name in ("datarank", "datarank-fb", "networkflow"):
            assert result.best.alpha == 0.05
        if name in ("datarank", "datarank-fb"):
            assert (result.best.tau_pub, result.best.tau_dataset) == (10.0, 5.0)


def test_export_grid_format(tmp_path):
    g, usage, _ = planted_setup()
    spec = GridSpec(algorithm="datarank", tau_pub_values=[10.0],
                    tau_dataset_values=[5.0], alpha_values=[0.05])
    result = grid_search(g, spec, usage)
    path = tmp_path / "grid.csv"
    export_grid(path, result)
    lines = path.read_text().splitlines()
    assert lines[0] == ("tau_pub,tau_dataset,alpha,beta,pearson,spearman,"
                        "n_matched,converged,status")
    fields = lines[1].split(",")
    assert float(fields[0]) == 10.0
    assert fields[3] == ""  # no beta axis
    assert fields[8] == "ok"


# --- power-law fits ------------------------------------------------------------------


def pareto_samples(k, n, rng, xmin=1.0):
    u = rng.random(n)
    return xmin * (1.0 - u) ** (-1.0 / (k - 1.0))


@pytest.mark.parametrize("k", [2.16, 4.1])
def test_fit_power_law_recovers_exponent(k):
    rng = np.random.default_rng(29)
    vals = pareto_samples(k, 100_000, rng)
    fit = fit_power_law(vals)
    assert fit.exponent == pytest.approx(-k, abs=0.15)
    assert fit.standard_error >= 0
    assert fit.n_points >= 3


def test_fit_power_law_discrete_values():
    rng = np.random.default_rng(37)
    vals = np.floor(pareto_samples(2.16, 100_000, rng)).astype(int)
    vals = vals[vals > 0]
    fit = fit_power_law(vals)
    assert fit.exponent == pytest.approx(-2.16, abs=0.15)


def test_fit_power_law_errors():
    with pytest.raises(InsufficientDataError):
        fit_power_law([5.0] * 100)  # constant -> one occupied bin
    with pytest.raises(InsufficientDataError):
        fit_power_law([1.0, 2.0])
    with pytest.raises(ValueError):
        fit_power_law([1.0, -2.0, 3.0])
    with pytest.raises(InsufficientDataError):
        fit_power_law([])
