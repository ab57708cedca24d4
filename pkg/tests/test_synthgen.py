import json

import numpy as np
import pytest

from canoncount.synthgen import (
    GENERATORS,
    DatasetSpec,
    GeneratorError,
    GenJob,
    derive_seed,
    er_params,
    extba_params,
    generate_dataset,
    generate_graph,
    generate_jobs,
    pl_params,
    read_dataset,
    write_dataset,
)


# --- jobs -----------------------------------------------------------------------

def test_default_spec_job_count():
    assert len(generate_jobs(DatasetSpec(), 0)) == 1827


def test_small_only_spec():
    spec = DatasetSpec(count_small=5, count_large=0)
    jobs = generate_jobs(spec, 3)
    assert len(jobs) == 5
    assert all(10 <= j.n <= 59 for j in jobs)


def test_jobs_deterministic():
    assert generate_jobs(DatasetSpec.desk(), 9) == generate_jobs(DatasetSpec.desk(), 9)
    assert generate_jobs(DatasetSpec.desk(), 9) != generate_jobs(DatasetSpec.desk(), 10)


def test_jobs_cover_ranges_and_generators():
    jobs = generate_jobs(DatasetSpec(), 1)
    small, large = jobs[:1380], jobs[1380:]
    assert all(10 <= j.n <= 59 and 0 <= j.m <= j.n * (j.n - 1) // 2 for j in small)
    assert all(60 <= j.n <= 800 for j in large)
    assert {j.generator for j in jobs} == set(GENERATORS)


def test_genjob_validation():
    with pytest.raises(ValueError):
        GenJob(0, 0, "ER", 1)
    with pytest.raises(ValueError):
        GenJob(4, 7, "ER", 1)
    with pytest.raises(ValueError):
        GenJob(4, 2, "Kronecker", 1)


def test_derive_seed_is_stable():
    # sha256("1:2") first four bytes, big endian
    assert derive_seed(1, 2) == derive_seed("1", "2")
    assert derive_seed(1, 2) != derive_seed(2, 1)
    assert 0 <= derive_seed("x") < 2**32


# --- parameter formulas -----------------------------------------------------

def test_er_params():
    assert er_params(10, 9) == pytest.approx(0.2)
    assert er_params(10, 0) == 0
    assert er_params(4, 6) == 1.0
    with pytest.raises(GeneratorError):
        er_params(1, 0)


def test_ws_params():
    from canoncount.synthgen import ws_params

    assert ws_params(10, 20) == (4, 0.1)
    assert ws_params(10, 5)[0] == 2
    assert ws_params(6, 9)[0] == 4
    with pytest.raises(GeneratorError):
        ws_params(2, 1)


def test_extba_params():
    assert extba_params(10, 25) == (2, 0.5, 0.1)
    assert extba_params(10, 20) == (2, 0.0, 0.1)
    attach, p, q = extba_params(10, 29)
    assert attach == 2 and p == pytest.approx(0.89) and p < 0.9


def test_pl_params():
    assert pl_params(10, 16) == (2, 0.0)
    assert pl_params(10, 21) == (3, 0.0)
    # floor((10 - sqrt(100 - 96)) / 2) = 4, p = (24 - 6 * 4) / (3 * 6) = 0
    assert pl_params(10, 24) == (4, 0.0)
    with pytest.raises(GeneratorError):
        pl_params(10, 26)  # negative discriminant
    with pytest.raises(GeneratorError):
        pl_params(10, 5)  # k < 2


def test_parameter_formulas_stay_in_range():
    for seed in range(6):
        for j in generate_jobs(DatasetSpec(), seed):
            if j.n >= 2:
                assert 0 <= er_params(j.n, j.m) <= 1
                attach, p, q = extba_params(j.n, j.m)
                assert attach >= 0 and 0 <= p <= 0.9 and q == 0.1
            try:
                k, p = pl_params(j.n, j.m)
            except GeneratorError:
                continue
            assert 2 <= k < j.n and 0 <= p <= 1


# --- graph generation ---------------------------------------------------------

def test_gnm_exact_edges():
    for seed in range(5):
        g, used = generate_graph(GenJob(10, 15, "GnmRandom", seed))
        assert used == "GnmRandom" and g.num_edges == 15


def test_er_mean_edge_count():
    mean = np.mean([generate_graph(GenJob(10, 9, "ER", s))[0].num_edges for s in range(200)])
    assert 9 - 1.5 <= mean <= 9 + 1.5


def test_ba_attach_two():
    g, used = generate_graph(GenJob(10, 20, "BA", 4))
    assert used == "BA"
    assert g.is_connected()
    # star seed of 3 nodes (2 edges), then 7 arrivals with 2 links each
    assert g.num_edges == 16


def test_generation_deterministic():
    for gen in GENERATORS:
        a, _ = generate_graph(GenJob(25, 50, gen, 11))
        b, _ = generate_graph(GenJob(25, 50, gen, 11))
        assert a == b


def test_pl_fallback_recorded():
    g, used = generate_graph(GenJob(20, 10, "PLCluster", 1))
    assert used == "GnmRandom" and g.num_edges == 10


def test_tiny_graphs_fall_back():
    g, used = generate_graph(GenJob(2, 1, "WS", 0))
    assert used == "GnmRandom" and g.num_edges == 1


@pytest.mark.parametrize("gen", GENERATORS)
@pytest.mark.parametrize("n, m", [(30, 60), (50, 100)])
def test_edge_count_fidelity(gen, n, m):
    # jobs with integral m / n, so BA's rounded attachment is exact
    mean = np.mean([generate_graph(GenJob(n, m, gen, s))[0].num_edges for s in range(200)])
    assert abs(mean - m) <= 0.2 * m, (gen, mean)


def test_no_generator_errors_over_ten_thousand_jobs():
    jobs = [j for seed in range(6) for j in generate_jobs(DatasetSpec(), 1000 + seed)][:10000]
    assert len(jobs) == 10000
    for j in jobs:
        g, _ = generate_graph(j)
        assert g.num_nodes == j.n


# --- datasets -------------------------------------------------------------------

def test_desk_dataset(tmp_path):
    ds = generate_dataset(DatasetSpec.desk(), 0)
    assert len(ds) == 200
    assert all(10 <= g.num_nodes <= 30 for g in ds.graphs)
    write_dataset(ds, tmp_path / "a")
    back = read_dataset(tmp_path / "a")
    assert [g for g in back.graphs] == ds.graphs
    assert back.jobs == ds.jobs


def test_manifest_byte_identical(tmp_path):
    spec = DatasetSpec(count_small=30, count_large=2, node_range_large=(60, 80))
    write_dataset(generate_dataset(spec, 5), tmp_path / "a")
    write_dataset(generate_dataset(spec, 5), tmp_path / "b")
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()
    for i in range(32):
        assert (tmp_path / "a" / f"graphs/{i}.txt").read_bytes() == (tmp_path / "b" / f"graphs/{i}.txt").read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 5 and len(manifest["graphs"]) == 32
    assert all("index_seed" in e and "generator_used" in e for e in manifest["graphs"])


def test_spec_from_dict():
    spec = DatasetSpec.from_dict({"count_small": 3, "node_range_small": [5, 6], "count_large": 0})
    assert spec.node_range_small == (5, 6)
    with pytest.raises(ValueError):
        DatasetSpec.named("huge")
