import csv
import json
import math

import numpy as np
import pytest

from fitcomp import analysis, corpus
from fitcomp.cli import main, read_config_file, read_scores
from fitcomp.fitness import AlgoConfig, run
from fitcomp.trade import ExportMatrix, dumps_matrix


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("FITCOMP_OUT_DIR", raising=False)
    return tmp_path


def cli(*argv):
    return main([str(a) for a in argv])


def err_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def write_matrix(path, values, countries=None, products=None):
    values = np.asarray(values, dtype=float)
    m = ExportMatrix(countries or [f"c{i}" for i in range(values.shape[0])],
                     products or [f"p{j}" for j in range(values.shape[1])], values)
    path.write_text(dumps_matrix(m))
    return path


def table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def canonical_file(workdir):
    assert cli("generate", "--out-dir", workdir) == 0
    return workdir / "canonical.json"


# ingest

def test_ingest_three_rows(workdir):
    (workdir / "f.csv").write_text("country,product,value\nA,p,1\nA,q,2\nB,q,3\n")
    assert cli("ingest", "f.csv") == 0
    d = json.loads((workdir / "matrix.json").read_text())
    assert len(d["triplets"]) == 3
    rep = json.loads((workdir / "matrix.prune.json").read_text())
    assert rep["dropped_countries"] == [] and rep["dropped_products"] == []


def test_ingest_bad_header(workdir, capsys):
    (workdir / "f.csv").write_text("c,p,v\nA,p,1\n")
    assert cli("ingest", "f.csv") != 0
    e = err_json(capsys)
    assert e["error"] == "ParseError" and e["expected"] == "country,product,value"


def test_ingest_all_zero(workdir, capsys):
    (workdir / "f.csv").write_text("country,product,value\nA,p,0\nB,q,0\n")
    assert cli("ingest", "f.csv") != 0
    assert err_json(capsys)["error"] == "AllPruned"


def test_ingest_filters(workdir):
    (workdir / "f.csv").write_text("country,product,value\nA,p,5\nB,q,1\nB,p,1\n")
    assert cli("ingest", "f.csv", "--min-country-export", 3) == 0
    rep = json.loads((workdir / "matrix.prune.json").read_text())
    assert rep["dropped_countries"] == ["B"] and rep["dropped_products"] == ["q"]


# fitness

def test_fitness_converged_ranking(workdir):
    path = canonical_file(workdir)
    assert cli("fitness", path, "--binary", "--init", "ones", "--iterations", 200) == 0
    rows = table(workdir / "fitness_countries.csv")
    M = corpus.nested_test_matrix()
    F = run(M, AlgoConfig(iterations=200)).fitness
    assert [float(r["fitness"]) for r in rows] == F.tolist()
    assert [r["country"] for r in rows] == list(M.countries)
    assert all(math.isfinite(float(r["log_fitness"])) for r in rows)
    trace = json.loads((workdir / "fitness_trace.json").read_text())
    assert trace["iterations"] == 200


def test_fitness_anomalous_run(workdir):
    path = canonical_file(workdir)
    assert cli("fitness", path, "--binary", "--init", "degree", "--iterations", 1, "--prefix", "once_") == 0
    assert cli("fitness", path, "--binary", "--iterations", 200) == 0
    assert cli("compare", "once_countries.csv", "fitness_countries.csv", "--scatter", "panel.csv") == 0
    rep = json.loads((workdir / "compare.json").read_text())
    expected = analysis.one_iteration_anomaly(corpus.nested_test_matrix())
    assert rep["spearman"] == expected.spearman < 1
    assert len(table(workdir / "panel.csv")) == 10


def test_fitness_binarize_default(workdir):
    path = canonical_file(workdir)
    assert cli("fitness", path) == 0
    manifest = json.loads((workdir / "fitness_manifest.json").read_text())
    assert manifest["args"]["mode"] == "binarize"
    assert manifest["config"] == AlgoConfig().to_dict()


def test_fitness_extensive_geom_matches_eciplus(workdir):
    rng = np.random.default_rng(1)
    write_matrix(workdir / "x.json", rng.uniform(1, 100, (6, 9)))
    assert cli("fitness", "x.json", "--extensive", "--norm", "geom", "--iterations", 40) == 0
    assert cli("eciplus", "x.json", "--iterations", 20) == 0
    _, F, _ = read_scores(workdir / "fitness_countries.csv", "fitness")
    _, xc, _ = read_scores(workdir / "eciplus_countries.csv", "xc_inf")
    assert analysis.max_relative_deviation(F, xc) <= 1e-9


def test_fitness_rank_stable_and_config_file(workdir):
    path = canonical_file(workdir)
    (workdir / "algo.cfg").write_text("# comment\ninit = degree\nrank_stable = true\nwindow = 5\n")
    assert cli("fitness", path, "--binary", "--config", "algo.cfg", "--keep-every", 50) == 0
    manifest = json.loads((workdir / "fitness_manifest.json").read_text())
    assert manifest["config"]["init"] == "degree" and manifest["config"]["rank_stable"]
    assert manifest["config"]["window"] == 5
    trace = json.loads((workdir / "fitness_trace.json").read_text())
    assert trace["converged"] is True
    assert all(s % 50 == 0 for s in trace["steps"][:-1])


def test_flags_override_config_file(workdir):
    path = canonical_file(workdir)
    (workdir / "algo.cfg").write_text("init = degree\niterations = 7\n")
    assert cli("fitness", path, "--binary", "--config", "algo.cfg", "--init", "ones") == 0
    cfg = json.loads((workdir / "fitness_manifest.json").read_text())["config"]
    assert cfg["init"] == "ones" and cfg["iterations"] == 7


def test_config_file_errors(workdir):
    (workdir / "bad.cfg").write_text("speed = 3\n")
    with pytest.raises(Exception) as exc:
        read_config_file(workdir / "bad.cfg")
    assert "unknown key" in str(exc.value)


def test_fitness_symmetric_leaves_z_blank(workdir):
    write_matrix(workdir / "eye.json", np.eye(3))
    assert cli("fitness", "eye.json", "--binary") == 0
    rows = table(workdir / "fitness_countries.csv")
    assert all(r["z_fitness"] == "" for r in rows)
    assert all(float(r["log_fitness"]) == 0.0 for r in rows)


def test_fitness_binary_rejects_non_binary(workdir, capsys):
    write_matrix(workdir / "x.json", [[2.0, 1.0], [1.0, 1.0]])
    assert cli("fitness", "x.json", "--binary") == 2
    assert err_json(capsys)["error"] == "ParseError"


def test_missing_file(workdir, capsys):
    assert cli("fitness", "nope.json") == 3
    assert err_json(capsys)["error"] == "IOError"


def test_bad_flag_is_json_error(workdir, capsys):
    assert cli("fitness", "x.json", "--init", "random") == 2
    assert err_json(capsys)["error"] == "UsageError"


# eciplus

def test_eciplus_uniform(workdir):
    write_matrix(workdir / "u.json", np.ones((2, 2)))
    assert cli("eciplus", "u.json") == 0
    rows = table(workdir / "eciplus_countries.csv")
    assert [float(r["eci_plus"]) for r in rows] == [0.0, 0.0]
    prows = table(workdir / "eciplus_products.csv")
    assert list(prows[0]) == ["product", "xp_raw_total", "xp_inf", "pci_plus"]


def test_eciplus_unit_scale(workdir):
    rng = np.random.default_rng(2)
    write_matrix(workdir / "x.json", rng.uniform(1, 1e4, (7, 11)))
    assert cli("eciplus", "x.json", "--prefix", "a_") == 0
    assert cli("eciplus", "x.json", "--unit-scale", 1000, "--prefix", "b_") == 0
    _, ea, _ = read_scores(workdir / "a_countries.csv", "eci_plus")
    _, eb, _ = read_scores(workdir / "b_countries.csv", "eci_plus")
    _, pa, _ = read_scores(workdir / "a_products.csv", "pci_plus")
    _, pb, _ = read_scores(workdir / "b_products.csv", "pci_plus")
    assert np.max(np.abs(ea - eb)) <= 1e-12
    assert np.max(np.abs(pb - pa - np.log(1000))) <= 1e-12


def test_eciplus_unreadable(workdir, capsys):
    (workdir / "junk.json").write_text("{not json")
    assert cli("eciplus", "junk.json") != 0
    assert err_json(capsys)["error"] == "ParseError"


# compare

def test_compare_self(workdir):
    path = canonical_file(workdir)
    cli("fitness", path, "--binary")
    assert cli("compare", "fitness_countries.csv", "fitness_countries.csv") == 0
    assert json.loads((workdir / "compare.json").read_text())["spearman"] == 1.0


def test_compare_disjoint_labels(workdir, capsys):
    (workdir / "a.csv").write_text("country,s\nA,1\nB,2\n")
    (workdir / "b.csv").write_text("country,s\nC,1\nD,2\n")
    assert cli("compare", "a.csv", "b.csv") == 2
    e = err_json(capsys)
    assert e["error"] == "LabelMismatch"
    assert e["only_in_a"] == ["A", "B"] and e["only_in_b"] == ["C", "D"]


def test_compare_aligns_by_label(workdir):
    (workdir / "a.csv").write_text("country,s\nA,1\nB,2\nC,3\n")
    (workdir / "b.csv").write_text("country,t\nC,30\nA,10\nB,20\n")
    assert cli("compare", "a.csv", "b.csv") == 0
    assert json.loads((workdir / "compare.json").read_text())["spearman"] == 1.0


# other commands

def test_equivalence_command(workdir):
    rng = np.random.default_rng(3)
    write_matrix(workdir / "x.json", rng.uniform(1, 1e6, (5, 8)))
    assert cli("equivalence", "x.json") == 0
    rep = json.loads((workdir / "equivalence_report.json").read_text())
    assert rep["max_deviation"] <= 1e-9 and rep["converged_spearman"] == 1.0


def test_figure1_command(workdir):
    write_matrix(workdir / "d.json", 5 * np.eye(3))
    assert cli("figure1", "d.json") == 0
    rows = table(workdir / "figure1_eci_vs_log_fitness_converged.csv")
    assert [(float(r["x"]), float(r["y"])) for r in rows] == [(0.0, 0.0)] * 3
    errs = json.loads((workdir / "figure1_figure1_errors.json").read_text())
    assert len(errs) == 2


def test_generate_is_seeded(workdir):
    cli("generate", "--seed", 5, "--name", "a")
    cli("generate", "--seed", 5, "--name", "b")
    cli("generate", "--seed", 6, "--name", "c")
    a, b, c = ((workdir / f"{n}.json").read_text() for n in "abc")
    assert a == b and a != c


def test_out_dir_env(workdir, monkeypatch):
    monkeypatch.setenv("FITCOMP_OUT_DIR", str(workdir / "out"))
    assert cli("generate") == 0
    assert (workdir / "out" / "canonical.json").exists()


# manifests

@pytest.mark.parametrize("argv,manifest", [
    (("fitness", "canonical.json", "--binary", "--init", "degree", "--iterations", 1), "fitness_manifest.json"),
    (("eciplus", "canonical.json", "--unit-scale", 1000), "eciplus_manifest.json"),
    (("equivalence", "canonical.json", "--iterations", 5), "equivalence_manifest.json"),
    (("figure1", "canonical.json"), "figure1_manifest.json"),
])
def test_replay_bit_identical(workdir, capsys, argv, manifest):
    canonical_file(workdir)
    assert cli(*argv) == 0
    before = {p.name: p.read_bytes() for p in workdir.iterdir()}
    assert cli("replay", manifest) == 0
    assert '"identical": true' in capsys.readouterr().out
    after = {p.name: p.read_bytes() for p in workdir.iterdir()}
    assert before == after


def test_replay_detects_changed_input(workdir, capsys):
    path = canonical_file(workdir)
    cli("fitness", path, "--binary")
    write_matrix(path, np.eye(3))
    assert cli("replay", "fitness_manifest.json") == 2
    assert err_json(capsys)["error"] == "ReplayMismatch"


def test_manifest_records_hashes(workdir):
    path = canonical_file(workdir)
    cli("fitness", path, "--binary")
    m = json.loads((workdir / "fitness_manifest.json").read_text())
    assert m["inputs"][0]["path"] == str(path)
    assert len(m["inputs"][0]["sha256"]) == 64
    assert {o["path"].rsplit("/", 1)[-1] for o in m["outputs"]} == {
        "fitness_countries.csv", "fitness_products.csv", "fitness_trace.json"}


def test_ingest_baci_format(workdir):
    (workdir / "baci.csv").write_text(
        "t,i,j,k,v,q\n2010,276,4,1,1.5,2\n2010,276,8,2,2.5,1\n2010,156,4,1,3.0,1\n2009,156,4,2,9.0,1\n"
    )
    (workdir / "codes.csv").write_text("country_code,country_name,country_iso2,country_iso3\n"
                                       "276,Germany,DE,DEU\n156,China,CN,CHN\n")
    assert cli("ingest", "baci.csv", "--format", "baci", "--year", 2010, "--country-codes", "codes.csv") == 0
    d = json.loads((workdir / "matrix.json").read_text())
    assert d["countries"] == ["CHN", "DEU"]
    assert d["triplets"] == [[0, 0, 3.0], [1, 0, 1.5], [1, 1, 2.5]]
    assert cli("replay", "matrix.manifest.json") == 0
