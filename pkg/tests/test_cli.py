import numpy as np
import pytest

from retrotune import load_embeddings, load_freeze_state, load_params, load_task
from retrotune.cli import main

from conftest import random_embedding_set


def write_vectors(path, es):
    from retrotune import save_embeddings

    save_embeddings(es, path, "text")


@pytest.fixture
def pair_file(tmp_path):
    path = tmp_path / "pair.txt"
    path.write_text("2 1\na 0\nb 3\n", encoding="utf-8")
    return path


def test_no_command_prints_usage(capsys):
    assert main([]) == 1
    err = capsys.readouterr().err
    assert "usage" in err


def test_unknown_command_is_usage_error(capsys):
    assert main(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err


def test_missing_required_flag_is_usage_error(capsys):
    assert main(["convert", "--out", "x.txt"]) == 1
    err = capsys.readouterr().err
    assert "usage" in err


def test_unknown_flag_is_usage_error(capsys):
    assert main(["convert", "--in", "a", "--out", "b", "--wat"]) == 1
    assert "usage" in capsys.readouterr().err


def test_bad_choice_is_usage_error(capsys):
    assert main(["convert", "--in", "a", "--out", "b", "--to", "parquet"]) == 1
    assert "usage" in capsys.readouterr().err


def test_missing_input_file_is_data_error(tmp_path, capsys):
    out = tmp_path / "out.txt"
    code = main(["convert", "--in", str(tmp_path / "none.txt"), "--out", str(out)])
    assert code == 2
    assert "error:" in capsys.readouterr().err
    assert not out.exists()


def test_run_config_is_printed(pair_file, tmp_path, capsys):
    out = tmp_path / "out.bin"
    code = main([
        "convert", "--in", str(pair_file), "--out", str(out), "--to", "binary",
    ])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "run config:" in stdout
    assert "to_fmt = binary" in stdout


def test_convert_roundtrip(tmp_path, capsys):
    rng = np.random.default_rng(50)
    es = random_embedding_set(rng, 20, 6)
    src = tmp_path / "v.txt"
    write_vectors(src, es)
    mid = tmp_path / "v.bin"
    back = tmp_path / "v2.txt"
    assert main(["convert", "--in", str(src), "--out", str(mid),
                 "--from", "text", "--to", "binary"]) == 0
    assert main(["convert", "--in", str(mid), "--out", str(back),
                 "--from", "binary", "--to", "text"]) == 0
    a = load_embeddings(src, "text")
    b = load_embeddings(back, "text")
    assert a.vocab == b.vocab
    assert np.array_equal(
        a.vectors.astype(np.float32), b.vectors.astype(np.float32)
    )
    assert load_embeddings(src, "text").vocab == es.vocab  # input untouched


def test_build_graph_requires_a_source(pair_file, tmp_path, capsys):
    code = main(["build-graph", "--vectors", str(pair_file),
                 "--out", str(tmp_path / "g.txt")])
    assert code == 1
    assert "corpus" in capsys.readouterr().err


def test_build_graph_from_corpus(tmp_path, capsys):
    vecs = tmp_path / "v.txt"
    vecs.write_text(
        "3 2\ndog 1 0\npark 0 1\nleash 1 1\n", encoding="utf-8"
    )
    corpus = tmp_path / "corpus.txt"
    corpus.write_text(
        "dog park\ndog park\ndog leash\npark leash\n", encoding="utf-8"
    )
    out = tmp_path / "edges.txt"
    code = main(["build-graph", "--vectors", str(vecs), "--corpus", str(corpus),
                 "--min-count", "1", "--top-k", "10", "--out", str(out)])
    assert code == 0
    lines = set(out.read_text(encoding="utf-8").splitlines())
    assert lines == {"dog park 1.0", "dog leash 1.0", "park leash 1.0"}


def test_build_graph_from_lexicon_with_merge(tmp_path):
    vecs = tmp_path / "v.txt"
    vecs.write_text("3 1\na 1\nb 2\nc 3\n", encoding="utf-8")
    lex = tmp_path / "lex.txt"
    lex.write_text("a b\n", encoding="utf-8")
    corpus = tmp_path / "c.txt"
    corpus.write_text("b c\nb c\n", encoding="utf-8")
    out = tmp_path / "edges.txt"
    code = main(["build-graph", "--vectors", str(vecs), "--lexicon", str(lex),
                 "--corpus", str(corpus), "--min-count", "1", "--top-k", "3",
                 "--out", str(out)])
    assert code == 0
    lines = set(out.read_text(encoding="utf-8").splitlines())
    assert lines == {"a b 1.0", "b c 1.0"}


def test_build_graph_stopwords(tmp_path):
    vecs = tmp_path / "v.txt"
    vecs.write_text("2 1\ndog 1\npark 2\n", encoding="utf-8")
    corpus = tmp_path / "c.txt"
    corpus.write_text("the dog park\n", encoding="utf-8")
    stop = tmp_path / "stop.txt"
    stop.write_text("the\n", encoding="utf-8")
    out = tmp_path / "edges.txt"
    code = main(["build-graph", "--vectors", str(vecs), "--corpus", str(corpus),
                 "--stopwords", str(stop), "--min-count", "1", "--top-k", "2",
                 "--out", str(out)])
    assert code == 0
    assert out.read_text(encoding="utf-8").splitlines() == ["dog park 1.0"]


def test_merge_graph_needs_two_inputs(pair_file, tmp_path, capsys):
    g = tmp_path / "g1.txt"
    g.write_text("a b 1.0\n", encoding="utf-8")
    code = main(["merge-graph", "--vectors", str(pair_file),
                 "--graph", str(g), "--out", str(tmp_path / "m.txt")])
    assert code == 1


def test_merge_graph_unions_edges(tmp_path):
    vecs = tmp_path / "v.txt"
    vecs.write_text("3 1\na 1\nb 2\nc 3\n", encoding="utf-8")
    g1 = tmp_path / "g1.txt"
    g1.write_text("a b 1.0\nb c 2.0\n", encoding="utf-8")
    g2 = tmp_path / "g2.txt"
    g2.write_text("b c 5.0\na c 1.0\n", encoding="utf-8")
    out = tmp_path / "m.txt"
    code = main(["merge-graph", "--vectors", str(vecs), "--graph", str(g1),
                 "--graph", str(g2), "--out", str(out)])
    assert code == 0
    lines = set(out.read_text(encoding="utf-8").splitlines())
    assert lines == {"a b 1.0", "a c 1.0", "b c 5.0"}


def test_retrofit_fixture_via_cli(pair_file, tmp_path, capsys):
    edges = tmp_path / "edges.txt"
    edges.write_text("a b 1.0\n", encoding="utf-8")
    out = tmp_path / "fitted.txt"
    code = main([
        "retrofit", "--vectors", str(pair_file), "--graph", str(edges),
        "--out", str(out), "--iterations", "300", "--tolerance", "1e-12",
    ])
    assert code == 0
    fitted = load_embeddings(out, "text")
    assert abs(fitted.row("a")[0] - 1.0) <= 1e-9
    assert abs(fitted.row("b")[0] - 2.0) <= 1e-9
    # inputs never change
    assert load_embeddings(pair_file, "text").row("a")[0] == 0.0


def test_retrofit_report_dir(tmp_path):
    rng = np.random.default_rng(55)
    es = random_embedding_set(rng, 12, 4)
    vecs = tmp_path / "v.txt"
    write_vectors(vecs, es)
    edges = tmp_path / "edges.txt"
    edges.write_text(
        "".join(f"w{a:03d} w{a + 1:03d} 1.0\n" for a in range(0, 10, 2)),
        encoding="utf-8",
    )
    out = tmp_path / "fitted.txt"
    report = tmp_path / "reports"
    code = main([
        "retrofit", "--vectors", str(vecs), "--graph", str(edges),
        "--out", str(out), "--iterations", "10", "--report-dir", str(report),
    ])
    assert code == 0
    for name in ("objective_trace.csv", "objective_trace.png", "drift.csv",
                 "drift.png", "cohesion_before.csv", "cohesion_after.csv"):
        assert (report / name).exists(), name


def test_retrofit_respects_alpha_mode_flag(tmp_path):
    vecs = tmp_path / "v.txt"
    vecs.write_text("3 1\na 0\nb 3\nc 9\n", encoding="utf-8")
    edges = tmp_path / "edges.txt"
    edges.write_text("a b 1.0\nb c 1.0\n", encoding="utf-8")
    out_deg = tmp_path / "deg.txt"
    out_unit = tmp_path / "unit.txt"
    base = ["retrofit", "--vectors", str(vecs), "--graph", str(edges),
            "--iterations", "200", "--tolerance", "1e-13"]
    assert main(base + ["--out", str(out_deg), "--alpha-mode", "degree"]) == 0
    assert main(base + ["--out", str(out_unit), "--alpha-mode", "unit"]) == 0
    deg = load_embeddings(out_deg, "text")
    unit = load_embeddings(out_unit, "text")
    assert not np.array_equal(deg.vectors, unit.vectors)


def test_make_task_then_multitask(tmp_path, capsys):
    rng = np.random.default_rng(60)
    es = random_embedding_set(rng, 14, 8)
    vecs = tmp_path / "v.txt"
    write_vectors(vecs, es)
    t1 = tmp_path / "alpha.tsv"
    t2 = tmp_path / "beta.tsv"
    for path, seed in ((t1, 1), (t2, 2)):
        code = main(["make-task", "--vectors", str(vecs), "--out", str(path),
                     "--n-samples", "12", "--visual-dim", "5",
                     "--seed", str(seed), "--phrase-min", "1",
                     "--phrase-max", "3"])
        assert code == 0
    task = load_task(t1, load_embeddings(vecs, "text").vocab, "alpha")
    assert len(task.phrases) == 12
    out_dir = tmp_path / "run"
    code = main([
        "multitask", "--vectors", str(vecs),
        "--tasks", f"alpha={t1}", "--tasks", f"beta={t2}",
        "--epochs", "3", "--lr", "0.02", "--batch-size", "4",
        "--proj-size", "6", "--out-dir", str(out_dir),
    ])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "frozen features: 8 of 8" in stdout
    for name in ("embeddings.txt", "freeze_state.txt", "params_alpha.txt",
                 "params_beta.txt", "loss_trace_alpha.csv",
                 "loss_trace_beta.csv", "loss_traces.png", "drift.csv",
                 "drift.png", "recall_alpha.csv", "recall_alpha.png",
                 "recall_beta.csv", "recall_beta.png"):
        assert (out_dir / name).exists(), name
    state = load_freeze_state(out_dir / "freeze_state.txt")
    assert state.dim == 8
    assert state.frozen_count == 8
    by_task = {}
    for f in state.frozen_features():
        by_task.setdefault(state.task_of(f), 0)
        by_task[state.task_of(f)] += 1
    assert by_task == {"alpha": 4, "beta": 4}
    params = load_params(out_dir / "params_alpha.txt")
    assert params.kind == "average"
    fitted = load_embeddings(out_dir / "embeddings.txt", "text")
    assert fitted.vocab == es.vocab


def test_multitask_no_freeze(tmp_path):
    rng = np.random.default_rng(61)
    es = random_embedding_set(rng, 8, 4)
    vecs = tmp_path / "v.txt"
    write_vectors(vecs, es)
    t1 = tmp_path / "solo.tsv"
    assert main(["make-task", "--vectors", str(vecs), "--out", str(t1),
                 "--n-samples", "6", "--visual-dim", "3", "--seed", "4",
                 "--phrase-min", "1", "--phrase-max", "2"]) == 0
    out_dir = tmp_path / "run"
    code = main([
        "multitask", "--vectors", str(vecs), "--tasks", f"solo={t1}",
        "--epochs", "2", "--no-freeze", "--proj-size", "4",
        "--out-dir", str(out_dir),
    ])
    assert code == 0
    assert not (out_dir / "freeze_state.txt").exists()
    assert (out_dir / "embeddings.txt").exists()


def test_eval_requires_a_mode(pair_file, tmp_path, capsys):
    assert main(["eval", "--vectors", str(pair_file),
                 "--out-dir", str(tmp_path)]) == 1


def test_eval_reports(tmp_path, capsys):
    rng = np.random.default_rng(62)
    es = random_embedding_set(rng, 10, 4)
    vecs = tmp_path / "v.txt"
    write_vectors(vecs, es)
    base = tmp_path / "base.txt"
    shifted = random_embedding_set(np.random.default_rng(63), 10, 4)
    from retrotune import EmbeddingSet, save_embeddings

    save_embeddings(EmbeddingSet(es.vocab, shifted.vectors), base, "text")
    edges = tmp_path / "edges.txt"
    edges.write_text(f"{es.vocab[0]} {es.vocab[1]} 1.0\n", encoding="utf-8")
    out_dir = tmp_path / "reports"
    code = main([
        "eval", "--vectors", str(vecs), "--graph", str(edges),
        "--baseline", str(base), "--words", f"{es.vocab[0]},{es.vocab[2]}",
        "--top-k", "3", "--out-dir", str(out_dir),
    ])
    assert code == 0
    for name in ("cohesion.csv", "drift.csv", "drift.png", "neighbors.csv"):
        assert (out_dir / name).exists(), name
    body = (out_dir / "neighbors.csv").read_text(encoding="utf-8")
    assert body.count(es.vocab[0]) >= 1
    stdout = capsys.readouterr().out
    assert "cohesion:" in stdout and "drift:" in stdout


def test_eval_baseline_vocab_mismatch_is_data_error(tmp_path, capsys):
    rng = np.random.default_rng(64)
    es = random_embedding_set(rng, 5, 3)
    other = random_embedding_set(rng, 5, 3, prefix="x")
    vecs = tmp_path / "v.txt"
    base = tmp_path / "b.txt"
    write_vectors(vecs, es)
    write_vectors(base, other)
    code = main(["eval", "--vectors", str(vecs), "--baseline", str(base),
                 "--out-dir", str(tmp_path)])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_malformed_vectors_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("not a header\n", encoding="utf-8")
    code = main(["eval", "--vectors", str(bad), "--words", "a",
                 "--out-dir", str(tmp_path)])
    assert code == 2
    assert "error:" in capsys.readouterr().err
