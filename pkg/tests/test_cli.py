import http.server
import json
import threading

import yaml

from rankforge.cli import main

VOCAB = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"]


def _write_corpus(root):
    (root / "docs.tsv").write_text(
        "".join(f"d{i}\t{VOCAB[i]} {VOCAB[(i + 1) % 8]}\n" for i in range(8)),
        encoding="utf-8",
    )
    (root / "queries.tsv").write_text(
        "".join(f"q{i}\t{VOCAB[i]} {VOCAB[(i + 1) % 8]}\n" for i in range(4)),
        encoding="utf-8",
    )
    (root / "qrels.txt").write_text(
        "".join(f"q{i} 0 d{i} 2\n" for i in range(4)),
        encoding="utf-8",
    )
    (root / "tuples.tsv").write_text(
        "".join(
            "\t".join([
                f"{VOCAB[i]} {VOCAB[(i + 1) % 8]}",
                f"{VOCAB[i]} {VOCAB[(i + 1) % 8]}",
                f"{VOCAB[(i + 3) % 8]} {VOCAB[(i + 4) % 8]}",
            ]) + "\n"
            for i in range(4)
        ),
        encoding="utf-8",
    )


def _fit_config_file(tmp_path, output_dir):
    _write_corpus(tmp_path)
    path = tmp_path / "fit.yaml"
    path.write_text(yaml.safe_dump({
        "seed": 5,
        "model": {
            "class_path": "BiEncoder",
            "init_args": {
                "backbone_dim": 16,
                "config": {"class_path": "BiEncoderConfig", "init_args": {"embedding_dim": 8}},
            },
        },
        "data": {
            "train_dataset": {"class_path": "TupleDataset", "init_args": {"path": str(tmp_path / "tuples.tsv")}},
        },
        "trainer": {
            "learning_rate": 0.05,
            "temperature": 0.1,
            "epochs": 2,
            "output_dir": str(output_dir),
        },
    }), encoding="utf-8")
    return path


def test_fit_success_prints_outcome(tmp_path, capsys):
    config = _fit_config_file(tmp_path, tmp_path / "model")
    code = main(["fit", "--config", str(config)])
    out = capsys.readouterr()
    assert code == 0
    assert out.err == ""
    lines = out.out.splitlines()
    assert f"model_dir: {tmp_path / 'model'}" in lines
    assert "sample_count: 4" in lines
    assert "epochs: 2" in lines
    assert (tmp_path / "model" / "model.txt").is_file()


def test_config_equals_form_and_repeated_configs(tmp_path, capsys):
    base = _fit_config_file(tmp_path, tmp_path / "model")
    patch = tmp_path / "patch.yaml"
    patch.write_text(yaml.safe_dump({"trainer": {"epochs": 3}}), encoding="utf-8")
    code = main(["fit", f"--config={base}", f"--config={patch}"])
    out = capsys.readouterr()
    assert code == 0
    assert "epochs: 3" in out.out.splitlines()


def test_dotted_overrides(tmp_path, capsys):
    config = _fit_config_file(tmp_path, tmp_path / "model")
    code = main([
        "fit", "--config", str(config),
        "--trainer.epochs=4",
        "--model.config.embedding_dim=4",
    ])
    out = capsys.readouterr()
    assert code == 0
    assert "epochs: 4" in out.out.splitlines()
    model_txt = (tmp_path / "model" / "model.txt").read_text(encoding="utf-8")
    assert "embedding_dim: 4" in model_txt


def test_seed_flag_beats_config_file(tmp_path, capsys):
    config = _fit_config_file(tmp_path, tmp_path / "model")
    code = main(["fit", "--config", str(config), "--seed", "9"])
    assert code == 0
    capsys.readouterr()
    effective = yaml.safe_load(
        (tmp_path / "model" / "effective-config.yaml").read_text(encoding="utf-8")
    )
    assert effective["seed"] == 9


def test_missing_config_file_exits_2(tmp_path, capsys):
    code = main(["fit", "--config", str(tmp_path / "nope.yaml")])
    out = capsys.readouterr()
    assert code == 2
    assert out.out == ""
    assert out.err.startswith("error[config]: ")
    assert out.err.count("\n") == 1


def test_invalid_config_key_exits_2(tmp_path, capsys):
    config = tmp_path / "bad.yaml"
    config.write_text(yaml.safe_dump({"no_such_block": 1}), encoding="utf-8")
    code = main(["fit", "--config", str(config)])
    out = capsys.readouterr()
    assert code == 2
    assert out.err.startswith("error[config]: ")
    assert "no_such_block" in out.err


def test_runtime_error_exits_1(tmp_path, capsys):
    _write_corpus(tmp_path)
    config = tmp_path / "index.yaml"
    config.write_text(yaml.safe_dump({
        "model": {"class_path": "BiEncoder", "init_args": {"model_dir": str(tmp_path / "missing")}},
        "data": {"doc_dataset": {"class_path": "DocDataset", "init_args": {"path": str(tmp_path / "docs.tsv")}}},
        "trainer": {"callbacks": [
            {"class_path": "IndexAction", "init_args": {"index_dir": str(tmp_path / "index")}},
        ]},
    }), encoding="utf-8")
    code = main(["index", "--config", str(config)])
    out = capsys.readouterr()
    assert code == 1
    assert out.err.startswith("error[")
    assert not out.err.startswith("error[config]")


def test_force_flag_allows_overwrite(tmp_path, capsys):
    config = _fit_config_file(tmp_path, tmp_path / "model")
    assert main(["fit", "--config", str(config)]) == 0
    capsys.readouterr()
    code = main(["fit", "--config", str(config)])
    out = capsys.readouterr()
    assert code == 2
    assert "--force" in out.err
    assert main(["fit", "--config", str(config), "--force"]) == 0
    capsys.readouterr()


def test_search_prints_metrics_and_report(tmp_path, capsys):
    fit_config = _fit_config_file(tmp_path, tmp_path / "model")
    assert main(["fit", "--config", str(fit_config)]) == 0
    index_config = tmp_path / "index.yaml"
    index_config.write_text(yaml.safe_dump({
        "model": {"class_path": "BiEncoder", "init_args": {"model_dir": str(tmp_path / "model")}},
        "data": {"doc_dataset": {"class_path": "DocDataset", "init_args": {"path": str(tmp_path / "docs.tsv")}}},
        "trainer": {"callbacks": [
            {"class_path": "IndexAction", "init_args": {"index_dir": str(tmp_path / "index")}},
        ]},
    }), encoding="utf-8")
    assert main(["index", "--config", str(index_config)]) == 0
    capsys.readouterr()
    search_config = tmp_path / "search.yaml"
    search_config.write_text(yaml.safe_dump({
        "model": {"class_path": "BiEncoder", "init_args": {"model_dir": str(tmp_path / "model")}},
        "data": {
            "query_dataset": {"class_path": "QueryDataset", "init_args": {"path": str(tmp_path / "queries.tsv")}},
            "qrels_path": str(tmp_path / "qrels.txt"),
        },
        "trainer": {"callbacks": [
            {"class_path": "SearchAction", "init_args": {
                "index_dir": str(tmp_path / "index"),
                "run_path": str(tmp_path / "search.run"),
                "k": 5,
                "evaluation_metrics": ["ndcg@5"],
            }},
        ]},
    }), encoding="utf-8")
    code = main(["search", "--config", str(search_config)])
    out = capsys.readouterr()
    assert code == 0
    lines = out.out.splitlines()
    assert "query_count: 4" in lines
    assert any(line.startswith("nDCG@5 (mean): ") for line in lines)
    # the per-query report rows follow the summary
    assert any(line.startswith("nDCG@5\tq0\t") for line in lines)


def test_usage_error_exits_2(capsys):
    assert main([]) == 2
    capsys.readouterr()
    assert main(["frobnicate"]) == 2
    capsys.readouterr()


def test_server_connection_refused(tmp_path, capsys):
    config = _fit_config_file(tmp_path, tmp_path / "model")
    code = main(["fit", "--config", str(config), "--server", "http://127.0.0.1:9"])
    out = capsys.readouterr()
    assert code == 1
    assert out.err.startswith("error[connection]: ")


class _StubHandler(http.server.BaseHTTPRequestHandler):
    requests: list[tuple[str, dict]] = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).requests.append((self.path, body))
        if self.path == "/fit":
            payload = json.dumps({"model_dir": "remote/model", "steps": 8}).encode()
            self.send_response(200)
        else:
            payload = json.dumps({"category": "config", "message": "bad remote config"}).encode()
            self.send_response(422)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


def test_server_mode_posts_raw_config(tmp_path, capsys):
    _StubHandler.requests = []
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        url = f"http://127.0.0.1:{server.server_address[1]}"
        config = _fit_config_file(tmp_path, tmp_path / "model")
        code = main(["fit", "--config", str(config), "--force", "--seed", "3", "--server", url])
        out = capsys.readouterr()
        assert code == 0
        payload = json.loads(out.out)
        assert payload["model_dir"] == "remote/model"
        path, body = _StubHandler.requests[0]
        assert path == "/fit"
        assert body["force"] is True
        assert body["config"]["seed"] == 3
        # nothing ran locally
        assert not (tmp_path / "model").exists()

        code = main(["index", "--config", str(config), "--server", url])
        out = capsys.readouterr()
        assert code == 2
        assert out.err == "error[config]: bad remote config\n"
    finally:
        server.shutdown()
        server.server_close()
