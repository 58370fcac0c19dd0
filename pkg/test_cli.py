"""命令行端到端测试"""
import json

import pandas as pd
import pytest

from icc.cli import run


def _synthetic(tmp_path, *extra):
    return ["--synthetic", "--n", "8", "--T", "600", "--seed", "3", "--output", str(tmp_path), *extra]


def test_cluster_synthetic(tmp_path):
    """测试合成数据聚类成功并写出全部文件"""
    assert run(["cluster", *_synthetic(tmp_path)]) == 0
    for name in ("manifest.json", "segmentation.csv", "fit_summary.json", "report.json", "timeseries.csv", "sharpe.csv", "llr.csv"):
        assert (tmp_path / name).exists(), name
    assert (tmp_path / "states" / "state_1_precision.csv").exists()
    assert (tmp_path / "states" / "state_1_graph.json").exists()
    segmentation = pd.read_csv(tmp_path / "segmentation.csv")
    assert list(segmentation.columns) == ["date", "state"]
    assert len(segmentation) == 600
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["gamma"] == 16.0
    assert manifest["command"] == "cluster"


def test_gmm_single_state_has_no_switches(tmp_path):
    """测试GMM K=1没有状态切换"""
    assert run(["cluster", *_synthetic(tmp_path, "--model", "gmm", "--K", "1")]) == 0
    summary = json.loads((tmp_path / "fit_summary.json").read_text())
    assert summary["switches"] == 0
    assert summary["cluster_sizes"] == [600]


def test_invalid_config_exit_code(tmp_path):
    """测试配置错误返回退出码1"""
    assert run(["cluster", *_synthetic(tmp_path, "--K", "0")]) == 1
    assert run(["cluster", "--no-such-flag"]) == 1
    assert run(["cluster", "--output", str(tmp_path)]) == 1


def test_basket_too_large_exit_code(tmp_path):
    """测试篮子大于资产数返回退出码2"""
    assert run(["resample", *_synthetic(tmp_path, "--basket-size", "9", "--resamples", "2")]) == 2
    error = json.loads((tmp_path / "error.json").read_text(encoding="utf-8"))
    assert error["code"] == 2002


def test_unwritable_output_exit_code(tmp_path):
    """测试输出目录位于普通文件之下时返回退出码3而非抛出异常"""
    blocker = tmp_path / "blocker"
    blocker.write_text("x")
    assert run(["cluster", *_synthetic(blocker / "out")]) == 3
    assert run(["synth", *_synthetic(blocker / "data")]) == 3


@pytest.mark.slow
def test_cluster_accuracy_over_seeds(tmp_path):
    """测试20资产2000天合成数据在10个种子上聚类准确率不低于0.9"""
    accurate = 0
    for seed in range(10):
        output = tmp_path / f"seed{seed}"
        argv = ["cluster", "--synthetic", "--n", "20", "--T", "2000", "--K", "2", "--gamma", "16", "--seed", str(seed), "--output", str(output)]
        assert run(argv) == 0
        accurate += json.loads((output / "fit_summary.json").read_text())["accuracy"] >= 0.9
    assert accurate >= 9


def test_resample_parallel_is_byte_identical(tmp_path):
    """测试单进程与多进程重采样结果逐字节一致"""
    args = ["--model", "icc-full", "--resamples", "4", "--basket-size", "5"]
    assert run(["resample", *_synthetic(tmp_path / "serial", *args, "--jobs", "1")]) == 0
    assert run(["resample", *_synthetic(tmp_path / "parallel", *args, "--jobs", "4")]) == 0
    serial = (tmp_path / "serial" / "report.json").read_bytes()
    assert serial == (tmp_path / "parallel" / "report.json").read_bytes()
    assert json.loads(serial)["aggregates"]


def test_synth_then_cluster_from_csv(tmp_path):
    """测试写出合成价格后可作为输入再次聚类"""
    assert run(["synth", *_synthetic(tmp_path / "data")]) == 0
    labels = pd.read_csv(tmp_path / "data" / "labels.csv")
    assert len(labels) == 600
    assert run(["cluster", "--input", str(tmp_path / "data" / "prices.csv"), "--model", "icc-full", "--output", str(tmp_path / "fit")]) == 0
    assert len(pd.read_csv(tmp_path / "fit" / "segmentation.csv")) == 600


def test_forecast_delta_one(tmp_path):
    """测试Δ=1的预测运行"""
    assert run(["forecast", *_synthetic(tmp_path, "--delta", "1", "--model", "icc-full")]) == 0
    predictions = pd.read_csv(tmp_path / "predictions.csv")
    assert len(predictions) > 0
    assert set(predictions["predicted_state"]) <= {1, 2}


def test_manifest_reproduces_run(tmp_path):
    """测试用manifest.json重跑得到相同分割"""
    assert run(["cluster", *_synthetic(tmp_path / "first", "--model", "icc-full")]) == 0
    manifest = tmp_path / "first" / "manifest.json"
    assert run(["cluster", "--manifest", str(manifest), "--output", str(tmp_path / "second")]) == 0
    first = (tmp_path / "first" / "segmentation.csv").read_bytes()
    assert first == (tmp_path / "second" / "segmentation.csv").read_bytes()


@pytest.mark.parametrize("command", ["cluster", "forecast", "resample", "synth", "stability"])
def test_help_lists_subcommands(command, capsys):
    """测试每个子命令都有帮助信息"""
    with pytest.raises(SystemExit) as info:
        run([command, "--help"])
    assert info.value.code == 0
    assert "--seed" in capsys.readouterr().out
