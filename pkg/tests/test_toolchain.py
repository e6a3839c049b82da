import sys

import pytest

from intopt.errors import ToolFailure, ToolMissing
from intopt.toolchain import ToolchainConfig


def test_env_var_wins(monkeypatch):
    monkeypatch.setenv("INTOPT_OPT", "/custom/opt")
    config = ToolchainConfig(opt=["/configured/opt"])
    assert config.argv("opt") == ["/custom/opt"]


def test_configured_beats_path(monkeypatch):
    monkeypatch.delenv("INTOPT_OPT", raising=False)
    config = ToolchainConfig(opt=["/configured/opt", "--flag"])
    assert config.argv("opt") == ["/configured/opt", "--flag"]


def test_shim_fallback(monkeypatch):
    monkeypatch.delenv("INTOPT_OPT", raising=False)
    monkeypatch.setenv("PATH", "/nonexistent")
    config = ToolchainConfig()
    argv = config.argv("opt")
    assert argv[0] == sys.executable
    assert argv[-1] == "intopt.shims.optshim"


def test_no_shim_for_alive_tv(monkeypatch):
    monkeypatch.delenv("INTOPT_ALIVE_TV", raising=False)
    monkeypatch.setenv("PATH", "/nonexistent")
    config = ToolchainConfig()
    with pytest.raises(ToolMissing):
        config.argv("alive_tv")
    assert not config.available("alive_tv")


def test_shims_can_be_disabled(monkeypatch):
    monkeypatch.delenv("INTOPT_OPT", raising=False)
    monkeypatch.setenv("PATH", "/nonexistent")
    config = ToolchainConfig(allow_shims=False)
    with pytest.raises(ToolMissing):
        config.argv("opt")


def test_from_toml_file(tmp_path):
    cfg = tmp_path / "tc.toml"
    cfg.write_text(
        '[toolchain]\nopt = "/x/opt"\nclangxx = ["ccache", "clang++"]\n'
        "allow_shims = false\n"
    )
    config = ToolchainConfig.from_file(cfg)
    assert config.opt == ["/x/opt"]
    assert config.clangxx == ["ccache", "clang++"]
    assert config.allow_shims is False


def test_from_json_file(tmp_path):
    cfg = tmp_path / "tc.json"
    cfg.write_text('{"toolchain": {"llc": "/y/llc"}}')
    assert ToolchainConfig.from_file(cfg).llc == ["/y/llc"]


def test_run_check_raises(toolchain):
    with pytest.raises(ToolFailure) as exc:
        toolchain.run("opt", ["--definitely-not-a-flag"], check=True)
    assert exc.value.returncode != 0


def test_run_captures_output(toolchain, tmp_path):
    ir = tmp_path / "p.ll"
    ir.write_text("define void @f() {\nentry:\n  ret void\n}\n")
    result = toolchain.run("opt", ["-passes=verify", "-S", str(ir)])
    assert result.ok
    assert "@f" in result.stdout
