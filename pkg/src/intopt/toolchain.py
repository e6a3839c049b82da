"""Resolution and invocation of the external LLVM toolchain.

Binary paths come from, in priority order: environment variables
(``INTOPT_OPT``, ``INTOPT_LLC``, ``INTOPT_CLANGXX``, ``INTOPT_ALIVE_TV``),
an explicit config file (TOML or JSON), and finally a PATH lookup.  When no
real ``opt``/``llc`` is installed, the bundled llvmlite-backed shims
(``intopt-opt``, ``intopt-llc``) are used so the pipeline stays runnable on
hosts without an LLVM build.
"""

from __future__ import annotations

import json
import os
import shutil
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ToolFailure, ToolMissing

_ENV_VARS = {
    "opt": "INTOPT_OPT",
    "llc": "INTOPT_LLC",
    "clangxx": "INTOPT_CLANGXX",
    "alive_tv": "INTOPT_ALIVE_TV",
    "fuzz2bench": "INTOPT_FUZZ2BENCH",
}

_PATH_NAMES = {
    "opt": ["opt"],
    "llc": ["llc"],
    "clangxx": ["clang++"],
    "alive_tv": ["alive-tv"],
    "fuzz2bench": ["fuzz2bench"],
}

# Tools with an in-package fallback implementation.
_SHIM_MODULES = {
    "opt": "intopt.shims.optshim",
    "llc": "intopt.shims.llcshim",
}


@dataclass
class ToolResult:
    returncode: int
    stdout: str
    stderr: str

    @property
    def ok(self) -> bool:
        return self.returncode == 0


@dataclass
class ToolchainConfig:
    """Paths (or argv prefixes) for the compiler tools the pipeline spawns."""

    opt: list[str] | None = None
    llc: list[str] | None = None
    clangxx: list[str] | None = None
    alive_tv: list[str] | None = None
    fuzz2bench: list[str] | None = None
    allow_shims: bool = True
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> "ToolchainConfig":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".json":
            data = json.loads(text)
        else:
            try:
                import tomllib
            except ImportError:
                import tomli as tomllib

            data = tomllib.loads(text)
        section = data.get("toolchain", data)
        kwargs = {}
        for tool in _ENV_VARS:
            value = section.get(tool)
            if value is not None:
                kwargs[tool] = [value] if isinstance(value, str) else list(value)
        if "allow_shims" in section:
            kwargs["allow_shims"] = bool(section["allow_shims"])
        return cls(**kwargs)

    def argv(self, tool: str) -> list[str]:
        """Resolve the argv prefix for *tool*, raising ToolMissing if absent."""
        env_var = _ENV_VARS[tool]
        env_value = os.environ.get(env_var)
        if env_value:
            return [env_value]
        configured = getattr(self, tool)
        if configured:
            return list(configured)
        for name in _PATH_NAMES[tool]:
            found = shutil.which(name)
            if found:
                return [found]
        if self.allow_shims and tool in _SHIM_MODULES:
            return [sys.executable, "-m", _SHIM_MODULES[tool]]
        if tool == "fuzz2bench":
            # Editable-install layout: the C++ tool builds next to src/.
            local = Path(__file__).resolve().parents[2] / "benchtool" / "build" / "fuzz2bench"
            if local.is_file() and os.access(local, os.X_OK):
                return [str(local)]
        raise ToolMissing(
            f"cannot resolve '{tool}': set ${env_var}, configure it, or install it on PATH"
        )

    def available(self, tool: str) -> bool:
        try:
            self.argv(tool)
            return True
        except ToolMissing:
            return False

    def run(
        self,
        tool: str,
        args: list[str],
        *,
        timeout: float | None = None,
        check: bool = False,
        cwd: str | Path | None = None,
    ) -> ToolResult:
        argv = self.argv(tool) + args
        try:
            proc = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=timeout,
                cwd=cwd,
            )
        except FileNotFoundError as exc:
            raise ToolMissing(f"'{argv[0]}' not found") from exc
        result = ToolResult(proc.returncode, proc.stdout, proc.stderr)
        if check and not result.ok:
            raise ToolFailure(
                f"{tool} exited with {result.returncode}: {' '.join(argv)}",
                stderr=result.stderr,
                returncode=result.returncode,
            )
        return result
