#!/usr/bin/env python3
"""Regenerate the committed replay fixtures under tests/fixtures/replay/.

Runs the staged pipeline for the three fixture programs against a local
scripted model stub and records the transcripts, so the test suite can run
`intopt batch --mode replay` fully offline. Also rebuilds the fixture
knowledge base. Output is deterministic; reruns must be no-ops, which the
test suite relies on.
"""

from __future__ import annotations

import json
import re
import shutil
import sys
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from intopt.cli import PipelineConfig, _optimize_program  # noqa: E402
from intopt.ir import compile_o3_reference, load_ir  # noqa: E402
from intopt.kb import build_kb  # noqa: E402
from intopt.llm import BackendConfig  # noqa: E402
from intopt.toolchain import ToolchainConfig  # noqa: E402

FIXTURES = REPO / "tests" / "fixtures"
REPLAY = FIXTURES / "replay"
PROGRAMS = ["sum_squares", "wrapper_exchange", "bit_count"]

FORMULATION_RESPONSE = """<code>
<step>
**Transformation**: Promote memory to registers
**Change**: Replace the stack slots with SSA values so the loop carries its state in registers.
</step>
<step>
**Transformation**: Loop strength reduction and unrolling
**Change**: Unroll the hot loop and simplify the per-iteration arithmetic.
</step>
</code>"""

REFINEMENT_RESPONSE = """<advice>
- Promote memory to registers. Replace every alloca, load, and store with phi-carried SSA values; the dominator tree shows a single loop header so placement is direct.
- Simplify loop arithmetic. Fold redundant instructions and combine the induction variable update with the exit comparison.
</advice>"""


def make_handler(o3_by_marker: dict[str, str]):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers["Content-Length"])
            body = json.loads(self.rfile.read(length))
            prompt = body["messages"][0]["content"]
            if prompt.startswith("[INST]"):
                content = FORMULATION_RESPONSE
            elif "final optimization advice" in prompt:
                content = REFINEMENT_RESPONSE
            else:
                content = None
                for marker, ir in o3_by_marker.items():
                    if marker in prompt:
                        content = f"<code>\n{ir.rstrip()}\n</code>"
                        break
                if content is None:
                    self.send_error(400, "unrecognized realization prompt")
                    return
            payload = json.dumps(
                {"choices": [{"message": {"content": content}}]}
            ).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, *args):
            pass

    return Handler


def main() -> None:
    toolchain = ToolchainConfig()

    kb = build_kb(
        FIXTURES / "llvm",
        docs_source=(FIXTURES / "llvm" / "llvm" / "docs" / "Passes.rst").read_text(),
    )
    REPLAY.mkdir(parents=True, exist_ok=True)
    kb.save(REPLAY / "kb.json")
    print(f"kb: {len(kb.entries)} entries")

    o3_by_marker = {}
    for name in PROGRAMS:
        program = load_ir(FIXTURES / "ir" / f"{name}.ll")
        o3 = compile_o3_reference(program, toolchain)
        o3_by_marker[f"@{name}("] = o3.text

    transcript_dir = REPLAY / "transcripts"
    if transcript_dir.exists():
        shutil.rmtree(transcript_dir)
    transcript_dir.mkdir()

    server = HTTPServer(("127.0.0.1", 0), make_handler(o3_by_marker))
    port = server.server_address[1]
    threading.Thread(target=server.serve_forever, daemon=True).start()

    config = PipelineConfig(
        toolchain=toolchain,
        kb_path=str(REPLAY / "kb.json"),
        backends={
            "scripted": BackendConfig(
                backend_id="scripted",
                kind="openai_chat",
                endpoint=f"http://127.0.0.1:{port}/v1",
                model="scripted-stub",
                transcript_dir=str(transcript_dir),
            )
        },
        backend="scripted",
        mode="pipeline",
    )

    for name in PROGRAMS:
        program = load_ir(FIXTURES / "ir" / f"{name}.ll")
        optimized, meta = _optimize_program(program, config)
        assert optimized.valid is not False, f"{name}: generated IR invalid"
        print(f"{name}: {len(meta['analyses'])} analyses, "
              f"{len(optimized.text.splitlines())} IR lines")
    server.shutdown()

    manifest = REPLAY / "manifest.txt"
    manifest.write_text("".join(f"../ir/{name}.ll\n" for name in PROGRAMS))

    # Endpoint/model stay in the config so the request hashes are stable in
    # replay mode (the hash covers backend_id, prompt, and sampling only).
    (REPLAY / "config.toml").write_text(
        'kb = "kb.json"\n'
        'backend = "scripted"\n'
        'mode = "replay"\n'
        "fuzz_runs = 500\n"
        "\n"
        "[backends.scripted]\n"
        'kind = "openai_chat"\n'
        'endpoint = "http://127.0.0.1:1/v1"\n'
        'model = "scripted-stub"\n'
        'transcript_dir = "transcripts"\n'
    )
    n = len(list(transcript_dir.glob("*.json")))
    print(f"transcripts: {n}")


if __name__ == "__main__":
    main()
