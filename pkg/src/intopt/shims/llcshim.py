"""``llc``-compatible CLI backed by llvmlite.

Supported invocations:

    intopt-llc -filetype=obj file.ll -o file.o
    intopt-llc -filetype=asm file.ll -o file.s
    intopt-llc -relocation-model=pic ...
"""

from __future__ import annotations

import sys
from pathlib import Path


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    filetype = "asm"
    reloc = "pic"
    output = None
    input_path = None
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg.startswith("-filetype="):
            filetype = arg.split("=", 1)[1]
        elif arg.startswith("-relocation-model="):
            reloc = arg.split("=", 1)[1]
        elif arg == "-o":
            i += 1
            output = argv[i]
        elif arg.startswith("-O"):
            pass  # codegen opt level; always use default
        elif arg.startswith("-"):
            print(f"intopt-llc: unsupported flag {arg}", file=sys.stderr)
            return 2
        else:
            input_path = arg
        i += 1

    if not input_path:
        print("intopt-llc: no input file", file=sys.stderr)
        return 2
    try:
        text = Path(input_path).read_text()
    except OSError as exc:
        print(f"intopt-llc: {exc}", file=sys.stderr)
        return 2

    try:
        import llvmlite.binding as llb
    except ImportError:
        print("intopt-llc: llvmlite is not installed", file=sys.stderr)
        return 2
    llb.initialize_native_target()
    llb.initialize_native_asmprinter()
    llb.initialize_native_asmparser()

    try:
        mod = llb.parse_assembly(text)
        mod.verify()
    except RuntimeError as exc:
        print(f"intopt-llc: {exc}", file=sys.stderr)
        return 1

    target = llb.Target.from_default_triple()
    tm = target.create_target_machine(reloc=reloc)
    if filetype == "obj":
        data = tm.emit_object(mod)
        out = output or str(Path(input_path).with_suffix(".o"))
        Path(out).write_bytes(data)
    elif filetype == "asm":
        asm = tm.emit_assembly(mod)
        out = output or str(Path(input_path).with_suffix(".s"))
        Path(out).write_text(asm)
    else:
        print(f"intopt-llc: unsupported filetype {filetype}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
